//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use kpplab_core::solver::OdeFarField;
use kpplab_core::{CauchyState, Family, GridKind, GridSpec, InitialProfile, Nonlinearity};

pub fn logistic() -> Nonlinearity {
    Nonlinearity::logistic(1.0).expect("r = 1 is valid")
}

/// Algebraic tail `x^{-2}`, the main accelerating case.
pub fn algebraic_profile() -> InitialProfile {
    let params = BTreeMap::from([("alpha".to_string(), 2.0)]);
    InitialProfile::new(Family::Algebraic, &params, 0.9, None, 2.0).expect("valid profile")
}

pub fn log_grid(n: usize) -> GridSpec {
    GridSpec {
        kind: GridKind::LogStretched,
        x_left: -10.0,
        x_right: 1000.0,
        n,
        stretch: 0.5,
        node_budget: 1_000_000,
    }
}

/// Initial state of the algebraic profile on a log-stretched grid with `n` intervals.
pub fn algebraic_state(n: usize) -> CauchyState {
    let grid = log_grid(n).build().expect("valid grid");
    CauchyState::initial(&algebraic_profile(), grid).expect("valid state")
}

pub fn far_field<'a>(p: &'a InitialProfile, nl: &'a Nonlinearity) -> OdeFarField<'a> {
    OdeFarField {
        profile: p,
        reaction: nl,
    }
}

/// Diagonally dominant system `(lower, diag, upper, rhs)` of size `n`.
pub fn tridiagonal_system(n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let lower = vec![-1.0; n];
    let upper = vec![-1.0; n];
    let diag = vec![4.0; n];
    let rhs = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
    (lower, diag, upper, rhs)
}
