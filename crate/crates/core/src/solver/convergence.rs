//! Observed orders of accuracy from runs at halved step sizes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{run_from_state, CauchyState, FarField, OdeFarField, SolverConfig, TimeStep};
use crate::error::Result;
use crate::grid::{GridKind, GridSpec};
use crate::nonlinearity::{Nonlinearity, PureDiffusion, Reaction};
use crate::profiles::{Family, InitialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceProblem {
    /// Heat equation with Gaussian data against the exact kernel, halving `h`.
    HeatSpace,
    /// Spatially uniform logistic state against the closed form, halving `dt`.
    ReactionTime,
    /// Full logistic problem with an exponential-tail front, halving `dt`,
    /// measured by self-convergence.
    StrangTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub problem: ConvergenceProblem,
    /// Step sizes (`h` or `dt`) of the three runs.
    pub steps: Vec<f64>,
    /// Error measures: against the exact solution, or differences of consecutive runs.
    pub errors: Vec<f64>,
    /// `log2` of consecutive error ratios.
    pub orders: Vec<f64>,
    /// Order from the finest pair.
    pub order: f64,
}

fn spec(kind: GridKind, x_left: f64, x_right: f64, n: usize) -> GridSpec {
    GridSpec {
        kind,
        x_left,
        x_right,
        n,
        stretch: 0.0,
        node_budget: 1_000_000,
    }
}

fn fixed_run(
    state: CauchyState,
    reaction: &dyn Reaction,
    far: &dyn FarField,
    grid: GridSpec,
    dt: f64,
    t_end: f64,
    check_monotone: bool,
) -> Result<CauchyState> {
    let mut cfg = SolverConfig::new(grid);
    cfg.time_step = TimeStep::Fixed { dt };
    cfg.observation_interval = t_end;
    cfg.check_monotone = check_monotone;
    cfg.expand = false;
    let rec = run_from_state(state, reaction, far, &cfg, t_end, &mut [])?.into_result()?;
    Ok(rec.state)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// L-infinity error of the pure-diffusion solver against the heat kernel
/// for `u0 = e^{-x^2}` on a uniform grid over `[-20, 20]` with `n` intervals.
pub fn heat_kernel_error(n: usize, dt: f64, t_end: f64) -> Result<f64> {
    let gs = spec(GridKind::Uniform, -20.0, 20.0, n);
    let grid = gs.build()?;
    let u = grid.nodes().iter().map(|x| (-x * x).exp()).collect();
    let state = CauchyState::new(grid, u)?;
    let far = |t: f64, x: f64| (-x * x / (1.0 + 4.0 * t)).exp() / (1.0 + 4.0 * t).sqrt();
    let end = fixed_run(state, &PureDiffusion, &far, gs, dt, t_end, false)?;
    let s = 1.0 + 4.0 * t_end;
    Ok(end
        .nodes()
        .iter()
        .zip(&end.u)
        .map(|(x, v)| (v - (-x * x / s).exp() / s.sqrt()).abs())
        .fold(0.0, f64::max))
}

/// Error of a spatially uniform state `u = s0` against the logistic flow.
pub fn uniform_logistic_error(nl: &Nonlinearity, s0: f64, dt: f64, t_end: f64) -> Result<f64> {
    let gs = spec(GridKind::Uniform, -10.0, 10.0, 64);
    let grid = gs.build()?;
    let n = grid.len();
    let state = CauchyState::new(grid, vec![s0; n])?;
    let far = |t: f64, _x: f64| nl.flow(s0, t);
    let end = fixed_run(state, nl, &far, gs, dt, t_end, false)?;
    let exact = nl.flow(s0, t_end);
    Ok(end.u.iter().map(|v| (v - exact).abs()).fold(0.0, f64::max))
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

pub fn convergence_order(problem: ConvergenceProblem) -> Result<ConvergenceReport> {
    let (steps, errors) = match problem {
        ConvergenceProblem::HeatSpace => {
            let ns = [200usize, 400, 800];
            let errors = ns
                .iter()
                .map(|&n| heat_kernel_error(n, 1e-3, 1.0))
                .collect::<Result<Vec<_>>>()?;
            (
                ns.iter().map(|&n| 40.0 / n as f64).collect::<Vec<_>>(),
                errors,
            )
        }
        ConvergenceProblem::ReactionTime => {
            let nl = Nonlinearity::logistic(1.0)?;
            let dts = [0.2, 0.1, 0.05];
            let errors = dts
                .iter()
                .map(|&dt| uniform_logistic_error(&nl, 0.3, dt, 5.0))
                .collect::<Result<Vec<_>>>()?;
            (dts.to_vec(), errors)
        }
        ConvergenceProblem::StrangTime => {
            let nl = Nonlinearity::logistic(1.0)?;
            let p = InitialProfile::new(
                Family::Exponential,
                &BTreeMap::from([("alpha".to_string(), 0.5)]),
                0.9,
                None,
                2.0,
            )?;
            let gs = spec(GridKind::Uniform, -20.0, 40.0, 600);
            let far = OdeFarField {
                profile: &p,
                reaction: &nl,
            };
            let dts = [0.2, 0.1, 0.05, 0.025];
            let runs = dts
                .iter()
                .map(|&dt| {
                    let state = CauchyState::initial(&p, gs.build()?)?;
                    fixed_run(state, &nl, &far, gs.clone(), dt, 2.0, true).map(|s| s.u)
                })
                .collect::<Result<Vec<_>>>()?;
            let diffs = runs
                .windows(2)
                .map(|w| max_abs_diff(&w[0], &w[1]))
                .collect();
            (dts[..3].to_vec(), diffs)
        }
    };
    let orders = orders(&errors);
    Ok(ConvergenceReport {
        problem,
        order: *orders.last().unwrap_or(&f64::NAN),
        steps,
        errors,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reaction_only_is_at_least_second_order() {
        let r = convergence_order(ConvergenceProblem::ReactionTime).unwrap();
        assert!(r.order >= 2.0, "{r:?}");
    }

    #[test]
    fn heat_space_order_is_two() {
        let r = convergence_order(ConvergenceProblem::HeatSpace).unwrap();
        assert!(r.order > 1.7 && r.order < 2.3, "{r:?}");
    }

    #[test]
    fn strang_time_order_is_two() {
        let r = convergence_order(ConvergenceProblem::StrangTime).unwrap();
        assert!(r.order > 1.7 && r.order < 2.3, "{r:?}");
    }
}
