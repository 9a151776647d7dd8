//! Fisher-KPP Cauchy problems `u_t = u_xx + f(u)` with slowly decaying,
//! front-like initial data.
//!
//! The crate integrates the problem on right-expanding nonuniform grids,
//! tracks level sets, computes traveling fronts for the finite-speed
//! baselines, and checks the observed solutions against band inclusions,
//! explicit sub/supersolutions and flatness estimates.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fronts;
pub mod grid;
pub mod harness;
pub mod levelsets;
pub mod nonlinearity;
pub mod ode;
pub mod profiles;
pub mod solver;
pub mod theory;
pub mod tridiag;

pub use error::{Error, Result};
pub use fronts::TravelingFront;
pub use grid::{Grid, GridKind, GridSpec};
pub use levelsets::{GrowthFit, GrowthLaw, LevelSetTrajectory};
pub use nonlinearity::{Nonlinearity, PureDiffusion, Reaction};
pub use profiles::{Derivative, Family, InitialProfile, ProfileSpec, TargetCurve};
pub use solver::{CauchyState, Observer, RunRecord, SolverConfig, TimeStep};
pub use theory::{ComparisonBound, FlatnessRecord};
