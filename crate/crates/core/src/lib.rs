//! Numerical laboratory for a zero-sum game between a stopper and a singular
//! controller on a one-dimensional diffusion.
//!
//! The pipeline solves the min-max variational inequality for the game value,
//! extracts the stopping and action boundaries, solves the auxiliary stopping
//! problem whose value is `v_x`, simulates the saddle strategies, and measures
//! the regularity of the solution under grid refinement.

pub mod boundaries;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod os_solver;
pub mod pipeline;
pub mod simulate;
pub mod vi_solver;

pub use boundaries::{
    check_boundary_shape, extract_boundaries, FreeBoundaries, LowerBoundary, ShapeReport, UpperBoundary,
};
pub use config::RunConfig;
pub use diagnostics::{regularity_report, RegularityCheck, RegularityReport, Resolution};
pub use error::{Error, Result};
pub use field::Field;
pub use grid::{make_grid, LatticeGrid};
pub use model::{catalog_model, lambda_rate, theta, validate_assumptions, AssumptionReport, DomainKind, GameModel};
pub use os_solver::{extract_b_os, solve_vx_os, OsSurface};
pub use simulate::{McReport, PathBundle};
pub use vi_solver::{
    residual_report, solve_vi, solve_vi_penalty, Region, ResidualSummary, SolverSettings, ValueSurface,
};
