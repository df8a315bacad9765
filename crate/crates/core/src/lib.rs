//! Sup-norm stability toolkit for nonlinear parabolic equations with
//! in-domain and boundary disturbances: explicit gain formulas, a
//! second-order solver, bound checks against simulated trajectories,
//! backstepping boundary feedback and cascade interconnections.

pub mod backstepping;
pub mod cascade;
pub mod config;
pub mod error;
pub mod expr;
pub mod gains;
pub mod grid;
pub mod harness;
pub mod solver;
pub mod special;

pub use config::Config;
pub use error::{Error, Result};
pub use expr::{parse_expression, Expr};
pub use gains::{BoundaryKind, CoefficientBounds, Exponent, GainSet, SobolevConstants};
pub use grid::{Domain, Field, SpatialGrid, Trajectory};
pub use harness::{Location, Report, Tolerance, Verdict};
pub use solver::{assemble_scenario, solve, ReactionTerm, Scenario};
