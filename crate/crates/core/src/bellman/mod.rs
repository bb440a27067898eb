//! Grid value functions, the risk-sensitive Bellman operator, value iteration
//! and finite-horizon policy evaluation.

mod finite;
mod grid;
mod operator;
mod solve;
mod value;

pub use finite::{
    evaluate_policy_finite, policy_value_sequence, policy_value_sequence_with, sandwich_check,
    SandwichReport, SandwichRow, SANDWICH_SLACK,
};
pub use grid::{Grid, GridConfig, Spacing, MIN_GRID_POINTS};
pub use operator::{apply_operator, apply_operator_with, INNER_TOL_RATIO};
pub use solve::{solve, solve_risk_neutral, solve_with, SolveOptions, SolveResult};
pub use value::{w_norm_distance, Envelope, Policy, ShapeReport, StationaryRule, ValueFunction};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BellmanError {
    #[error("value functions live on different grids")]
    GridMismatch,
    #[error("interpolation query below zero: {0}")]
    QueryBelowZero(f64),
    #[error("objective is not finite at x={x}")]
    NotFinite { x: f64 },
    #[error("infeasible investment {invest} at income {x}")]
    InfeasiblePolicy { x: f64, invest: f64 },
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl BellmanError {
    pub fn code(&self) -> &'static str {
        match self {
            BellmanError::GridMismatch => "grid_mismatch",
            BellmanError::QueryBelowZero(_) => "query_below_zero",
            BellmanError::NotFinite { .. } => "objective_not_finite",
            BellmanError::InfeasiblePolicy { .. } => "infeasible_policy",
            BellmanError::InvalidHorizon => "invalid_horizon",
            BellmanError::InvalidTolerance(_) => "invalid_tolerance",
            BellmanError::MaxIterations { .. } => "max_iterations",
            BellmanError::Model(e) => e.code(),
        }
    }
}
