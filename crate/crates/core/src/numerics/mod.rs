//! Shared numerical kernels.

mod grid;
mod kmeans;
mod metrics;
mod spline;
mod standardize;
mod stats;

pub use grid::{resample_curve, GridSpec};
pub use kmeans::{kmeans, Clustering};
pub use metrics::{compute_metrics, MetricsReport};
pub use spline::{fit_spline, Spline};
pub use standardize::{anodic_branch, standardize_curve, StandardGrids};
pub use stats::{mean, pearson_abs, pearson_signed, variance};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("x values must be strictly increasing")]
    NonMonotoneX,
    #[error("non-finite input value")]
    NonFinite,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid [{grid_min}, {grid_max}] outside curve domain [{x_min}, {x_max}]")]
    GridOutOfDomain { grid_min: f64, grid_max: f64, x_min: f64, x_max: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("MAPE undefined: some true values are zero")]
    MapeUndefined,
    #[error("R2 undefined: true values are constant")]
    R2Undefined,
    #[error("input is constant")]
    ConstantInput,
}
