//! Random-forest regression built from CART trees, with exhaustive
//! grid-search cross-validation and an on-disk model archive.

mod archive;
mod ensemble;
mod matrix;
mod search;
mod tree;

pub use archive::{ArchiveError, ModelArchive, ARCHIVE_FORMAT, ARCHIVE_VERSION};
pub use ensemble::{fit_forest, fit_multi_target, predict, Forest, MultiTargetModel};
pub use matrix::Matrix;
pub use search::{
    grid_search_cv, grid_search_cv_multi, tune_and_fit, tune_and_fit_multi, CvRow, GridSearchResult,
    HyperGrid, Tuning, TuningRecord,
};
pub use tree::{fit_tree, Node, RegressionTree};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("empty training input")]
    EmptyInput,
    #[error("non-finite value in training input")]
    NonFiniteInput,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{rows} rows of features but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{n} samples cannot be split into {folds} folds")]
    TooFewSamples { n: usize, folds: usize },
}

/// Number of candidate features drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// Every feature (the regression meaning of `'auto'`).
    All,
    /// `⌈√d⌉`
    Sqrt,
    /// `max(1, ⌊f·d⌋)`, `f ∈ (0, 1]`
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::Fraction(f) => (f * d as f64).floor() as usize,
        };
        m.clamp(1, d.max(1))
    }

    pub fn label(self) -> String {
        match self {
            MaxFeatures::All => "auto".into(),
            MaxFeatures::Sqrt => "sqrt".into(),
            MaxFeatures::Fraction(f) => format!("{f}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Maximum number of split levels; 1 allows a single split.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    /// Bootstrap sample size as a fraction of the training rows.
    pub bootstrap_fraction: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 10, min_samples_leaf: 1, max_features: MaxFeatures::All, bootstrap_fraction: 1.0 }
    }
}

impl TreeParams {
    pub fn check(&self) -> Result<(), ForestError> {
        if self.max_depth < 1 {
            return Err(ForestError::InvalidParams("max_depth must be >= 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(ForestError::InvalidParams("min_samples_leaf must be >= 1".into()));
        }
        if let MaxFeatures::Fraction(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ForestError::InvalidParams(format!("max_features fraction {f} not in (0, 1]")));
            }
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(ForestError::InvalidParams(format!(
                "bootstrap_fraction {} not in (0, 1]",
                self.bootstrap_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_estimators: 200, tree: TreeParams::default(), seed: 0 }
    }
}

impl ForestParams {
    pub fn check(&self) -> Result<(), ForestError> {
        if self.n_estimators < 1 {
            return Err(ForestError::InvalidParams("n_estimators must be >= 1".into()));
        }
        self.tree.check()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

pub(crate) fn check_training(x: &Matrix, y: &[f64]) -> Result<(), ForestError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(ForestError::EmptyInput);
    }
    if x.rows() != y.len() {
        return Err(ForestError::LengthMismatch { rows: x.rows(), targets: y.len() });
    }
    if x.data().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ForestError::NonFiniteInput);
    }
    Ok(())
}
