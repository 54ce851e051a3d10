use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::fit_tree_on_rows;
use super::{check_training, ForestError, ForestParams, Matrix, RegressionTree};
use crate::seed::{child_rng, derive_seed};

/// Bagged ensemble of regression trees.
///
/// Predictions are the mean of the tree outputs in tree order, clamped to
/// the training-target range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub y_min: f64,
    pub y_max: f64,
    pub params: ForestParams,
    pub n_features: usize,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        (sum / self.trees.len() as f64).clamp(self.y_min, self.y_max)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, ForestError> {
        predict(self, x)
    }
}

pub(crate) fn bootstrap_rows(params: &ForestParams, tree_idx: usize, n: usize) -> Vec<usize> {
    let m = (params.tree.bootstrap_fraction * n as f64).ceil() as usize;
    let tree_seed = derive_seed(params.seed, tree_idx as u64);
    let mut rng = child_rng(tree_seed, 0);
    (0..m.max(1)).map(|_| rng.random_range(0..n)).collect()
}

/// Fits `n_estimators` trees on bootstrap resamples. Tree `t` uses
/// `derive_seed(params.seed, t)` for both its resample and its split
/// feature draws, so the result does not depend on the thread count.
pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<Forest, ForestError> {
    fit_forest_with_sampler(x, y, params, |t, n| bootstrap_rows(params, t, n))
}

pub(crate) fn fit_forest_with_sampler<S>(
    x: &Matrix,
    y: &[f64],
    params: &ForestParams,
    sampler: S,
) -> Result<Forest, ForestError>
where
    S: Fn(usize, usize) -> Vec<usize> + Sync,
{
    check_training(x, y)?;
    params.check()?;
    let n = x.rows();
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rows = sampler(t, n);
            let tree_seed = derive_seed(params.seed, t as u64);
            fit_tree_on_rows(x, y, &mut rows, &params.tree, tree_seed)
        })
        .collect();
    let (y_min, y_max) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok(Forest { trees, y_min, y_max, params: *params, n_features: x.cols() })
}

pub fn predict(forest: &Forest, x: &Matrix) -> Result<Vec<f64>, ForestError> {
    if x.cols() != forest.n_features {
        return Err(ForestError::DimensionMismatch { expected: forest.n_features, got: x.cols() });
    }
    Ok((0..x.rows()).map(|i| forest.predict_row(x.row(i))).collect())
}

/// Independent forest per target column; target `t` trains with
/// `derive_seed(params.seed, t)`.
pub fn fit_multi_target(x: &Matrix, y: &Matrix, params: &ForestParams) -> Result<Vec<Forest>, ForestError> {
    fit_multi_target_with_seeds(x, y, params, |t| derive_seed(params.seed, t as u64))
}

pub(crate) fn fit_multi_target_with_seeds<F>(
    x: &Matrix,
    y: &Matrix,
    params: &ForestParams,
    seed_of: F,
) -> Result<Vec<Forest>, ForestError>
where
    F: Fn(usize) -> u64 + Sync,
{
    if y.rows() != x.rows() {
        return Err(ForestError::LengthMismatch { rows: x.rows(), targets: y.rows() });
    }
    if y.cols() == 0 {
        return Err(ForestError::EmptyInput);
    }
    (0..y.cols())
        .into_par_iter()
        .map(|t| fit_forest(x, &y.column(t), &params.with_seed(seed_of(t))))
        .collect()
}

/// Per-target forests sharing one input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTargetModel {
    pub n_inputs: usize,
    pub forests: Vec<Forest>,
}

impl MultiTargetModel {
    pub fn new(forests: Vec<Forest>) -> Result<Self, ForestError> {
        let n_inputs = forests.first().ok_or(ForestError::EmptyInput)?.n_features;
        if let Some(f) = forests.iter().find(|f| f.n_features != n_inputs) {
            return Err(ForestError::DimensionMismatch { expected: n_inputs, got: f.n_features });
        }
        Ok(Self { n_inputs, forests })
    }

    pub fn n_outputs(&self) -> usize {
        self.forests.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<Vec<f64>, ForestError> {
        if row.len() != self.n_inputs {
            return Err(ForestError::DimensionMismatch { expected: self.n_inputs, got: row.len() });
        }
        Ok(self.forests.iter().map(|f| f.predict_row(row)).collect())
    }
}
