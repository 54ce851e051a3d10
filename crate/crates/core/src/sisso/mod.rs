//! Two-point features and SISSO descriptor search restricted to `+`/`−`.
//!
//! A difference curve on an `n`-point grid yields `(n² − n)/2` primitive
//! features `|y_i − y_j|`. They are screened by |Pearson| correlation with the
//! target (SIS), combined pairwise for `n_expansion` rounds, and the best
//! single expression with at most `k` distinct leaves is chosen (SO).

mod expr;
mod features;
mod search;

pub use expr::Expr;
pub use features::{enumerate_two_point_features, pair_count, CandidateFeatureSet, GridIdentity, TwoPointFeature};
pub use search::{expand, primitive_pool, sis_screen, so_select, PoolEntry, Screened};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::SampledCurve;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SissoError {
    #[error("no curves given")]
    NoCurves,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("{rows} design rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("target is constant")]
    ConstantTarget,
    #[error("non-finite target value")]
    NonFinite,
    #[error("expression pool is empty")]
    EmptyPool,
    #[error("no pool expression has at most {k} distinct leaves")]
    EmptyFeasibleSet { k: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("cannot parse formula: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SissoConfig {
    pub operators: Vec<Operator>,
    pub n_expansion: usize,
    /// Maximum number of distinct primitive features in the final formula.
    pub k: usize,
    /// Survivors per screening step.
    pub screen_size: usize,
    /// Recorded for provenance; the search itself is exhaustive and
    /// deterministic.
    pub seed: u64,
}

impl Default for SissoConfig {
    fn default() -> Self {
        Self { operators: vec![Operator::Add, Operator::Sub], n_expansion: 2, k: 6, screen_size: 50, seed: 0 }
    }
}

impl SissoConfig {
    pub fn check(&self) -> Result<(), SissoError> {
        if self.k < 1 {
            return Err(SissoError::InvalidConfig("k must be >= 1".into()));
        }
        if self.screen_size < 1 {
            return Err(SissoError::InvalidConfig("screen_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// A selected descriptor with its linear calibration against the training
/// target. The expression is stored as its string form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFormula {
    #[serde(serialize_with = "expr_to_str", deserialize_with = "expr_from_str")]
    pub expr: Expr,
    pub grid: GridIdentity,
    pub slope: f64,
    pub intercept: f64,
    /// Training R² of the calibration.
    pub r2: f64,
}

fn expr_to_str<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(e)
}

fn expr_from_str<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

/// Raw descriptor value on `curve`; the calibration is not applied.
pub fn evaluate_formula(formula: &FeatureFormula, curve: &SampledCurve) -> Result<f64, SissoError> {
    if !formula.grid.matches(curve) || curve.y.len() != formula.grid.len() {
        return Err(SissoError::GridMismatch(format!(
            "formula built on a {}-point {} grid, curve is a {}-point {} curve",
            formula.grid.len(),
            formula.grid.kind,
            curve.x.len(),
            curve.kind
        )));
    }
    if !expr::fits_grid(&formula.expr, curve.y.len()) {
        return Err(SissoError::GridMismatch("formula index beyond grid".into()));
    }
    Ok(formula.expr.eval(&curve.y))
}

/// Full search: enumerate, screen, expand, select.
pub fn run_sisso(curves: &[SampledCurve], target: &[f64], config: &SissoConfig) -> Result<FeatureFormula, SissoError> {
    config.check()?;
    let candidates = enumerate_two_point_features(curves)?;
    let screened = sis_screen(&candidates, target, config.screen_size)?;
    if screened.is_empty() {
        return Err(SissoError::EmptyPool);
    }
    let pool = primitive_pool(&candidates, &screened);
    let pool = expand(&pool, &config.operators, config.n_expansion, target, config.screen_size)?;
    let formula = so_select(&pool, target, config.k, &candidates)?;
    log::debug!(
        "sisso: {} candidates, pool {}, chose {} (R2 {:.4})",
        candidates.features.len(),
        pool.len(),
        formula.expr,
        formula.r2
    );
    Ok(formula)
}
