use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SissoError;
use crate::model::{CurveKind, SampledCurve};

/// `|y_i − y_j|` for grid indices `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TwoPointFeature {
    pub i: usize,
    pub j: usize,
}

impl TwoPointFeature {
    pub fn new(i: usize, j: usize) -> Self {
        assert!(i < j, "two-point feature needs i < j, got ({i}, {j})");
        Self { i, j }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        (y[self.i] - y[self.j]).abs()
    }

    /// Column index within the lexicographic enumeration over `n` points.
    pub fn column(&self, n: usize) -> usize {
        self.i * n - self.i * (self.i + 1) / 2 + (self.j - self.i - 1)
    }
}

/// Curve kind plus the exact x values a formula was built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridIdentity {
    pub kind: CurveKind,
    pub x: Vec<f64>,
}

impl GridIdentity {
    pub fn of(curve: &SampledCurve) -> Self {
        Self { kind: curve.kind, x: curve.x.clone() }
    }

    pub fn matches(&self, curve: &SampledCurve) -> bool {
        self.kind == curve.kind && self.x == curve.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// All `(n² − n)/2` two-point features of a set of curves on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFeatureSet {
    pub grid: GridIdentity,
    pub features: Vec<TwoPointFeature>,
    /// `columns[c][row]`
    pub columns: Vec<Vec<f64>>,
    pub n_rows: usize,
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

pub fn enumerate_two_point_features(curves: &[SampledCurve]) -> Result<CandidateFeatureSet, SissoError> {
    let first = curves.first().ok_or(SissoError::NoCurves)?;
    let grid = GridIdentity::of(first);
    if let Some(bad) = curves.iter().position(|c| !grid.matches(c) || c.y.len() != grid.len()) {
        return Err(SissoError::GridMismatch(format!("curve {bad} does not share the first curve's grid")));
    }
    let n = grid.len();
    let features: Vec<TwoPointFeature> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| TwoPointFeature { i, j })).collect();
    let columns = features.par_iter().map(|f| curves.iter().map(|c| f.value(&c.y)).collect()).collect();
    Ok(CandidateFeatureSet { grid, features, columns, n_rows: curves.len() })
}
