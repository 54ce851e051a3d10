use serde::{Deserialize, Serialize};

use super::{resample_curve, GridSpec, NumericsError};
use crate::model::{CurveKind, SampledCurve};

/// Fixed output grids for the measured curve kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardGrids {
    /// A·cm⁻²
    pub iv: GridSpec,
    /// V
    pub cv: GridSpec,
    /// V
    pub lsv: GridSpec,
}

impl Default for StandardGrids {
    fn default() -> Self {
        Self {
            iv: GridSpec { x_min: 0.0, x_max: 3.1, n_points: 20 },
            cv: GridSpec { x_min: 0.051, x_max: 0.4, n_points: 100 },
            lsv: GridSpec { x_min: 0.1, x_max: 0.5, n_points: 100 },
        }
    }
}

impl StandardGrids {
    pub fn get(&self, kind: CurveKind) -> Option<GridSpec> {
        match kind {
            CurveKind::Iv | CurveKind::DeltaVi => Some(self.iv),
            CurveKind::Cv | CurveKind::DeltaIv => Some(self.cv),
            CurveKind::Lsv => Some(self.lsv),
            CurveKind::DeltaReF | CurveKind::DeltaImF => None,
        }
    }
}

/// Splits `x` into maximal runs of one direction; flat steps join the
/// current run. Returns `(start, end_inclusive, increasing)`.
fn monotone_runs(x: &[f64]) -> Vec<(usize, usize, bool)> {
    let mut runs = Vec::new();
    let mut start = 0;
    let mut dir: Option<bool> = None;
    for i in 1..x.len() {
        let d = x[i] - x[i - 1];
        if d == 0.0 {
            continue;
        }
        let up = d > 0.0;
        match dir {
            None => dir = Some(up),
            Some(cur) if cur != up => {
                runs.push((start, i - 1, cur));
                start = i - 1;
                dir = Some(up);
            }
            _ => {}
        }
    }
    if let Some(cur) = dir {
        runs.push((start, x.len() - 1, cur));
    }
    runs
}

/// The anodic (increasing-voltage) sweep of the last recorded cycle, made
/// single-valued: samples sorted by voltage, first sample kept at repeated
/// voltages. Short increasing blips (less than half the widest anodic span)
/// are ignored.
pub fn anodic_branch(curve: &SampledCurve) -> Result<SampledCurve, NumericsError> {
    if curve.x.len() != curve.y.len() {
        return Err(NumericsError::LengthMismatch { left: curve.x.len(), right: curve.y.len() });
    }
    if curve.x.iter().chain(&curve.y).any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let runs = monotone_runs(&curve.x);
    let span = |&(s, e, _): &(usize, usize, bool)| curve.x[e] - curve.x[s];
    let widest = runs.iter().filter(|r| r.2).map(span).fold(0.0, f64::max);
    let (s, e, _) = runs
        .iter()
        .rev()
        .find(|r| r.2 && span(r) >= 0.5 * widest)
        .copied()
        .ok_or(NumericsError::TooFewPoints { needed: 2, got: 0 })?;
    let mut pts: Vec<(f64, f64)> = (s..=e).map(|i| (curve.x[i], curve.y[i])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|b, a| a.0 == b.0);
    let (x, y) = pts.into_iter().unzip();
    Ok(SampledCurve { kind: curve.kind, x, x_unit: curve.x_unit, y, y_unit: curve.y_unit })
}

/// Resamples a measured curve onto `grid`; CV curves go through
/// [`anodic_branch`] first.
pub fn standardize_curve(curve: &SampledCurve, grid: &GridSpec) -> Result<SampledCurve, NumericsError> {
    if curve.kind == CurveKind::Cv {
        resample_curve(&anodic_branch(curve)?, grid)
    } else {
        resample_curve(curve, grid)
    }
}
