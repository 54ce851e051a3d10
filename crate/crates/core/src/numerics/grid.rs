use serde::{Deserialize, Serialize};

use super::{fit_spline, NumericsError};
use crate::model::SampledCurve;

/// `n_points` evenly spaced values on `[x_min, x_max]`, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self, NumericsError> {
        let g = Self { x_min, x_max, n_points };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<(), NumericsError> {
        if !(self.x_min.is_finite() && self.x_max.is_finite()) {
            return Err(NumericsError::InvalidGrid("non-finite bounds".into()));
        }
        if !(self.x_min < self.x_max) {
            return Err(NumericsError::InvalidGrid(format!(
                "x_min {} must be < x_max {}",
                self.x_min, self.x_max
            )));
        }
        if self.n_points < 2 {
            return Err(NumericsError::InvalidGrid(format!("n_points {} < 2", self.n_points)));
        }
        Ok(())
    }

    /// Spacing implied by range and count.
    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let last = self.n_points - 1;
        let span = self.x_max - self.x_min;
        (0..self.n_points)
            .map(|i| {
                if i == last {
                    self.x_max
                } else {
                    self.x_min + span * (i as f64 / last as f64)
                }
            })
            .collect()
    }
}

/// Fits a natural spline to `curve` and evaluates it on `grid`.
///
/// Decreasing curves are reversed first. Grids reaching more than
/// `1e-9 · span` outside the measured x range are rejected.
pub fn resample_curve(curve: &SampledCurve, grid: &GridSpec) -> Result<SampledCurve, NumericsError> {
    grid.check()?;
    if curve.x.len() != curve.y.len() {
        return Err(NumericsError::LengthMismatch { left: curve.x.len(), right: curve.y.len() });
    }
    if curve.x.len() < 3 {
        return Err(NumericsError::TooFewPoints { needed: 3, got: curve.x.len() });
    }
    let (x, y) = if curve.is_decreasing() {
        (curve.x.iter().rev().copied().collect(), curve.y.iter().rev().copied().collect())
    } else {
        (curve.x.clone(), curve.y.clone())
    };
    let spline = fit_spline(&x, &y)?;
    let (lo, hi) = spline.domain();
    let eps = 1e-9 * (hi - lo);
    if grid.x_min < lo - eps || grid.x_max > hi + eps {
        return Err(NumericsError::GridOutOfDomain {
            grid_min: grid.x_min,
            grid_max: grid.x_max,
            x_min: lo,
            x_max: hi,
        });
    }
    let xs = grid.points();
    let ys = xs.iter().map(|&t| spline.eval(t)).collect();
    Ok(SampledCurve {
        kind: curve.kind,
        x: xs,
        x_unit: curve.x_unit,
        y: ys,
        y_unit: curve.y_unit,
    })
}
