use serde::{Deserialize, Serialize};

use super::NumericsError;

/// MAE, RMSE, MAPE and R² of one prediction set.
///
/// MAPE and R² are `None` when undefined (a zero true value, or constant true
/// values); [`MetricsReport::mape`] and [`MetricsReport::r2`] turn that into
/// an error for callers that require them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mape_percent: Option<f64>,
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl MetricsReport {
    pub fn mape(&self) -> Result<f64, NumericsError> {
        self.mape_percent.ok_or(NumericsError::MapeUndefined)
    }

    pub fn r2(&self) -> Result<f64, NumericsError> {
        self.r2.ok_or(NumericsError::R2Undefined)
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsReport, NumericsError> {
    if y_true.len() != y_pred.len() {
        return Err(NumericsError::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(NumericsError::Empty);
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let n = y_true.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut pct_sum = 0.0;
    let mut mape_defined = true;
    for (y, p) in y_true.iter().zip(y_pred) {
        let e = y - p;
        abs_sum += e.abs();
        sq_sum += e * e;
        if *y == 0.0 {
            mape_defined = false;
        } else {
            pct_sum += (e / y).abs();
        }
    }
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    Ok(MetricsReport {
        n: y_true.len(),
        mae: abs_sum / n,
        rmse: (sq_sum / n).sqrt(),
        mape_percent: mape_defined.then(|| 100.0 * pct_sum / n),
        r2: (ss_tot > 0.0).then(|| 1.0 - sq_sum / ss_tot),
        unit: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.mae, m.rmse, m.mape().unwrap(), m.r2().unwrap()), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn constant_prediction() {
        // Direct evaluation: errors (-1, 0, 1); |e|/y = (1, 0, 1/3).
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((m.mape().unwrap() - 400.0 / 9.0).abs() < 1e-12);
        assert!(m.r2().unwrap().abs() < 1e-15);
        assert_eq!(m.n, 3);
    }

    #[test]
    fn undefined_parts() {
        let m = compute_metrics(&[1.0, 0.0, 3.0], &[1.0, 0.0, 3.0]).unwrap();
        assert_eq!(m.mape(), Err(NumericsError::MapeUndefined));
        let c = compute_metrics(&[2.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(c.r2(), Err(NumericsError::R2Undefined));
        assert_eq!(c.mape_percent, Some(50.0));
    }

    #[test]
    fn length_and_empty() {
        assert!(matches!(compute_metrics(&[1.0], &[1.0, 2.0]), Err(NumericsError::LengthMismatch { .. })));
        assert_eq!(compute_metrics(&[], &[]), Err(NumericsError::Empty));
    }

    #[test]
    fn rmse_squared_is_mean_squared_error() {
        let y = [0.5, -2.0, 3.25, 7.0];
        let p = [1.0, -1.0, 3.0, 4.0];
        let m = compute_metrics(&y, &p).unwrap();
        let mse: f64 = y.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 4.0;
        assert!((m.rmse * m.rmse - mse).abs() < 1e-12);
    }
}
