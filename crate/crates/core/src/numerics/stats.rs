use super::NumericsError;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Pearson correlation coefficient of two equal-length, nonconstant series.
pub fn pearson_signed(x: &[f64], y: &[f64]) -> Result<f64, NumericsError> {
    if x.len() != y.len() {
        return Err(NumericsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(NumericsError::TooFewPoints { needed: 2, got: x.len() });
    }
    if is_constant(x) || is_constant(y) {
        return Err(NumericsError::ConstantInput);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(NumericsError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// |Pearson correlation|, in `[0, 1]`.
pub fn pearson_abs(x: &[f64], y: &[f64]) -> Result<f64, NumericsError> {
    pearson_signed(x, y).map(f64::abs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear() {
        assert!((pearson_abs(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_abs(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_formula_oracle() {
        // cov = sum(xy)/n - mean(x) mean(y) over population moments.
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        let n = 4.0;
        let exy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n;
        let ex: f64 = x.iter().sum::<f64>() / n;
        let ey: f64 = y.iter().sum::<f64>() / n;
        let vx: f64 = x.iter().map(|a| a * a).sum::<f64>() / n - ex * ex;
        let vy: f64 = y.iter().map(|a| a * a).sum::<f64>() / n - ey * ey;
        let oracle = ((exy - ex * ey) / (vx * vy).sqrt()).abs();
        assert!((pearson_abs(&x, &y).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.8).abs() < 1e-12);
    }

    #[test]
    fn constant_rejected() {
        assert_eq!(pearson_abs(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(NumericsError::ConstantInput));
        assert_eq!(pearson_abs(&[1.0, 2.0], &[3.0, 3.0]), Err(NumericsError::ConstantInput));
        assert!(matches!(pearson_abs(&[1.0], &[1.0]), Err(NumericsError::TooFewPoints { .. })));
        assert!(matches!(pearson_abs(&[1.0, 2.0], &[1.0]), Err(NumericsError::LengthMismatch { .. })));
    }
}
