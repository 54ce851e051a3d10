use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Natural cubic spline (second derivative zero at both ends).
///
/// On `[x[i], x[i+1]]` the value is `a + b·t + c·t² + d·t³` with
/// `t = x - x[i]`, using `coeffs[i] = [a, b, c, d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
}

/// Fits a natural cubic spline through `(x, y)`; `x` must be strictly
/// increasing with at least three knots.
pub fn fit_spline(x: &[f64], y: &[f64]) -> Result<Spline, NumericsError> {
    if x.len() != y.len() {
        return Err(NumericsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(NumericsError::TooFewPoints { needed: 3, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(NumericsError::NonMonotoneX);
    }

    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    // Tridiagonal system for the interior second derivatives (Thomas algorithm).
    let m_int = n - 2;
    let mut diag = vec![0.0; m_int];
    let mut upper = vec![0.0; m_int];
    let mut rhs = vec![0.0; m_int];
    for k in 0..m_int {
        let i = k + 1;
        diag[k] = 2.0 * (h[i - 1] + h[i]);
        upper[k] = h[i];
        rhs[k] = 6.0 * (slope[i] - slope[i - 1]);
    }
    for k in 1..m_int {
        let lower = h[k];
        let w = lower / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    let mut m = vec![0.0; n];
    for k in (0..m_int).rev() {
        let next = if k + 1 < m_int { m[k + 2] } else { 0.0 };
        m[k + 1] = (rhs[k] - upper[k] * next) / diag[k];
    }

    let coeffs = (0..n - 1)
        .map(|i| {
            [
                y[i],
                slope[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0,
                m[i] / 2.0,
                (m[i + 1] - m[i]) / (6.0 * h[i]),
            ]
        })
        .collect();
    Ok(Spline { x: x.to_vec(), y: y.to_vec(), coeffs })
}

impl Spline {
    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Interval index for `t`, clamped to the end intervals outside the
    /// domain. Returns `Err(i)` when `t` is exactly knot `i`.
    fn locate(&self, t: f64) -> Result<usize, usize> {
        match self.x.binary_search_by(|k| k.partial_cmp(&t).expect("finite knots")) {
            Ok(i) => Err(i),
            Err(0) => Ok(0),
            Err(i) => Ok((i - 1).min(self.coeffs.len() - 1)),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.locate(t) {
            Err(knot) => self.y[knot],
            Ok(i) => {
                let [a, b, c, d] = self.coeffs[i];
                let dt = t - self.x[i];
                a + dt * (b + dt * (c + dt * d))
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = match self.locate(t) {
            Ok(i) => i,
            Err(k) => k.min(self.coeffs.len() - 1),
        };
        let [_, b, c, d] = self.coeffs[i];
        let dt = t - self.x[i];
        b + dt * (2.0 * c + 3.0 * d * dt)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let i = match self.locate(t) {
            Ok(i) => i,
            Err(k) => k.min(self.coeffs.len() - 1),
        };
        let [_, _, c, d] = self.coeffs[i];
        2.0 * c + 6.0 * d * (t - self.x[i])
    }

    /// Second derivative approached from the left end of interval `i`'s
    /// right neighbour, i.e. evaluated with interval `i`'s polynomial at
    /// `x[i+1]`.
    pub fn second_derivative_left_of(&self, knot: usize) -> f64 {
        let i = knot - 1;
        let [_, _, c, d] = self.coeffs[i];
        2.0 * c + 6.0 * d * (self.x[knot] - self.x[i])
    }

    pub fn first_derivative_left_of(&self, knot: usize) -> f64 {
        let i = knot - 1;
        let [_, b, c, d] = self.coeffs[i];
        let dt = self.x[knot] - self.x[i];
        b + dt * (2.0 * c + 3.0 * d * dt)
    }

    pub fn value_left_of(&self, knot: usize) -> f64 {
        let i = knot - 1;
        let [a, b, c, d] = self.coeffs[i];
        let dt = self.x[knot] - self.x[i];
        a + dt * (b + dt * (c + dt * d))
    }
}
