use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::NumericsError;
use crate::seed;

/// Result of [`kmeans`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances for the final assignment.
    pub sse: f64,
    /// SSE after every assignment step, first entry from the seeded centers.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; on exact ties the lowest index wins.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut seed::Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a center
            Err(_) => (0..n).find(|i| !chosen.contains(i)).expect("n >= k"),
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// k-means with k-means++ seeding followed by Lloyd iterations.
///
/// Stops when no centroid moves by more than `tol` (Euclidean) or after
/// `max_iter` updates. Deterministic for a given point order and seed.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Clustering, NumericsError> {
    if k == 0 {
        return Err(NumericsError::InvalidArgument("k must be >= 1".into()));
    }
    if max_iter == 0 {
        return Err(NumericsError::InvalidArgument("max_iter must be >= 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(NumericsError::InvalidArgument("tol must be >= 0".into()));
    }
    if points.len() < k {
        return Err(NumericsError::TooFewPoints { needed: k, got: points.len() });
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(NumericsError::LengthMismatch { left: dim, right: bad.len() });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }

    let mut rng = seed::rng(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let assign = |centroids: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let mut sse = 0.0;
        let a = points
            .iter()
            .map(|p| {
                let (i, d) = nearest(p, centroids);
                sse += d;
                i
            })
            .collect();
        (a, sse)
    };

    let (mut assignments, mut sse) = assign(&centroids);
    let mut history = vec![sse];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            // an empty cluster keeps its previous center
            if counts[c] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        let (a, s) = assign(&centroids);
        debug_assert!(
            s <= sse + 1e-9 * sse.abs().max(1e-300),
            "SSE increased from {sse} to {s}"
        );
        assignments = a;
        sse = s;
        history.push(sse);
        if shift <= tol {
            break;
        }
    }
    Ok(Clustering { assignments, centroids, sse, sse_history: history, iterations })
}
