use std::collections::HashSet;

use rayon::prelude::*;

use super::{CandidateFeatureSet, Expr, FeatureFormula, Operator, SissoError, TwoPointFeature};
use crate::numerics::{mean, pearson_abs};

/// One expression of the working pool with its values on the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub expr: Expr,
    pub values: Vec<f64>,
    /// |Pearson| with the target at screening time.
    pub score: f64,
}

/// A column kept by [`sis_screen`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Screened {
    pub column: usize,
    pub score: f64,
}

fn check_target(target: &[f64], rows: usize) -> Result<(), SissoError> {
    if target.len() != rows {
        return Err(SissoError::LengthMismatch { rows, targets: target.len() });
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(SissoError::NonFinite);
    }
    if target.len() < 2 || target.iter().all(|v| *v == target[0]) {
        return Err(SissoError::ConstantTarget);
    }
    Ok(())
}

/// |Pearson| or `None` for a constant column.
fn score(values: &[f64], target: &[f64]) -> Option<f64> {
    pearson_abs(values, target).ok()
}

/// Keeps the `screen_size` highest-scoring items; ties keep input order.
fn top<T>(mut scored: Vec<(f64, T)>, screen_size: usize) -> Vec<(f64, T)> {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(screen_size);
    scored
}

/// Ranks candidate columns by |Pearson| with `target`, best first,
/// dropping constant columns.
pub fn sis_screen(
    candidates: &CandidateFeatureSet,
    target: &[f64],
    screen_size: usize,
) -> Result<Vec<Screened>, SissoError> {
    check_target(target, candidates.n_rows)?;
    let scored: Vec<(f64, usize)> = candidates
        .columns
        .par_iter()
        .enumerate()
        .filter_map(|(c, col)| score(col, target).map(|s| (s, c)))
        .collect();
    Ok(top(scored, screen_size).into_iter().map(|(score, column)| Screened { column, score }).collect())
}

/// Pool entries for screened primitive columns.
pub fn primitive_pool(candidates: &CandidateFeatureSet, screened: &[Screened]) -> Vec<PoolEntry> {
    screened
        .iter()
        .map(|s| PoolEntry {
            expr: Expr::Leaf(candidates.features[s.column]),
            values: candidates.columns[s.column].clone(),
            score: s.score,
        })
        .collect()
}

type Key = Vec<(TwoPointFeature, i64)>;

/// Grows the pool by `rounds` rounds of pairwise `+`/`−` composition.
///
/// Each round combines every unordered pair of current members (`a + b`,
/// `a − b`, `b − a` as the operators allow), drops expressions already seen
/// up to leaf-multiset equivalence, and keeps the `screen_size` new ones best
/// correlated with `target`. The result is the input pool followed by each
/// round's survivors.
pub fn expand(
    pool: &[PoolEntry],
    operators: &[Operator],
    rounds: usize,
    target: &[f64],
    screen_size: usize,
) -> Result<Vec<PoolEntry>, SissoError> {
    let mut all = pool.to_vec();
    if rounds == 0 || operators.is_empty() || pool.is_empty() {
        return Ok(all);
    }
    check_target(target, pool[0].values.len())?;
    let plus = operators.contains(&Operator::Add);
    let minus = operators.contains(&Operator::Sub);
    let mut seen: HashSet<Key> = all.iter().map(|e| e.expr.canonical()).collect();

    for _ in 0..rounds {
        let n = all.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let made: Vec<Vec<(Key, PoolEntry)>> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let (ea, eb) = (&all[a], &all[b]);
                let mut out = Vec::with_capacity(3);
                let mut push = |expr: Expr, values: Vec<f64>| {
                    if let Some(score) = score(&values, target) {
                        out.push((expr.canonical(), PoolEntry { expr, values, score }));
                    }
                };
                if plus {
                    let v = ea.values.iter().zip(&eb.values).map(|(x, y)| x + y).collect();
                    push(Expr::add(ea.expr.clone(), eb.expr.clone()), v);
                }
                if minus {
                    let v = ea.values.iter().zip(&eb.values).map(|(x, y)| x - y).collect();
                    push(Expr::sub(ea.expr.clone(), eb.expr.clone()), v);
                    let v = eb.values.iter().zip(&ea.values).map(|(x, y)| x - y).collect();
                    push(Expr::sub(eb.expr.clone(), ea.expr.clone()), v);
                }
                out
            })
            .collect();

        let mut fresh = Vec::new();
        for (key, entry) in made.into_iter().flatten() {
            if !key.is_empty() && seen.insert(key) {
                fresh.push((entry.score, entry));
            }
        }
        let kept = top(fresh, screen_size);
        if kept.is_empty() {
            break;
        }
        all.extend(kept.into_iter().map(|(_, e)| e));
    }
    Ok(all)
}

/// Least-squares line `target ≈ slope·v + intercept` and its R².
fn fit_line(v: &[f64], target: &[f64]) -> Option<(f64, f64, f64)> {
    let (mv, mt) = (mean(v), mean(target));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in v.iter().zip(target) {
        sxx += (x - mv) * (x - mv);
        sxy += (x - mv) * (y - mt);
        syy += (y - mt) * (y - mt);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy / (sxx * syy)).min(1.0);
    Some((slope, mt - slope * mv, r2))
}

/// Picks the pool expression with at most `k` distinct leaves whose 1-D
/// linear fit to `target` has the highest R²; earlier entries win ties.
pub fn so_select(
    pool: &[PoolEntry],
    target: &[f64],
    k: usize,
    candidates: &CandidateFeatureSet,
) -> Result<FeatureFormula, SissoError> {
    if pool.is_empty() {
        return Err(SissoError::EmptyPool);
    }
    check_target(target, pool[0].values.len())?;
    let mut best: Option<(usize, (f64, f64, f64))> = None;
    let mut feasible = false;
    for (idx, e) in pool.iter().enumerate() {
        if e.expr.leaves().len() > k {
            continue;
        }
        feasible = true;
        if let Some(fit) = fit_line(&e.values, target) {
            if best.is_none_or(|(_, b)| fit.2 > b.2) {
                best = Some((idx, fit));
            }
        }
    }
    if !feasible {
        return Err(SissoError::EmptyFeasibleSet { k });
    }
    let (idx, (slope, intercept, r2)) = best.ok_or(SissoError::EmptyFeasibleSet { k })?;
    Ok(FeatureFormula { expr: pool[idx].expr.clone(), grid: candidates.grid.clone(), slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CurveKind, SampledCurve};
    use crate::seed;
    use crate::sisso::enumerate_two_point_features;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    fn random_set(rows: usize, n: usize, seed_: u64) -> CandidateFeatureSet {
        let mut rng = seed::rng(seed_);
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let curves: Vec<SampledCurve> = (0..rows)
            .map(|_| SampledCurve::new(CurveKind::DeltaVi, x.clone(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        enumerate_two_point_features(&curves).unwrap()
    }

    fn planted(set: &CandidateFeatureSet, noise_frac: f64, seed_: u64) -> Vec<f64> {
        let clean: Vec<f64> = (0..set.n_rows).map(|r| set.columns[3][r] + set.columns[7][r] - set.columns[12][r]).collect();
        let sd = crate::numerics::variance(&clean).sqrt();
        let normal = Normal::new(0.0, noise_frac * sd).unwrap();
        let mut rng = seed::rng(seed_);
        clean.iter().map(|v| v + if noise_frac > 0.0 { normal.sample(&mut rng) } else { 0.0 }).collect()
    }

    /// Two-pass |corr| written independently of the crate helper.
    fn oracle_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n - ma * mb;
        let va = a.iter().map(|x| x * x).sum::<f64>() / n - ma * ma;
        let vb = b.iter().map(|x| x * x).sum::<f64>() / n - mb * mb;
        (cov / (va * vb).sqrt()).abs()
    }

    #[test]
    fn exact_column_ranks_first() {
        let set = random_set(28, 10, 1);
        let target = set.columns[11].clone();
        let s = sis_screen(&set, &target, 5).unwrap();
        assert_eq!(s[0].column, 11);
        assert!((s[0].score - 1.0).abs() < 1e-12);
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn large_screen_returns_every_nonconstant_column() {
        let mut set = random_set(12, 6, 2);
        set.columns[4] = vec![0.5; 12];
        let target: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let s = sis_screen(&set, &target, 1000).unwrap();
        assert_eq!(s.len(), 14);
        assert!(s.iter().all(|x| x.column != 4));
        assert!(s.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn constant_target_rejected() {
        let set = random_set(5, 4, 0);
        assert_eq!(sis_screen(&set, &[1.0; 5], 3), Err(SissoError::ConstantTarget));
        assert!(matches!(sis_screen(&set, &[1.0; 4], 3), Err(SissoError::LengthMismatch { .. })));
    }

    #[test]
    fn planted_column_found_by_screen_and_oracle() {
        let set = random_set(28, 20, 3);
        let normal = Normal::new(0.0, 0.01).unwrap();
        let mut rng = seed::rng(4);
        let target: Vec<f64> = set.columns[7].iter().map(|v| v + normal.sample(&mut rng)).collect();
        let mut oracle: Vec<(f64, usize)> = set.columns.iter().enumerate().map(|(c, col)| (oracle_corr(col, &target), c)).collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0));
        assert!(oracle[..3].iter().any(|(_, c)| *c == 7));
        let s = sis_screen(&set, &target, 3).unwrap();
        assert!(s.iter().any(|x| x.column == 7));
        for (got, want) in s.iter().zip(&oracle) {
            assert!((got.score - want.0).abs() < 1e-9);
        }
    }

    fn ab_pool() -> Vec<PoolEntry> {
        vec![
            PoolEntry { expr: Expr::leaf(0, 1), values: vec![1.0, 2.0, 4.0, 3.0], score: 0.0 },
            PoolEntry { expr: Expr::leaf(2, 3), values: vec![0.5, 0.1, 0.7, 2.0], score: 0.0 },
        ]
    }

    #[test]
    fn zero_rounds_leave_pool_unchanged() {
        let pool = ab_pool();
        assert_eq!(expand(&pool, &[Operator::Add, Operator::Sub], 0, &[1.0, 2.0, 3.0, 4.0], 10).unwrap(), pool);
    }

    #[test]
    fn one_round_forms_sum_and_both_differences() {
        let pool = ab_pool();
        let out = expand(&pool, &[Operator::Add, Operator::Sub], 1, &[1.0, 2.0, 3.0, 4.0], 10).unwrap();
        let strs: Vec<String> = out.iter().map(|e| e.expr.to_string()).collect();
        for want in ["|y[0]-y[1]| + |y[2]-y[3]|", "|y[0]-y[1]| - |y[2]-y[3]|", "|y[2]-y[3]| - |y[0]-y[1]|"] {
            assert!(strs.iter().any(|s| s == want), "{want} missing from {strs:?}");
        }
        let diff: Vec<&PoolEntry> = out[2..].iter().filter(|e| matches!(e.expr, Expr::Sub(..))).collect();
        assert_eq!(diff.len(), 2);
        assert_eq!(diff[0].score, diff[1].score);
    }

    /// Brute force over all signed combinations of at most three columns.
    fn symbolic_oracle(set: &CandidateFeatureSet, target: &[f64]) -> Vec<(usize, i64)> {
        let m = set.columns.len();
        let mut best = (f64::NEG_INFINITY, vec![]);
        let eval = |terms: &[(usize, i64)]| -> f64 {
            let v: Vec<f64> = (0..set.n_rows).map(|r| terms.iter().map(|(c, s)| *s as f64 * set.columns[*c][r]).sum()).collect();
            -(v.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        };
        for a in 0..m {
            for b in a + 1..m {
                for c in b + 1..m {
                    for sa in [1i64, -1] {
                        for sb in [1i64, -1] {
                            for sc in [1i64, -1] {
                                let t = vec![(a, sa), (b, sb), (c, sc)];
                                let s = eval(&t);
                                if s > best.0 {
                                    best = (s, t);
                                }
                            }
                        }
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn planted_formula_present_after_two_rounds() {
        let set = random_set(28, 8, 5);
        let target = planted(&set, 0.0, 0);
        let truth = symbolic_oracle(&set, &target);
        assert_eq!(truth, vec![(3, 1), (7, 1), (12, -1)]);
        let want: Key = truth.iter().map(|(c, s)| (set.features[*c], *s)).collect();
        let screened = sis_screen(&set, &target, 50).unwrap();
        let pool = expand(&primitive_pool(&set, &screened), &[Operator::Add, Operator::Sub], 2, &target, 50).unwrap();
        assert!(pool.iter().any(|e| e.expr.canonical() == want));
        let f = so_select(&pool, &target, 6, &set).unwrap();
        assert_eq!(f.expr.canonical(), want);
        assert!((f.r2 - 1.0).abs() < 1e-9);
        assert!((f.slope - 1.0).abs() < 1e-9 && f.intercept.abs() < 1e-9);
    }

    #[test]
    fn planted_with_noise_reaches_r2() {
        let set = random_set(28, 20, 6);
        let target = planted(&set, 0.01, 7);
        // oracle: the true formula itself clears the bar
        let truth: Vec<f64> = (0..28).map(|r| set.columns[3][r] + set.columns[7][r] - set.columns[12][r]).collect();
        assert!(fit_line(&truth, &target).unwrap().2 >= 0.99);
        let screened = sis_screen(&set, &target, 50).unwrap();
        let pool = expand(&primitive_pool(&set, &screened), &[Operator::Add, Operator::Sub], 2, &target, 50).unwrap();
        let f = so_select(&pool, &target, 6, &set).unwrap();
        assert!(f.r2 >= 0.99, "r2 {}", f.r2);
        assert!(f.expr.leaves().len() <= 6);
        // never worse than any screened primitive
        for p in &pool[..screened.len()] {
            assert!(f.r2 >= fit_line(&p.values, &target).unwrap().2);
        }
    }

    #[test]
    fn single_entry_pool_is_returned() {
        let set = random_set(4, 4, 0);
        let pool = vec![PoolEntry { expr: Expr::leaf(0, 2), values: set.columns[1].clone(), score: 0.0 }];
        let f = so_select(&pool, &[1.0, 3.0, 2.0, 5.0], 1, &set).unwrap();
        assert_eq!(f.expr, Expr::leaf(0, 2));
    }

    #[test]
    fn k_limits_feasible_set() {
        let set = random_set(4, 4, 0);
        let e = Expr::add(Expr::leaf(0, 1), Expr::leaf(1, 2));
        let pool = vec![PoolEntry { expr: e, values: vec![1.0, 2.0, 3.0, 5.0], score: 0.0 }];
        assert_eq!(so_select(&pool, &[1.0, 3.0, 2.0, 5.0], 1, &set), Err(SissoError::EmptyFeasibleSet { k: 1 }));
        assert_eq!(so_select(&[], &[1.0, 2.0], 1, &set), Err(SissoError::EmptyPool));
    }
}
