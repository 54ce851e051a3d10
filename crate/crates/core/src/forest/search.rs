use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::fit_forest;
use super::{fit_multi_target, Forest, ForestError, ForestParams, Matrix, MaxFeatures, TreeParams};
use crate::numerics::variance;
use crate::seed::{child_rng, derive_seed};

/// Candidate values per hyperparameter axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
}

impl HyperGrid {
    /// 6 × 6 × 5 × 6 = 1080 combinations.
    pub fn standard() -> Self {
        Self {
            n_estimators: vec![50, 100, 150, 200, 250, 300],
            max_depth: vec![5, 10, 15, 20, 25, 30],
            min_samples_leaf: vec![1, 2, 3, 4, 5],
            max_features: vec![
                MaxFeatures::All,
                MaxFeatures::Sqrt,
                MaxFeatures::Fraction(0.33),
                MaxFeatures::Fraction(0.5),
                MaxFeatures::Fraction(0.75),
                MaxFeatures::Fraction(1.0),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.n_estimators.len() * self.max_depth.len() * self.min_samples_leaf.len() * self.max_features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self) -> Result<(), ForestError> {
        if self.is_empty() {
            return Err(ForestError::InvalidParams("every grid axis needs at least one value".into()));
        }
        Ok(())
    }

    /// All combinations in axis order (n_estimators outermost), each with the
    /// listed position of its `max_features` value.
    fn combinations(&self, seed: u64) -> Vec<(ForestParams, usize)> {
        let mut out = Vec::with_capacity(self.len());
        for &n_estimators in &self.n_estimators {
            for &max_depth in &self.max_depth {
                for &min_samples_leaf in &self.min_samples_leaf {
                    for (mf_idx, &max_features) in self.max_features.iter().enumerate() {
                        let tree = TreeParams { max_depth, min_samples_leaf, max_features, bootstrap_fraction: 1.0 };
                        out.push((ForestParams { n_estimators, tree, seed }, mf_idx));
                    }
                }
            }
        }
        out
    }
}

/// One evaluated grid combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub params: ForestParams,
    pub max_features_rank: usize,
    pub mean_rmse: f64,
    pub fold_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: ForestParams,
    pub folds: usize,
    /// One row per combination, in grid order.
    pub table: Vec<CvRow>,
}

/// Lower score first, then fewer trees, shallower depth, larger leaves and
/// earlier `max_features` entry.
fn rank(a: &CvRow, b: &CvRow) -> Ordering {
    a.mean_rmse
        .total_cmp(&b.mean_rmse)
        .then(a.params.n_estimators.cmp(&b.params.n_estimators))
        .then(a.params.tree.max_depth.cmp(&b.params.tree.max_depth))
        .then(b.params.tree.min_samples_leaf.cmp(&a.params.tree.min_samples_leaf))
        .then(a.max_features_rank.cmp(&b.max_features_rank))
}

fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut child_rng(seed, 0));
    let mut fold_of = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold_of[row] = pos % folds;
    }
    fold_of
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

fn check_folds(n: usize, folds: usize) -> Result<(), ForestError> {
    if folds < 2 || n < folds {
        return Err(ForestError::TooFewSamples { n, folds });
    }
    Ok(())
}

/// Exhaustive k-fold search over `grid`. Every combination is scored by
/// its mean validation RMSE; all combinations share one forest seed and one
/// fold assignment, both derived from `seed`.
pub fn grid_search_cv(
    x: &Matrix,
    y: &[f64],
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult, ForestError> {
    let cols = Matrix::from_columns(&[y]).expect("single column");
    search(x, &cols, &[0], false, grid, folds, seed)
}

/// Grid search for a multi-target model. The score of a combination is the
/// mean over `probe_targets` of the validation RMSE divided by that
/// target's standard deviation.
pub fn grid_search_cv_multi(
    x: &Matrix,
    y: &Matrix,
    probe_targets: &[usize],
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult, ForestError> {
    if probe_targets.is_empty() || probe_targets.iter().any(|&t| t >= y.cols()) {
        return Err(ForestError::InvalidParams("probe targets out of range".into()));
    }
    search(x, y, probe_targets, true, grid, folds, seed)
}

fn search(
    x: &Matrix,
    y: &Matrix,
    targets: &[usize],
    normalize: bool,
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult, ForestError> {
    grid.check()?;
    let n = x.rows();
    check_folds(n, folds)?;
    super::check_training(x, &y.column(targets[0]))?;

    let fold_of = fold_assignment(n, folds, seed);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let train = (0..n).filter(|&i| fold_of[i] != f).collect();
            let val = (0..n).filter(|&i| fold_of[i] == f).collect();
            (train, val)
        })
        .collect();
    let columns: Vec<Vec<f64>> = targets.iter().map(|&t| y.column(t)).collect();
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| {
            let sd = variance(c).sqrt();
            if normalize && sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let forest_seed = derive_seed(seed, 1);
    let table: Vec<CvRow> = grid
        .combinations(forest_seed)
        .into_par_iter()
        .map(|(params, mf_rank)| -> Result<CvRow, ForestError> {
            let mut fold_rmse = Vec::with_capacity(folds);
            for (train, val) in &splits {
                let xt = x.select_rows(train);
                let xv = x.select_rows(val);
                let mut score = 0.0;
                for (k, col) in columns.iter().enumerate() {
                    let yt: Vec<f64> = train.iter().map(|&i| col[i]).collect();
                    let yv: Vec<f64> = val.iter().map(|&i| col[i]).collect();
                    let p = params.with_seed(derive_seed(forest_seed, k as u64));
                    let pred = fit_forest(&xt, &yt, &p)?.predict(&xv)?;
                    score += rmse(&yv, &pred) / scales[k];
                }
                fold_rmse.push(score / columns.len() as f64);
            }
            let mean_rmse = fold_rmse.iter().sum::<f64>() / folds as f64;
            Ok(CvRow { params, max_features_rank: mf_rank, mean_rmse, fold_rmse })
        })
        .collect::<Result<_, _>>()?;

    let best = table.iter().min_by(|a, b| rank(a, b)).expect("non-empty grid").params;
    Ok(GridSearchResult { best, folds, table })
}

/// How a pipeline picks forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Tuning {
    Fixed { params: ForestParams },
    Grid {
        grid: HyperGrid,
        folds: usize,
        /// Multi-target models score at most this many evenly spaced targets.
        max_probe_targets: usize,
    },
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning::Grid { grid: HyperGrid::standard(), folds: 5, max_probe_targets: 4 }
    }
}

/// What tuning decided for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub params: ForestParams,
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cv_table: Vec<CvRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn effective_folds(n: usize, folds: usize) -> Option<usize> {
    let f = folds.min(n);
    (f >= 2).then_some(f)
}

fn probe_targets(t: usize, max: usize) -> Vec<usize> {
    let m = max.max(1).min(t);
    if m == t {
        return (0..t).collect();
    }
    if m == 1 {
        return vec![0];
    }
    (0..m).map(|k| (k * (t - 1) + (m - 1) / 2) / (m - 1)).collect()
}

fn resolve_params(
    tuning: &Tuning,
    n: usize,
    seed: u64,
    run: impl FnOnce(&HyperGrid, usize) -> Result<GridSearchResult, ForestError>,
) -> Result<TuningRecord, ForestError> {
    match tuning {
        Tuning::Fixed { params } => {
            Ok(TuningRecord { params: params.with_seed(seed), folds: None, cv_table: Vec::new(), note: None })
        }
        Tuning::Grid { grid, folds, .. } => match effective_folds(n, *folds) {
            Some(f) => {
                let res = run(grid, f)?;
                let note = (f != *folds).then(|| format!("folds reduced from {folds} to {f} ({n} rows)"));
                Ok(TuningRecord { params: res.best.with_seed(seed), folds: Some(f), cv_table: res.table, note })
            }
            None => {
                log::warn!("{n} rows: too few for cross-validation, using default forest parameters");
                Ok(TuningRecord {
                    params: ForestParams::default().with_seed(seed),
                    folds: None,
                    cv_table: Vec::new(),
                    note: Some(format!("{n} rows: too few for cross-validation, defaults used")),
                })
            }
        },
    }
}

/// Picks parameters per `tuning` and fits the final forest on all rows.
pub fn tune_and_fit(x: &Matrix, y: &[f64], tuning: &Tuning, seed: u64) -> Result<(Forest, TuningRecord), ForestError> {
    let record = resolve_params(tuning, x.rows(), seed, |grid, folds| {
        grid_search_cv(x, y, grid, folds, derive_seed(seed, 0x5EA2C4))
    })?;
    let forest = fit_forest(x, y, &record.params)?;
    Ok((forest, record))
}

pub fn tune_and_fit_multi(
    x: &Matrix,
    y: &Matrix,
    tuning: &Tuning,
    seed: u64,
) -> Result<(Vec<Forest>, TuningRecord), ForestError> {
    let record = resolve_params(tuning, x.rows(), seed, |grid, folds| {
        let max = match tuning {
            Tuning::Grid { max_probe_targets, .. } => *max_probe_targets,
            Tuning::Fixed { .. } => unreachable!(),
        };
        let probes = probe_targets(y.cols(), max);
        grid_search_cv_multi(x, y, &probes, grid, folds, derive_seed(seed, 0x5EA2C4))
    })?;
    let forests = fit_multi_target(x, y, &record.params)?;
    Ok((forests, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grid() -> HyperGrid {
        HyperGrid {
            n_estimators: vec![5],
            max_depth: vec![1, 2, 10],
            min_samples_leaf: vec![1],
            max_features: vec![MaxFeatures::All],
        }
    }

    #[test]
    fn standard_grid_has_1080_rows() {
        assert_eq!(HyperGrid::standard().len(), 1080);
        assert_eq!(HyperGrid::standard().combinations(0).len(), 1080);
    }

    #[test]
    fn singleton_grid_returns_its_combination() {
        let x = Matrix::from_columns(&[(0..10).map(f64::from).collect::<Vec<_>>()]).unwrap();
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let grid = HyperGrid {
            n_estimators: vec![7],
            max_depth: vec![3],
            min_samples_leaf: vec![2],
            max_features: vec![MaxFeatures::Sqrt],
        };
        let res = grid_search_cv(&x, &y, &grid, 5, 1).unwrap();
        assert_eq!(res.table.len(), 1);
        assert_eq!(res.best.n_estimators, 7);
        assert_eq!(res.best.tree.max_depth, 3);
        assert_eq!(res.best.tree.min_samples_leaf, 2);
        assert_eq!(res.best.tree.max_features, MaxFeatures::Sqrt);
    }

    #[test]
    fn too_few_samples() {
        let x = Matrix::from_columns(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(
            grid_search_cv(&x, &[1.0, 2.0], &tiny_grid(), 3, 0),
            Err(ForestError::TooFewSamples { n: 2, folds: 3 })
        );
        assert!(grid_search_cv(&x, &[1.0, 2.0], &tiny_grid(), 1, 0).is_err());
    }

    /// Step function on two levels: y depends on both x0 > 0.5 and x1 > 0.5.
    fn depth_two_step() -> (Matrix, Vec<f64>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (i as f64 / 7.0, j as f64 / 7.0);
                rows.push(vec![a, b]);
                y.push(if a > 0.5 { 10.0 } else { 0.0 } + if b > 0.5 { 3.0 } else { 0.0 });
            }
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    /// Direct CV evaluation of one parameter set, written out by hand.
    fn direct_cv(x: &Matrix, y: &[f64], params: &ForestParams, folds: usize, seed: u64) -> f64 {
        let fold_of = fold_assignment(x.rows(), folds, seed);
        let mut total = 0.0;
        for f in 0..folds {
            let tr: Vec<usize> = (0..x.rows()).filter(|i| fold_of[*i] != f).collect();
            let va: Vec<usize> = (0..x.rows()).filter(|i| fold_of[*i] == f).collect();
            let ytr: Vec<f64> = tr.iter().map(|i| y[*i]).collect();
            // single-target search trains target 0 with the stream-0 child seed
            let p = params.with_seed(derive_seed(params.seed, 0));
            let forest = fit_forest(&x.select_rows(&tr), &ytr, &p).unwrap();
            let mut se = 0.0;
            for i in &va {
                se += (forest.predict_row(x.row(*i)) - y[*i]).powi(2);
            }
            total += (se / va.len() as f64).sqrt();
        }
        total / folds as f64
    }

    #[test]
    fn depth_one_never_wins_on_depth_two_step() {
        let (x, y) = depth_two_step();
        let res = grid_search_cv(&x, &y, &tiny_grid(), 5, 3).unwrap();
        assert_ne!(res.best.tree.max_depth, 1);
        let depth1 = res.table.iter().find(|r| r.params.tree.max_depth == 1).unwrap();
        for r in res.table.iter().filter(|r| r.params.tree.max_depth != 1) {
            assert!(depth1.mean_rmse > r.mean_rmse);
            let oracle = direct_cv(&x, &y, &r.params, 5, 3);
            assert!((oracle - r.mean_rmse).abs() < 1e-12);
        }
        assert!(depth1.mean_rmse > direct_cv(&x, &y, &res.best, 5, 3));
    }

    #[test]
    fn ties_prefer_simpler_models() {
        // Constant target: every combination scores 0.
        let x = Matrix::from_columns(&[(0..12).map(f64::from).collect::<Vec<_>>()]).unwrap();
        let grid = HyperGrid {
            n_estimators: vec![20, 10],
            max_depth: vec![4, 2],
            min_samples_leaf: vec![1, 3],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::All],
        };
        let res = grid_search_cv(&x, &[2.0; 12], &grid, 3, 0).unwrap();
        assert_eq!(res.best.n_estimators, 10);
        assert_eq!(res.best.tree.max_depth, 2);
        assert_eq!(res.best.tree.min_samples_leaf, 3);
        assert_eq!(res.best.tree.max_features, MaxFeatures::Sqrt);
    }

    #[test]
    fn row_count_is_product_of_axes() {
        let (x, y) = depth_two_step();
        let grid = HyperGrid {
            n_estimators: vec![2, 3],
            max_depth: vec![1, 2, 3],
            min_samples_leaf: vec![1, 2],
            max_features: vec![MaxFeatures::All, MaxFeatures::Fraction(0.5)],
        };
        assert_eq!(grid_search_cv(&x, &y, &grid, 4, 0).unwrap().table.len(), 24);
    }

    #[test]
    fn probe_target_selection() {
        assert_eq!(probe_targets(82, 4), vec![0, 27, 54, 81]);
        assert_eq!(probe_targets(3, 4), vec![0, 1, 2]);
        assert_eq!(probe_targets(10, 1), vec![0]);
    }

    #[test]
    fn tuning_falls_back_on_tiny_inputs() {
        let x = Matrix::from_columns(&[vec![1.0]]).unwrap();
        let (_, rec) = tune_and_fit(&x, &[3.0], &Tuning::default(), 5).unwrap();
        assert!(rec.note.is_some());
        assert_eq!(rec.params.seed, 5);
        let x3 = Matrix::from_columns(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let tuning = Tuning::Grid { grid: tiny_grid(), folds: 5, max_probe_targets: 2 };
        let (_, rec) = tune_and_fit(&x3, &[1.0, 2.0, 3.0], &tuning, 5).unwrap();
        assert_eq!(rec.folds, Some(3));
        assert_eq!(rec.cv_table.len(), 3);
    }

    #[test]
    fn multi_target_search() {
        let (x, y) = depth_two_step();
        let y2: Vec<f64> = y.iter().map(|v| v * 100.0).collect();
        let ym = Matrix::from_columns(&[y, y2]).unwrap();
        let res = grid_search_cv_multi(&x, &ym, &[0, 1], &tiny_grid(), 4, 1).unwrap();
        assert_ne!(res.best.tree.max_depth, 1);
        let tuning = Tuning::Grid { grid: tiny_grid(), folds: 4, max_probe_targets: 1 };
        let (forests, rec) = tune_and_fit_multi(&x, &ym, &tuning, 9).unwrap();
        assert_eq!(forests.len(), 2);
        assert_eq!(rec.cv_table.len(), 3);
    }
}
