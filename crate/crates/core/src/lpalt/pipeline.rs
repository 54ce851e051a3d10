use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::difference::difference_curve;
use super::LpAltError;
use crate::forest::{tune_and_fit, Forest, Matrix, Tuning, TuningRecord};
use crate::model::{resolve_stage, CheckUp, CurveKind, Indicator, LifeTest, SampledCurve, StageSpec};
use crate::numerics::{compute_metrics, MetricsReport, StandardGrids};
use crate::seed::derive_seed;
use crate::sisso::{evaluate_formula, run_sisso, FeatureFormula, GridIdentity, SissoConfig};

/// Difference curves each indicator's model reads.
pub fn feature_kinds(ind: Indicator) -> Option<&'static [CurveKind]> {
    match ind {
        Indicator::ILim => Some(&[CurveKind::DeltaVi]),
        Indicator::Ecsa => Some(&[CurveKind::DeltaIv]),
        Indicator::RO2Total | Indicator::CRem => Some(&[CurveKind::DeltaReF, CurveKind::DeltaImF]),
        Indicator::ICross => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpAltConfig {
    pub stages: StageSpec,
    pub indicators: Vec<Indicator>,
    pub sisso: SissoConfig,
    pub tuning: Tuning,
    pub grids: StandardGrids,
    pub seed: u64,
}

impl Default for LpAltConfig {
    fn default() -> Self {
        Self {
            stages: StageSpec::by_time(0.0, 1000.0, 30000.0),
            indicators: vec![Indicator::ILim, Indicator::RO2Total, Indicator::Ecsa, Indicator::CRem],
            sisso: SissoConfig::default(),
            tuning: Tuning::default(),
            grids: StandardGrids::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpIndicatorModel {
    pub indicator: Indicator,
    pub feature_kinds: Vec<CurveKind>,
    /// One formula per feature kind, same order.
    pub formulas: Vec<FeatureFormula>,
    /// Maps formula values to Δ = indicator(T3) − indicator(T1).
    pub forest: Forest,
    pub tuning: TuningRecord,
    pub n_rows: usize,
    /// Smallest and largest training Δ.
    pub delta_range: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpTrainingMeta {
    pub config: LpAltConfig,
    pub train_devices: Vec<String>,
    /// Devices dropped per indicator.
    pub skipped: BTreeMap<String, usize>,
    pub absent: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpAltModelBundle {
    pub stages: StageSpec,
    pub grids: StandardGrids,
    pub models: BTreeMap<Indicator, LpIndicatorModel>,
    pub meta: LpTrainingMeta,
}

/// Prediction for one indicator of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorPrediction {
    pub indicator: Indicator,
    pub t1_value: f64,
    /// Reported as `t3_estimate − t1_value`.
    pub delta: f64,
    pub t3_estimate: f64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpAltPrediction {
    pub device_id: String,
    pub t1_stage: String,
    pub t2_stage: String,
    pub indicators: BTreeMap<Indicator, IndicatorPrediction>,
}

impl LpAltPrediction {
    pub fn t3_indicators(&self) -> crate::model::AgingIndicators {
        let mut out = crate::model::AgingIndicators::default();
        for (i, p) in &self.indicators {
            out.set(*i, Some(p.t3_estimate));
        }
        out
    }
}

/// Aligns an EIS delta curve to the frequencies a formula was built on, when
/// they agree to 1e-6 relative.
fn align<'a>(grid: &GridIdentity, curve: &'a SampledCurve) -> std::borrow::Cow<'a, SampledCurve> {
    if grid.matches(curve) || grid.kind != curve.kind || grid.x.len() != curve.x.len() {
        return std::borrow::Cow::Borrowed(curve);
    }
    let close = grid.x.iter().zip(&curve.x).all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()));
    if !close {
        return std::borrow::Cow::Borrowed(curve);
    }
    let mut c = curve.clone();
    c.x = grid.x.clone();
    std::borrow::Cow::Owned(c)
}

struct DeviceRow<'a> {
    device: &'a LifeTest,
    t1: &'a CheckUp,
    t2: &'a CheckUp,
    t3: &'a CheckUp,
}

fn features_for(
    model: &LpIndicatorModel,
    t1: &CheckUp,
    t2: &CheckUp,
    grids: &StandardGrids,
    device: &str,
) -> Result<Vec<f64>, LpAltError> {
    model
        .feature_kinds
        .iter()
        .zip(&model.formulas)
        .map(|(&kind, f)| {
            let curve = difference_curve(kind, t1, t2, grids)?
                .ok_or_else(|| LpAltError::MissingCurve { device: device.into(), kind })?;
            Ok(evaluate_formula(f, &align(&f.grid, &curve))?)
        })
        .collect()
}

fn train_indicator(
    ind: Indicator,
    rows: &[DeviceRow],
    cfg: &LpAltConfig,
) -> Result<(Option<LpIndicatorModel>, usize), LpAltError> {
    let kinds = feature_kinds(ind).ok_or(LpAltError::UnsupportedIndicator(ind))?;
    let mut curves: Vec<Vec<SampledCurve>> = vec![Vec::new(); kinds.len()];
    let mut target = Vec::new();
    let mut skipped = 0;
    'rows: for r in rows {
        let (Some(a), Some(c)) = (r.t1.indicators.get(ind), r.t3.indicators.get(ind)) else {
            skipped += 1;
            continue;
        };
        let mut got = Vec::with_capacity(kinds.len());
        for &k in kinds {
            match difference_curve(k, r.t1, r.t2, &cfg.grids) {
                Ok(Some(curve)) => got.push(curve),
                Ok(None) => {
                    skipped += 1;
                    continue 'rows;
                }
                Err(e) => {
                    log::warn!("{} {ind}: {e}, skipped", r.device.device_id);
                    skipped += 1;
                    continue 'rows;
                }
            }
        }
        for (slot, curve) in curves.iter_mut().zip(got) {
            slot.push(curve);
        }
        target.push(c - a);
    }
    if skipped > 0 {
        log::info!("{ind}: {skipped} device(s) without the required data");
    }
    if target.is_empty() {
        return Ok((None, skipped));
    }
    let formulas: Vec<FeatureFormula> =
        curves.iter().map(|c| run_sisso(c, &target, &cfg.sisso)).collect::<Result<_, _>>()?;
    let rows_x: Vec<Vec<f64>> = (0..target.len())
        .map(|i| formulas.iter().zip(&curves).map(|(f, c)| f.expr.eval(&c[i].y)).collect())
        .collect();
    let x = Matrix::from_rows(&rows_x)?;
    let (forest, tuning) = tune_and_fit(&x, &target, &cfg.tuning, derive_seed(cfg.seed, 100 + ind as u64))?;
    let lo = target.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for f in &formulas {
        log::info!("{ind} {}: {} (R2 {:.4})", f.grid.kind, f.expr, f.r2);
    }
    let model = LpIndicatorModel {
        indicator: ind,
        feature_kinds: kinds.to_vec(),
        formulas,
        forest,
        tuning,
        n_rows: target.len(),
        delta_range: [lo, hi],
    };
    Ok((Some(model), skipped))
}

pub fn train_lpalt(train: &[LifeTest], cfg: &LpAltConfig) -> Result<LpAltModelBundle, LpAltError> {
    for ind in &cfg.indicators {
        if feature_kinds(*ind).is_none() {
            return Err(LpAltError::UnsupportedIndicator(*ind));
        }
    }
    let mut rows = Vec::new();
    let mut unresolved = 0;
    for d in train {
        match cfg.stages.resolve(d) {
            Ok(s) => rows.push(DeviceRow { device: d, t1: s.t1, t2: s.t2, t3: s.t3 }),
            Err(e) => {
                log::warn!("{e}, skipped");
                unresolved += 1;
            }
        }
    }
    let mut meta = LpTrainingMeta {
        config: cfg.clone(),
        train_devices: rows.iter().map(|r| r.device.device_id.clone()).collect(),
        ..Default::default()
    };
    let trained: Vec<_> =
        cfg.indicators.par_iter().map(|&ind| (ind, train_indicator(ind, &rows, cfg))).collect();
    let mut models = BTreeMap::new();
    for (ind, res) in trained {
        let (model, skipped) = res?;
        meta.skipped.insert(ind.name().into(), skipped + unresolved);
        match model {
            Some(m) => {
                models.insert(ind, m);
            }
            None => {
                log::warn!("{ind}: no training rows, model absent");
                meta.absent.insert(ind.name().into(), "no training rows".into());
            }
        }
    }
    if models.is_empty() {
        return Err(LpAltError::NoTrainingRows(format!("all of {} indicator(s)", cfg.indicators.len())));
    }
    Ok(LpAltModelBundle { stages: cfg.stages.clone(), grids: cfg.grids, models, meta })
}

/// Resolves T1 and T2 only; the device need not have reached T3.
fn early_stages<'a>(bundle: &LpAltModelBundle, device: &'a LifeTest) -> Result<(&'a CheckUp, &'a CheckUp), LpAltError> {
    let t1 = resolve_stage(device, &bundle.stages.t1)?;
    let t2 = resolve_stage(device, &bundle.stages.t2)?;
    Ok((t1, t2))
}

pub fn predict_indicator(
    bundle: &LpAltModelBundle,
    device: &LifeTest,
    ind: Indicator,
) -> Result<IndicatorPrediction, LpAltError> {
    let model = bundle.models.get(&ind).ok_or_else(|| LpAltError::ModelMissing(ind.name().into()))?;
    let (t1, t2) = early_stages(bundle, device)?;
    let t1_value = t1
        .indicators
        .get(ind)
        .ok_or_else(|| LpAltError::MissingT1Indicator { device: device.device_id.clone(), indicator: ind })?;
    let features = features_for(model, t1, t2, &bundle.grids, &device.device_id)?;
    let raw = model.forest.predict_row(&features);
    let t3_estimate = t1_value + raw;
    Ok(IndicatorPrediction { indicator: ind, t1_value, delta: t3_estimate - t1_value, t3_estimate, features })
}

/// T3 estimates for every indicator in the bundle.
pub fn predict_lpalt(bundle: &LpAltModelBundle, device: &LifeTest) -> Result<LpAltPrediction, LpAltError> {
    if bundle.models.is_empty() {
        return Err(LpAltError::ModelMissing("any indicator".into()));
    }
    let (t1, t2) = early_stages(bundle, device)?;
    let mut indicators = BTreeMap::new();
    for &ind in bundle.models.keys() {
        indicators.insert(ind, predict_indicator(bundle, device, ind)?);
    }
    Ok(LpAltPrediction {
        device_id: device.device_id.clone(),
        t1_stage: t1.stage_id.clone(),
        t2_stage: t2.stage_id.clone(),
        indicators,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpEvalRow {
    pub indicator: Indicator,
    pub n_devices: usize,
    /// T3 estimate against measured T3.
    pub t3: MetricsReport,
    /// Δ̂ against measured T3 − T1.
    pub delta: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpEvalPoint {
    pub device_id: String,
    pub indicator: Indicator,
    pub t1: f64,
    pub t3_true: f64,
    pub t3_predicted: f64,
    pub delta_true: f64,
    pub delta_predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpAltEvaluation {
    pub rows: Vec<LpEvalRow>,
    pub points: Vec<LpEvalPoint>,
    /// Devices left out per indicator, with the reason.
    pub skipped: Vec<(String, Indicator, String)>,
}

impl LpAltEvaluation {
    pub fn get(&self, ind: Indicator) -> Option<&LpEvalRow> {
        self.rows.iter().find(|r| r.indicator == ind)
    }
}

pub fn evaluate_lpalt(bundle: &LpAltModelBundle, test: &[LifeTest]) -> Result<LpAltEvaluation, LpAltError> {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for d in test {
        let t3 = match resolve_stage(d, &bundle.stages.t3) {
            Ok(c) => c,
            Err(e) => {
                for &ind in bundle.models.keys() {
                    skipped.push((d.device_id.clone(), ind, e.to_string()));
                }
                continue;
            }
        };
        for &ind in bundle.models.keys() {
            let Some(t3_true) = t3.indicators.get(ind) else {
                skipped.push((d.device_id.clone(), ind, "no T3 ground truth".into()));
                continue;
            };
            match predict_indicator(bundle, d, ind) {
                Ok(p) => points.push(LpEvalPoint {
                    device_id: d.device_id.clone(),
                    indicator: ind,
                    t1: p.t1_value,
                    t3_true,
                    t3_predicted: p.t3_estimate,
                    delta_true: t3_true - p.t1_value,
                    delta_predicted: p.delta,
                }),
                Err(e) => skipped.push((d.device_id.clone(), ind, e.to_string())),
            }
        }
    }
    let mut rows = Vec::new();
    for &ind in bundle.models.keys() {
        let pts: Vec<&LpEvalPoint> = points.iter().filter(|p| p.indicator == ind).collect();
        if pts.is_empty() {
            continue;
        }
        let col = |f: fn(&LpEvalPoint) -> f64| pts.iter().map(|p| f(p)).collect::<Vec<f64>>();
        let t3 = compute_metrics(&col(|p| p.t3_true), &col(|p| p.t3_predicted))?.with_unit(ind.unit());
        let delta = compute_metrics(&col(|p| p.delta_true), &col(|p| p.delta_predicted))?.with_unit(ind.unit());
        rows.push(LpEvalRow { indicator: ind, n_devices: pts.len(), t3, delta });
    }
    if rows.is_empty() {
        return Err(LpAltError::NoGroundTruth);
    }
    Ok(LpAltEvaluation { rows, points, skipped })
}
