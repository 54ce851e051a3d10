use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frequency::{probe_impedances, select_preset_frequencies, FrequencySelection, PresetFrequencies, ProbeVector, PROBE_REL_TOL};
use super::PcdpError;
use crate::forest::{tune_and_fit_multi, Matrix, MultiTargetModel, Tuning, TuningRecord};
use crate::model::{AgingIndicators, CheckUp, CurveKind, EisSpectrum, Indicator, LifeTest, SampledCurve};
use crate::numerics::{standardize_curve, StandardGrids};
use crate::seed::derive_seed;

/// Whether a value came from measured data or through predicted inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Measured,
    Predicted,
}

/// The curve an indicator model reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Eis,
    Iv,
    Cv,
    Lsv,
}

impl SourceKind {
    pub fn curve(self) -> Option<CurveKind> {
        match self {
            SourceKind::Eis => None,
            SourceKind::Iv => Some(CurveKind::Iv),
            SourceKind::Cv => Some(CurveKind::Cv),
            SourceKind::Lsv => Some(CurveKind::Lsv),
        }
    }
}

pub const CURVE_KINDS: [CurveKind; 3] = [CurveKind::Iv, CurveKind::Cv, CurveKind::Lsv];

pub const INDICATOR_INPUTS: [(Indicator, SourceKind); 4] = [
    (Indicator::RO2Total, SourceKind::Eis),
    (Indicator::ILim, SourceKind::Iv),
    (Indicator::Ecsa, SourceKind::Cv),
    (Indicator::ICross, SourceKind::Lsv),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcdpConfig {
    pub tuning: Tuning,
    pub frequency: FrequencySelection,
    /// Frequencies of the reconstructed spectrum, Hz.
    pub eis_band: [f64; 2],
    pub grids: StandardGrids,
    /// Inputs the indicator models are trained on.
    pub indicator_source: Source,
    pub seed: u64,
}

impl Default for PcdpConfig {
    fn default() -> Self {
        Self {
            tuning: Tuning::default(),
            frequency: FrequencySelection::default(),
            eis_band: [1.0, 1e4],
            grids: StandardGrids::default(),
            indicator_source: Source::Measured,
            seed: 0,
        }
    }
}

/// One check-up with the device it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub device_id: &'a str,
    pub checkup: &'a CheckUp,
}

pub fn samples(devices: &[LifeTest]) -> Vec<Sample<'_>> {
    devices
        .iter()
        .flat_map(|d| d.checkups.iter().map(move |c| Sample { device_id: &d.device_id, checkup: c }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub model: MultiTargetModel,
    pub tuning: TuningRecord,
    pub n_rows: usize,
}

impl FittedModel {
    pub fn n_inputs(&self) -> usize {
        self.model.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.model.n_outputs()
    }

    pub(crate) fn predict(&self, name: &str, row: &[f64]) -> Result<Vec<f64>, PcdpError> {
        if row.len() != self.n_inputs() {
            return Err(PcdpError::Dimension { model: name.into(), expected: self.n_inputs(), got: row.len() });
        }
        Ok(self.model.predict_row(row)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorModel {
    pub source_kind: SourceKind,
    pub trained_on: Source,
    pub fitted: FittedModel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: PcdpConfig,
    /// `device/stage` keys of the training check-ups.
    pub train_keys: Vec<String>,
    /// Rows dropped per model for missing inputs or targets.
    pub skipped: BTreeMap<String, usize>,
    /// Models that could not be trained, with the reason.
    pub absent: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcdpModelBundle {
    pub preset: PresetFrequencies,
    /// Frequencies of the EIS model outputs; outputs are `[re...; im...]`.
    pub eis_grid: Vec<f64>,
    pub grids: StandardGrids,
    pub eis_model: FittedModel,
    pub curve_models: BTreeMap<CurveKind, FittedModel>,
    pub indicator_models: BTreeMap<Indicator, IndicatorModel>,
    pub meta: TrainingMeta,
}

/// Chained outputs for one probe vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcdpPrediction {
    pub eis: EisSpectrum,
    pub curves: BTreeMap<CurveKind, SampledCurve>,
    pub indicators: AgingIndicators,
    /// Output name to the source of the inputs it was computed from.
    pub provenance: BTreeMap<String, Source>,
}

pub(crate) fn standardized(c: &CheckUp, kind: CurveKind, grids: &StandardGrids) -> Option<Vec<f64>> {
    let curve = c.curve(kind)?;
    let grid = grids.get(kind)?;
    match standardize_curve(curve, &grid) {
        Ok(s) => Some(s.y),
        Err(e) => {
            log::debug!("{} {kind}: {e}", c.stage_id);
            None
        }
    }
}

fn fit(
    name: &str,
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    tuning: &Tuning,
    seed: u64,
) -> Result<Option<FittedModel>, PcdpError> {
    if x.is_empty() {
        return Ok(None);
    }
    let xm = Matrix::from_rows(x)?;
    let ym = Matrix::from_rows(y)?;
    let (forests, tuning) = tune_and_fit_multi(&xm, &ym, tuning, seed)?;
    log::info!("{name}: {} rows, {} inputs, {} outputs", x.len(), xm.cols(), ym.cols());
    Ok(Some(FittedModel { model: MultiTargetModel::new(forests)?, tuning, n_rows: x.len() }))
}

fn in_band(f: f64, [lo, hi]: [f64; 2]) -> bool {
    f >= lo * (1.0 - 1e-9) && f <= hi * (1.0 + 1e-9)
}

fn seed_stream_curve(kind: CurveKind) -> u64 {
    10 + kind as u64
}

fn seed_stream_indicator(ind: Indicator) -> u64 {
    20 + ind as u64
}

/// Reconstructed `[re...; im...]` for a probe.
pub(crate) fn chain_eis(b: &PcdpModelBundle, probe: &ProbeVector) -> Result<Vec<f64>, PcdpError> {
    b.eis_model.predict("eis", &probe.features())
}

pub(crate) fn curve_model(b: &PcdpModelBundle, kind: CurveKind) -> Result<&FittedModel, PcdpError> {
    b.curve_models.get(&kind).ok_or_else(|| PcdpError::ModelMissing(kind.name().into()))
}

/// Indicator input from an EIS vector (measured or reconstructed) through the
/// curve models where needed.
pub(crate) fn indicator_input_from_eis(
    b: &PcdpModelBundle,
    kind: SourceKind,
    eis_vec: &[f64],
) -> Result<Vec<f64>, PcdpError> {
    match kind.curve() {
        None => Ok(eis_vec.to_vec()),
        Some(c) => curve_model(b, c)?.predict(c.name(), eis_vec),
    }
}

fn measured_input(c: &CheckUp, kind: SourceKind, eis_vec: Option<&Vec<f64>>, grids: &StandardGrids) -> Option<Vec<f64>> {
    match kind.curve() {
        None => eis_vec.cloned(),
        Some(k) => standardized(c, k, grids),
    }
}

struct Row<'a> {
    sample: &'a Sample<'a>,
    probe: ProbeVector,
    eis: Vec<f64>,
}

pub fn train_pcdp(train: &[Sample], cfg: &PcdpConfig) -> Result<PcdpModelBundle, PcdpError> {
    let mut meta = TrainingMeta { config: cfg.clone(), ..Default::default() };
    let with_eis: Vec<(&Sample, &EisSpectrum)> =
        train.iter().filter_map(|s| s.checkup.eis.as_ref().map(|e| (s, e))).collect();
    if with_eis.len() < train.len() {
        log::warn!("{} training check-ups without EIS skipped", train.len() - with_eis.len());
    }
    if with_eis.is_empty() {
        return Err(PcdpError::NoTrainingRows("eis".into()));
    }
    let spectra: Vec<&EisSpectrum> = with_eis.iter().map(|(_, e)| *e).collect();
    let preset = select_preset_frequencies(&spectra, &cfg.frequency, derive_seed(cfg.seed, 0))?;
    log::info!("preset frequencies: {} Hz, {} Hz", preset.f_medium, preset.f_high);
    let eis_grid: Vec<f64> = spectra[0].frequencies_hz.iter().copied().filter(|f| in_band(*f, cfg.eis_band)).collect();

    let mut rows = Vec::with_capacity(with_eis.len());
    for (s, e) in &with_eis {
        match (probe_impedances(e, &preset), e.stacked_at(&eis_grid, PROBE_REL_TOL)) {
            (Ok(probe), Ok(eis)) => rows.push(Row { sample: s, probe, eis }),
            _ => log::warn!("{}/{}: spectrum misses the shared grid, skipped", s.device_id, s.checkup.stage_id),
        }
    }
    meta.skipped.insert("eis".into(), train.len() - rows.len());
    meta.train_keys = rows
        .iter()
        .map(|r| crate::model::SplitSpec::checkup_key(r.sample.device_id, &r.sample.checkup.stage_id))
        .collect();
    if rows.is_empty() {
        return Err(PcdpError::NoTrainingRows("eis".into()));
    }

    let (eis_model, curve_models) = rayon::join(
        || {
            let x: Vec<Vec<f64>> = rows.iter().map(|r| r.probe.features().to_vec()).collect();
            let y: Vec<Vec<f64>> = rows.iter().map(|r| r.eis.clone()).collect();
            fit("eis", &x, &y, &cfg.tuning, derive_seed(cfg.seed, 1))
        },
        || {
            CURVE_KINDS
                .par_iter()
                .map(|&kind| {
                    let (x, y): (Vec<_>, Vec<_>) = rows
                        .iter()
                        .filter_map(|r| standardized(r.sample.checkup, kind, &cfg.grids).map(|c| (r.eis.clone(), c)))
                        .unzip();
                    let skipped = rows.len() - x.len();
                    let m = fit(kind.name(), &x, &y, &cfg.tuning, derive_seed(cfg.seed, seed_stream_curve(kind)))?;
                    Ok((kind, skipped, m))
                })
                .collect::<Result<Vec<_>, PcdpError>>()
        },
    );
    let eis_model = eis_model?.expect("rows non-empty");
    let mut bundle = PcdpModelBundle {
        preset,
        eis_grid,
        grids: cfg.grids,
        eis_model,
        curve_models: BTreeMap::new(),
        indicator_models: BTreeMap::new(),
        meta,
    };
    for (kind, skipped, m) in curve_models? {
        bundle.meta.skipped.insert(kind.name().into(), skipped);
        match m {
            Some(m) => {
                bundle.curve_models.insert(kind, m);
            }
            None => {
                log::warn!("{kind}: no training rows, model absent");
                bundle.meta.absent.insert(kind.name().into(), "no training rows".into());
            }
        }
    }

    let trained: Vec<(Indicator, SourceKind, usize, Result<Option<FittedModel>, PcdpError>)> = INDICATOR_INPUTS
        .par_iter()
        .map(|&(ind, kind)| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for r in &rows {
                let Some(target) = r.sample.checkup.indicators.get(ind) else { continue };
                let input = match cfg.indicator_source {
                    Source::Measured => measured_input(r.sample.checkup, kind, Some(&r.eis), &cfg.grids),
                    Source::Predicted => chain_eis(&bundle, &r.probe)
                        .and_then(|e| indicator_input_from_eis(&bundle, kind, &e))
                        .ok(),
                };
                if let Some(input) = input {
                    x.push(input);
                    y.push(vec![target]);
                }
            }
            let skipped = rows.len() - x.len();
            let m = fit(ind.name(), &x, &y, &cfg.tuning, derive_seed(cfg.seed, seed_stream_indicator(ind)));
            (ind, kind, skipped, m)
        })
        .collect();
    for (ind, kind, skipped, m) in trained {
        bundle.meta.skipped.insert(ind.name().into(), skipped);
        match m? {
            Some(fitted) => {
                bundle
                    .indicator_models
                    .insert(ind, IndicatorModel { source_kind: kind, trained_on: cfg.indicator_source, fitted });
            }
            None => {
                log::warn!("{ind}: no training rows, model absent");
                bundle.meta.absent.insert(ind.name().into(), "no training rows".into());
            }
        }
    }
    Ok(bundle)
}

/// Probe to EIS, EIS to every available curve, curves to every available
/// indicator. All outputs are tagged predicted.
pub fn predict_pcdp(bundle: &PcdpModelBundle, probe: &ProbeVector) -> Result<PcdpPrediction, PcdpError> {
    let eis_vec = chain_eis(bundle, probe)?;
    let n = bundle.eis_grid.len();
    let eis = EisSpectrum::new(bundle.eis_grid.clone(), eis_vec[..n].to_vec(), eis_vec[n..].to_vec());
    let mut provenance = BTreeMap::from([("eis".to_string(), Source::Predicted)]);
    let mut curves = BTreeMap::new();
    for (&kind, m) in &bundle.curve_models {
        let y = m.predict(kind.name(), &eis_vec)?;
        let grid = bundle.grids.get(kind).expect("measured kind");
        curves.insert(kind, SampledCurve::new(kind, grid.points(), y));
        provenance.insert(kind.name().into(), Source::Predicted);
    }
    let mut indicators = AgingIndicators::default();
    for (&ind, m) in &bundle.indicator_models {
        let input = match m.source_kind.curve() {
            None => eis_vec.clone(),
            Some(k) => match curves.get(&k) {
                Some(c) => c.y.clone(),
                None => continue,
            },
        };
        indicators.set(ind, Some(m.fitted.predict(ind.name(), &input)?[0]));
        provenance.insert(ind.name().into(), Source::Predicted);
    }
    Ok(PcdpPrediction { eis, curves, indicators, provenance })
}
