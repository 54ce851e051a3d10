use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::frequency::PresetFrequencies;
use super::pipeline::{FittedModel, IndicatorModel, PcdpModelBundle, Source, SourceKind, TrainingMeta};
use super::PcdpError;
use crate::forest::{ArchiveError, ModelArchive, TuningRecord};
use crate::model::{CurveKind, Indicator};
use crate::numerics::StandardGrids;

pub const PCDP_ARCHIVE_KIND: &str = "pcdp";

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    prefix: String,
    n_inputs: usize,
    n_outputs: usize,
    n_rows: usize,
    tuning: TuningRecord,
}

#[derive(Serialize, Deserialize)]
struct IndicatorMeta {
    source_kind: SourceKind,
    trained_on: Source,
    model: ModelMeta,
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    preset: PresetFrequencies,
    eis_grid: Vec<f64>,
    grids: StandardGrids,
    eis: ModelMeta,
    curves: BTreeMap<CurveKind, ModelMeta>,
    indicators: BTreeMap<Indicator, IndicatorMeta>,
    training: TrainingMeta,
}

fn put(archive: &mut ModelArchive, prefix: String, m: &FittedModel) -> ModelMeta {
    archive.insert_model(&prefix, &m.model);
    ModelMeta { prefix, n_inputs: m.n_inputs(), n_outputs: m.n_outputs(), n_rows: m.n_rows, tuning: m.tuning.clone() }
}

fn take(archive: &ModelArchive, m: ModelMeta) -> Result<FittedModel, ArchiveError> {
    let model = archive.model(&m.prefix, m.n_outputs)?;
    if model.n_inputs != m.n_inputs {
        return Err(ArchiveError::Format(format!("{}: {} inputs stored, {} declared", m.prefix, model.n_inputs, m.n_inputs)));
    }
    Ok(FittedModel { model, tuning: m.tuning, n_rows: m.n_rows })
}

impl PcdpModelBundle {
    pub fn to_archive(&self) -> ModelArchive {
        let mut a = ModelArchive::new(PCDP_ARCHIVE_KIND);
        let eis = put(&mut a, "eis".into(), &self.eis_model);
        let curves = self
            .curve_models
            .iter()
            .map(|(k, m)| (*k, put(&mut a, format!("curve-{}", k.name()), m)))
            .collect();
        let indicators = self
            .indicator_models
            .iter()
            .map(|(i, m)| {
                let model = put(&mut a, format!("indicator-{}", i.name()), &m.fitted);
                (*i, IndicatorMeta { source_kind: m.source_kind, trained_on: m.trained_on, model })
            })
            .collect();
        let meta = BundleMeta {
            preset: self.preset.clone(),
            eis_grid: self.eis_grid.clone(),
            grids: self.grids,
            eis,
            curves,
            indicators,
            training: self.meta.clone(),
        };
        a.meta = serde_json::to_value(meta).expect("bundle meta serializes");
        a
    }

    pub fn from_archive(a: &ModelArchive) -> Result<Self, ArchiveError> {
        if a.kind != PCDP_ARCHIVE_KIND {
            return Err(ArchiveError::Format(format!("archive kind {:?}, expected {PCDP_ARCHIVE_KIND:?}", a.kind)));
        }
        let meta: BundleMeta =
            serde_json::from_value(a.meta.clone()).map_err(|e| ArchiveError::Format(format!("bundle meta: {e}")))?;
        let eis_model = take(a, meta.eis)?;
        if eis_model.n_outputs() != 2 * meta.eis_grid.len() || eis_model.n_inputs() != 4 {
            return Err(ArchiveError::Format("eis model dimensions do not match its grid".into()));
        }
        let mut curve_models = BTreeMap::new();
        for (k, m) in meta.curves {
            let fitted = take(a, m)?;
            let want = meta.grids.get(k).map(|g| g.n_points);
            if want != Some(fitted.n_outputs()) {
                return Err(ArchiveError::Format(format!("{k} model has {} outputs", fitted.n_outputs())));
            }
            curve_models.insert(k, fitted);
        }
        let mut indicator_models = BTreeMap::new();
        for (i, m) in meta.indicators {
            let fitted = take(a, m.model)?;
            indicator_models.insert(i, IndicatorModel { source_kind: m.source_kind, trained_on: m.trained_on, fitted });
        }
        Ok(Self {
            preset: meta.preset,
            eis_grid: meta.eis_grid,
            grids: meta.grids,
            eis_model,
            curve_models,
            indicator_models,
            meta: meta.training,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), PcdpError> {
        Ok(self.to_archive().save(dir)?)
    }

    pub fn load(dir: &Path) -> Result<Self, PcdpError> {
        Ok(Self::from_archive(&ModelArchive::load(dir)?)?)
    }

    /// Frequencies, vote table, grids, model shapes and selected parameters.
    pub fn summary(&self) -> serde_json::Value {
        let model = |m: &FittedModel| {
            json!({
                "n_inputs": m.n_inputs(),
                "n_outputs": m.n_outputs(),
                "n_rows": m.n_rows,
                "params": m.tuning.params,
                "cv_folds": m.tuning.folds,
                "cv_best_rmse": m.tuning.cv_table.iter().map(|r| r.mean_rmse).fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
                "note": m.tuning.note,
            })
        };
        let mut models = serde_json::Map::new();
        models.insert("eis".into(), model(&self.eis_model));
        for (k, m) in &self.curve_models {
            models.insert(k.name().into(), model(m));
        }
        for (i, m) in &self.indicator_models {
            let mut v = model(&m.fitted);
            v["source_kind"] = json!(m.source_kind);
            v["trained_on"] = json!(m.trained_on);
            models.insert(i.name().into(), v);
        }
        json!({
            "preset_frequencies": {
                "f_medium_hz": self.preset.f_medium,
                "f_high_hz": self.preset.f_high,
                "votes": self.preset.votes,
            },
            "eis_grid_hz": self.eis_grid,
            "grids": self.grids,
            "models": models,
            "absent": self.meta.absent,
            "skipped_rows": self.meta.skipped,
            "n_train_checkups": self.meta.train_keys.len(),
            "seed": self.meta.config.seed,
        })
    }
}
