use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::pipeline::{LpAltModelBundle, LpIndicatorModel, LpTrainingMeta};
use super::LpAltError;
use crate::forest::{ArchiveError, ModelArchive, TuningRecord};
use crate::model::{CurveKind, Indicator, StageSpec};
use crate::numerics::StandardGrids;
use crate::sisso::FeatureFormula;

pub const LPALT_ARCHIVE_KIND: &str = "lpalt";

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    forest: String,
    feature_kinds: Vec<CurveKind>,
    formulas: Vec<FeatureFormula>,
    tuning: TuningRecord,
    n_rows: usize,
    delta_range: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    stages: StageSpec,
    grids: StandardGrids,
    models: BTreeMap<Indicator, ModelMeta>,
    training: LpTrainingMeta,
}

impl LpAltModelBundle {
    pub fn to_archive(&self) -> ModelArchive {
        let mut a = ModelArchive::new(LPALT_ARCHIVE_KIND);
        let mut models = BTreeMap::new();
        for (ind, m) in &self.models {
            let name = format!("indicator-{}", ind.name());
            a.forests.insert(name.clone(), m.forest.clone());
            models.insert(
                *ind,
                ModelMeta {
                    forest: name,
                    feature_kinds: m.feature_kinds.clone(),
                    formulas: m.formulas.clone(),
                    tuning: m.tuning.clone(),
                    n_rows: m.n_rows,
                    delta_range: m.delta_range,
                },
            );
        }
        let meta = BundleMeta { stages: self.stages.clone(), grids: self.grids, models, training: self.meta.clone() };
        a.meta = serde_json::to_value(meta).expect("bundle meta serializes");
        a
    }

    pub fn from_archive(a: &ModelArchive) -> Result<Self, ArchiveError> {
        if a.kind != LPALT_ARCHIVE_KIND {
            return Err(ArchiveError::Format(format!("archive kind {:?}, expected {LPALT_ARCHIVE_KIND:?}", a.kind)));
        }
        let meta: BundleMeta =
            serde_json::from_value(a.meta.clone()).map_err(|e| ArchiveError::Format(format!("bundle meta: {e}")))?;
        let mut models = BTreeMap::new();
        for (ind, m) in meta.models {
            let forest = a.forest(&m.forest)?.clone();
            if forest.n_features != m.formulas.len() || m.formulas.len() != m.feature_kinds.len() {
                return Err(ArchiveError::Format(format!("{ind}: forest and formula counts disagree")));
            }
            models.insert(
                ind,
                LpIndicatorModel {
                    indicator: ind,
                    feature_kinds: m.feature_kinds,
                    formulas: m.formulas,
                    forest,
                    tuning: m.tuning,
                    n_rows: m.n_rows,
                    delta_range: m.delta_range,
                },
            );
        }
        Ok(Self { stages: meta.stages, grids: meta.grids, models, meta: meta.training })
    }

    pub fn save(&self, dir: &Path) -> Result<(), LpAltError> {
        Ok(self.to_archive().save(dir)?)
    }

    pub fn load(dir: &Path) -> Result<Self, LpAltError> {
        Ok(Self::from_archive(&ModelArchive::load(dir)?)?)
    }

    /// Formulas as strings, stage spec, grids and selected parameters.
    pub fn summary(&self) -> serde_json::Value {
        let mut models = serde_json::Map::new();
        for (ind, m) in &self.models {
            let formulas: Vec<_> = m
                .feature_kinds
                .iter()
                .zip(&m.formulas)
                .map(|(k, f)| json!({ "curve": k, "formula": f.expr.to_string(), "train_r2": f.r2, "n_leaves": f.expr.leaves().len() }))
                .collect();
            models.insert(
                ind.name().into(),
                json!({
                    "formulas": formulas,
                    "n_rows": m.n_rows,
                    "delta_range": m.delta_range,
                    "params": m.tuning.params,
                    "cv_folds": m.tuning.folds,
                    "note": m.tuning.note,
                }),
            );
        }
        json!({
            "stages": self.stages,
            "grids": self.grids,
            "models": models,
            "absent": self.meta.absent,
            "skipped_devices": self.meta.skipped,
            "train_devices": self.meta.train_devices,
            "seed": self.meta.config.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpalt::pipeline::tests::{planted, quick_config};
    use crate::lpalt::{predict_lpalt, train_lpalt};

    #[test]
    fn bundle_round_trips_losslessly() {
        let devices = planted(14, 11);
        let b = train_lpalt(&devices, &quick_config(vec![Indicator::ILim])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let back = LpAltModelBundle::load(dir.path()).unwrap();
        assert_eq!(back, b);
        assert_eq!(predict_lpalt(&back, &devices[3]).unwrap(), predict_lpalt(&b, &devices[3]).unwrap());
        let s = b.summary();
        assert_eq!(s["models"]["i_lim"]["formulas"][0]["curve"], "delta_vi");
        assert!(s["models"]["i_lim"]["formulas"][0]["formula"].is_string());
    }

    #[test]
    fn malformed_archives_rejected() {
        let devices = planted(8, 12);
        let b = train_lpalt(&devices, &quick_config(vec![Indicator::ILim])).unwrap();
        let mut a = b.to_archive();
        a.kind = "pcdp".into();
        assert!(LpAltModelBundle::from_archive(&a).is_err());
        let mut a = b.to_archive();
        a.forests.clear();
        assert!(LpAltModelBundle::from_archive(&a).is_err());
    }
}
