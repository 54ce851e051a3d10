use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frequency::{probe_impedances, PROBE_REL_TOL};
use super::pipeline::{chain_eis, indicator_input_from_eis, standardized, PcdpModelBundle, Sample, Source};
use super::PcdpError;
use crate::numerics::{compute_metrics, MetricsReport};

/// One line of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    /// `eis`, a curve kind or an indicator name.
    pub output: String,
    /// Where the model inputs came from.
    pub source: Source,
    pub n_checkups: usize,
    pub metrics: MetricsReport,
}

/// One predicted value against its ground truth, for parity plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub output: String,
    pub source: Source,
    pub device_id: String,
    pub stage_id: String,
    /// Position within the output vector (0 for scalars).
    pub index: usize,
    pub truth: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcdpEvaluation {
    pub rows: Vec<EvalRow>,
    pub scatter: Vec<ScatterPoint>,
}

impl PcdpEvaluation {
    pub fn get(&self, output: &str, source: Source) -> Option<&MetricsReport> {
        self.rows.iter().find(|r| r.output == output && r.source == source).map(|r| &r.metrics)
    }
}

type Key = (String, Source);

#[derive(Default)]
struct Acc {
    points: BTreeMap<Key, Vec<ScatterPoint>>,
    checkups: BTreeMap<Key, usize>,
}

impl Acc {
    fn add(&mut self, s: &Sample, output: &str, source: Source, truth: &[f64], pred: &[f64]) {
        let key = (output.to_string(), source);
        *self.checkups.entry(key.clone()).or_default() += 1;
        let pts = self.points.entry(key).or_default();
        for (i, (t, p)) in truth.iter().zip(pred).enumerate() {
            pts.push(ScatterPoint {
                output: output.into(),
                source,
                device_id: s.device_id.into(),
                stage_id: s.checkup.stage_id.clone(),
                index: i,
                truth: *t,
                predicted: *p,
            });
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        for (k, v) in other.points {
            self.points.entry(k).or_default().extend(v);
        }
        for (k, v) in other.checkups {
            *self.checkups.entry(k).or_default() += v;
        }
        self
    }
}

fn evaluate_one(b: &PcdpModelBundle, s: &Sample) -> Result<Acc, PcdpError> {
    let mut acc = Acc::default();
    let Some(eis) = &s.checkup.eis else { return Ok(acc) };
    let probe = match probe_impedances(eis, &b.preset) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("{}/{}: {e}, skipped", s.device_id, s.checkup.stage_id);
            return Ok(acc);
        }
    };
    let eis_pred = chain_eis(b, &probe)?;
    let eis_true = eis.stacked_at(&b.eis_grid, PROBE_REL_TOL).ok();
    if let Some(t) = &eis_true {
        acc.add(s, "eis", Source::Predicted, t, &eis_pred);
    }
    for (&kind, m) in &b.curve_models {
        let Some(truth) = standardized(s.checkup, kind, &b.grids) else { continue };
        if let Some(t) = &eis_true {
            acc.add(s, kind.name(), Source::Measured, &truth, &m.predict(kind.name(), t)?);
        }
        acc.add(s, kind.name(), Source::Predicted, &truth, &m.predict(kind.name(), &eis_pred)?);
    }
    for (&ind, m) in &b.indicator_models {
        let Some(truth) = s.checkup.indicators.get(ind) else { continue };
        let measured = match m.source_kind.curve() {
            None => eis_true.clone(),
            Some(k) => standardized(s.checkup, k, &b.grids),
        };
        if let Some(x) = measured {
            acc.add(s, ind.name(), Source::Measured, &[truth], &m.fitted.predict(ind.name(), &x)?);
        }
        if let Ok(x) = indicator_input_from_eis(b, m.source_kind, &eis_pred) {
            acc.add(s, ind.name(), Source::Predicted, &[truth], &m.fitted.predict(ind.name(), &x)?);
        }
    }
    Ok(acc)
}

fn unit_of(b: &PcdpModelBundle, output: &str) -> String {
    if output == "eis" {
        return "mohm*cm2".into();
    }
    if let Some((&k, _)) = b.curve_models.iter().find(|(k, _)| k.name() == output) {
        return k.units().1.symbol().into();
    }
    crate::model::Indicator::from_name(output).map(|i| i.unit().to_string()).unwrap_or_default()
}

/// Metrics per output and input source: EIS pooled over all targets, curves
/// pooled over their grids, indicators per check-up. Curves and indicators
/// are scored from both measured and reconstructed inputs.
pub fn evaluate_pcdp(bundle: &PcdpModelBundle, test: &[Sample]) -> Result<PcdpEvaluation, PcdpError> {
    let acc = test
        .par_iter()
        .map(|s| evaluate_one(bundle, s))
        .try_reduce(Acc::default, |a, b| Ok(a.merge(b)))?;
    let mut rows = Vec::new();
    let mut scatter = Vec::new();
    for (key, mut pts) in acc.points {
        // par reduction order is not fixed
        pts.sort_by(|a, b| (&a.device_id, &a.stage_id, a.index).cmp(&(&b.device_id, &b.stage_id, b.index)));
        let truth: Vec<f64> = pts.iter().map(|p| p.truth).collect();
        let pred: Vec<f64> = pts.iter().map(|p| p.predicted).collect();
        let metrics = compute_metrics(&truth, &pred)
            .map_err(|e| PcdpError::Numerics(format!("{}: {e}", key.0)))?
            .with_unit(unit_of(bundle, &key.0));
        rows.push(EvalRow { output: key.0.clone(), source: key.1, n_checkups: acc.checkups[&key], metrics });
        scatter.extend(pts);
    }
    if rows.is_empty() {
        return Err(PcdpError::NoGroundTruth);
    }
    Ok(PcdpEvaluation { rows, scatter })
}
