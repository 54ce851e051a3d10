//! Performance-characterization data prediction: four probe impedances at
//! two preset frequencies are mapped to a full EIS spectrum, the spectrum to
//! I-V, CV and LSV curves, and the curves to aging indicators.

mod bundle;
pub use bundle::PCDP_ARCHIVE_KIND;
mod evaluate;
mod frequency;
mod pipeline;

pub use evaluate::{evaluate_pcdp, EvalRow, PcdpEvaluation, ScatterPoint};
pub use frequency::{
    curve_vote, probe_impedances, select_preset_frequencies, FrequencySelection, PresetFrequencies, ProbeVector,
    Vote, PROBE_REL_TOL,
};
pub use pipeline::{
    predict_pcdp, samples, train_pcdp, FittedModel, IndicatorModel, PcdpConfig, PcdpModelBundle, PcdpPrediction,
    Sample, Source, SourceKind, TrainingMeta, CURVE_KINDS, INDICATOR_INPUTS,
};

use thiserror::Error;

use crate::forest::{ArchiveError, ForestError};

#[derive(Debug, Error)]
pub enum PcdpError {
    #[error("curve {curve} does not cover [{}, {}] Hz", band[0], band[1])]
    InsufficientRange { curve: usize, band: [f64; 2] },
    #[error("frequency {0} Hz not in spectrum")]
    FrequencyMissing(f64),
    #[error("no training rows for {0}")]
    NoTrainingRows(String),
    #[error("bundle has no {0} model")]
    ModelMissing(String),
    #[error("no test rows carry ground truth for any output")]
    NoGroundTruth,
    #[error("{model}: expected {expected} values, got {got}")]
    Dimension { model: String, expected: usize, got: usize },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("numerics: {0}")]
    Numerics(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
}
