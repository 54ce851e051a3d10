//! Life-test prediction from two early check-ups: difference curves between
//! T1 and T2, two-point features searched by [`crate::sisso`], and forests
//! mapping those features to the change of each aging indicator up to T3.

mod bundle;
mod difference;
mod pipeline;
mod report;

pub use bundle::LPALT_ARCHIVE_KIND;
pub use difference::{build_difference_curves, difference_curve, DifferenceCurveSet, DIFFERENCE_KINDS, FREQ_GRID_REL_TOL};
pub use pipeline::{
    evaluate_lpalt, feature_kinds, predict_indicator, predict_lpalt, train_lpalt, IndicatorPrediction, LpAltConfig,
    LpAltEvaluation, LpAltModelBundle, LpAltPrediction, LpEvalPoint, LpEvalRow, LpIndicatorModel, LpTrainingMeta,
};
pub use report::{acceleration_report, convert_time, AccelerationReport};

use thiserror::Error;

use crate::forest::{ArchiveError, ForestError};
use crate::model::{CurveKind, Indicator, StageError};
use crate::numerics::NumericsError;
use crate::sisso::SissoError;

#[derive(Debug, Error)]
pub enum LpAltError {
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error("EIS frequency grids of stages {t1} and {t2} differ")]
    FrequencyGridMismatch { t1: String, t2: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Sisso(#[from] SissoError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("{0} is not a difference curve kind")]
    UnsupportedKind(CurveKind),
    #[error("{0} has no LP-ALT model")]
    UnsupportedIndicator(Indicator),
    #[error("no training rows for {0}")]
    NoTrainingRows(String),
    #[error("bundle has no {0} model")]
    ModelMissing(String),
    #[error("device {device}: no {indicator} at T1")]
    MissingT1Indicator { device: String, indicator: Indicator },
    #[error("device {device}: cannot build {kind}")]
    MissingCurve { device: String, kind: CurveKind },
    #[error("no test device carries T3 ground truth")]
    NoGroundTruth,
    #[error("T2 stage time must be > 0")]
    ZeroT2Time,
    #[error("time units: {0}")]
    UnitMismatch(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
}
