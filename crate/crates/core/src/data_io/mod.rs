//! Canonical on-disk dataset format, split presets, a configurable CSV
//! adapter for raw sources, and the synthetic degradation generator.

mod adapter;
mod format;
mod split;
mod synth;

pub use adapter::{ingest, AdapterConfig, IndicatorTable, SignalTable};
pub use format::{load_dataset, write_dataset, DatasetManifest, UnitDeclarations, DATASET_FORMAT, DATASET_VERSION};
pub use split::{
    dataset1_split, dataset2_split, dataset3_split, preset_split, split, Preset, DATASET1_EXCLUDED, DATASET1_TEST,
    DATASET2_TEST_ORDINALS,
};
pub use synth::{
    generate_synthetic, zarc_impedance, Circuit, Coupling, NoiseLevels, RateRanges, SynthConfig,
    STANDARD_FREQUENCIES_HZ,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::model::{LifeTest, SplitSpec, Violation};

/// A device collection with its split and free-text provenance notes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub devices: Vec<LifeTest>,
    pub split: SplitSpec,
    pub provenance: Vec<String>,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}:{line}:{column}: {message}", file.display())]
    Parse { file: PathBuf, line: u64, column: usize, message: String },
    #[error("schema: {0}")]
    Schema(String),
    #[error("{} validation problem(s), first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<Violation>),
    #[error("unknown id {0:?}")]
    UnknownId(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl DataError {
    pub(crate) fn parse(file: impl Into<PathBuf>, line: u64, column: usize, message: impl Into<String>) -> Self {
        DataError::Parse { file: file.into(), line, column, message: message.into() }
    }
}
