use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Forest, MultiTargetModel};

pub const ARCHIVE_FORMAT: &str = "lifetest-model-archive";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Format(String),
}

/// Named forests plus free-form metadata, stored as a directory:
/// `manifest.json` and one `forests/<name>.json` per forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub kind: String,
    pub meta: serde_json::Value,
    pub forests: BTreeMap<String, Forest>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    kind: String,
    meta: serde_json::Value,
    entries: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    file: String,
    n_trees: usize,
    n_features: usize,
    seed: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io { path: path.to_path_buf(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Json { path: path.to_path_buf(), source }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) && !name.starts_with('.')
}

impl ModelArchive {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into(), meta: serde_json::Value::Null, forests: BTreeMap::new() }
    }

    pub fn save(&self, dir: &Path) -> Result<(), ArchiveError> {
        let forest_dir = dir.join("forests");
        fs::create_dir_all(&forest_dir).map_err(io_err(&forest_dir))?;
        let mut entries = Vec::with_capacity(self.forests.len());
        for (name, forest) in &self.forests {
            if !valid_name(name) {
                return Err(ArchiveError::Format(format!("invalid forest name {name:?}")));
            }
            let file = format!("forests/{name}.json");
            let path = dir.join(&file);
            let body = serde_json::to_vec(forest).map_err(json_err(&path))?;
            fs::write(&path, body).map_err(io_err(&path))?;
            entries.push(Entry {
                name: name.clone(),
                file,
                n_trees: forest.trees.len(),
                n_features: forest.n_features,
                seed: forest.params.seed,
            });
        }
        let manifest = Manifest {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            entries,
        };
        let path = dir.join("manifest.json");
        let body = serde_json::to_vec_pretty(&manifest).map_err(json_err(&path))?;
        fs::write(&path, body).map_err(io_err(&path))
    }

    pub fn load(dir: &Path) -> Result<Self, ArchiveError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(json_err(&path))?;
        if manifest.format != ARCHIVE_FORMAT {
            return Err(ArchiveError::Format(format!("unknown archive format {:?}", manifest.format)));
        }
        if manifest.version != ARCHIVE_VERSION {
            return Err(ArchiveError::Format(format!("unsupported archive version {}", manifest.version)));
        }
        let mut forests = BTreeMap::new();
        for e in manifest.entries {
            if !valid_name(&e.name) || e.file != format!("forests/{}.json", e.name) {
                return Err(ArchiveError::Format(format!("bad entry {:?}", e.name)));
            }
            let fpath = dir.join(&e.file);
            let text = fs::read_to_string(&fpath).map_err(io_err(&fpath))?;
            let forest: Forest = serde_json::from_str(&text).map_err(json_err(&fpath))?;
            if forest.trees.len() != e.n_trees || forest.n_features != e.n_features {
                return Err(ArchiveError::Format(format!("{}: manifest and forest disagree", e.file)));
            }
            forests.insert(e.name, forest);
        }
        Ok(Self { kind: manifest.kind, meta: manifest.meta, forests })
    }

    /// Returns the forest or a `Format` error naming it.
    pub fn forest(&self, name: &str) -> Result<&Forest, ArchiveError> {
        self.forests.get(name).ok_or_else(|| ArchiveError::Format(format!("archive has no forest {name:?}")))
    }

    /// Stores each output forest as `<prefix>.<index>`.
    pub fn insert_model(&mut self, prefix: &str, model: &MultiTargetModel) {
        for (t, f) in model.forests.iter().enumerate() {
            self.forests.insert(format!("{prefix}.{t:04}"), f.clone());
        }
    }

    /// Reassembles a model stored by [`ModelArchive::insert_model`].
    pub fn model(&self, prefix: &str, n_outputs: usize) -> Result<MultiTargetModel, ArchiveError> {
        let forests = (0..n_outputs)
            .map(|t| self.forest(&format!("{prefix}.{t:04}")).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        MultiTargetModel::new(forests).map_err(|e| ArchiveError::Format(format!("{prefix}: {e}")))
    }
}
