use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Classify, CliResult};

pub const METRICS_SCHEMA: &str = "lifetest-metrics";
pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Pretty JSON with sorted keys and a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let v = serde_json::to_value(value).data()?;
    let mut text = serde_json::to_string_pretty(&v).data()?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).data_ctx(format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).data_ctx(format!("writing {}", path.display()))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).data_ctx(format!("creating {}", parent.display()))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .data_ctx(format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r).data_ctx(format!("writing {}", path.display()))?;
    }
    w.flush().data_ctx(format!("writing {}", path.display()))
}

/// Metrics document header shared by every pipeline.
pub fn metrics_doc(pipeline: &str, body: Value) -> Value {
    let mut doc = json!({
        "schema": METRICS_SCHEMA,
        "schema_version": METRICS_SCHEMA_VERSION,
        "pipeline": pipeline,
    });
    if let (Some(d), Value::Object(b)) = (doc.as_object_mut(), body) {
        d.extend(b);
    }
    doc
}

/// Everything needed to repeat a run, plus timings. Written last.
pub struct Run {
    out: PathBuf,
    command: Vec<String>,
    seed: Option<u64>,
    threads: usize,
    config: Value,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    timings: BTreeMap<String, u128>,
    start: Instant,
}

impl Run {
    pub fn new(out: &Path, threads: usize) -> CliResult<Self> {
        fs::create_dir_all(out).data_ctx(format!("creating {}", out.display()))?;
        Ok(Self {
            out: out.to_path_buf(),
            command: std::env::args().collect(),
            seed: None,
            threads,
            config: Value::Null,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            start: Instant::now(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn config(&mut self, cfg: &impl Serialize) {
        self.config = serde_json::to_value(cfg).unwrap_or(Value::Null);
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), path.display().to_string());
    }

    pub fn output(&mut self, rel: &str) {
        self.outputs.push(rel.into());
    }

    /// Runs `f` and records its wall time under `phase`.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
        let t = Instant::now();
        let r = f();
        self.timings.insert(phase.into(), t.elapsed().as_millis());
        r
    }

    pub fn json(&mut self, rel: &str, value: &impl Serialize) -> CliResult<()> {
        write_json(&self.path(rel), value)?;
        self.output(rel);
        Ok(())
    }

    pub fn csv<R: Serialize>(&mut self, rel: &str, rows: &[R]) -> CliResult<()> {
        write_csv(&self.path(rel), rows)?;
        self.output(rel);
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.timings.insert("total".into(), self.start.elapsed().as_millis());
        let manifest = json!({
            "tool": "lifetest",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "threads": self.threads,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "formats": {
                "dataset": lifetest_core::data_io::DATASET_VERSION,
                "metrics": METRICS_SCHEMA_VERSION,
            },
            "timings_ms": self.timings,
        });
        write_json(&self.out.join(RUN_MANIFEST), &manifest)
    }
}
