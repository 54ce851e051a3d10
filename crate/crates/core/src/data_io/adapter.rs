use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format::{check_split_ids, factor, indicator_factor};
use super::{preset_split, DataError, Dataset, Preset, UnitDeclarations};
use crate::model::{
    validate_collection, CheckUp, CurveKind, DeviceClass, EisSpectrum, Indicator, LifeTest, SampledCurve, StageTime,
    TimeUnit,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Eis,
    Iv,
    Cv,
    Lsv,
}

/// A long-format source table: one row per sample, keyed by device and stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTable {
    pub signal: Signal,
    pub path: String,
    pub device_column: String,
    pub stage_column: String,
    pub x_column: String,
    /// EIS: `[re, im]`; curves: `[y]`.
    pub y_columns: Vec<String>,
    #[serde(default = "comma")]
    pub delimiter: char,
    /// Flip the sign of the imaginary column.
    #[serde(default)]
    pub negate_im: bool,
}

/// Indicator values, one row per device and stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTable {
    pub path: String,
    pub device_column: String,
    pub stage_column: String,
    /// indicator name → source column
    pub columns: BTreeMap<String, String>,
    /// indicator name → unit of the source column (default: canonical)
    #[serde(default)]
    pub units: BTreeMap<String, String>,
    #[serde(default = "comma")]
    pub delimiter: char,
}

fn comma() -> char {
    ','
}

fn one() -> f64 {
    1.0
}

/// Maps raw public-dataset tables onto the canonical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub device_class: DeviceClass,
    pub time_unit: TimeUnit,
    /// Multiplier from the raw stage value to the stage time.
    #[serde(default = "one")]
    pub stage_time_scale: f64,
    /// Units of the raw signal columns.
    #[serde(default)]
    pub units: UnitDeclarations,
    pub tables: Vec<SignalTable>,
    #[serde(default)]
    pub indicators: Vec<IndicatorTable>,
    #[serde(default)]
    pub exclude_devices: Vec<String>,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub provenance: Vec<String>,
}

struct Table {
    path: std::path::PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, delimiter: char) -> Result<Self, DataError> {
        let bytes = fs::read(path).map_err(|e| DataError::parse(path, 0, 0, format!("cannot read file: {e}")))?;
        let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter as u8).from_reader(bytes.as_slice());
        let header = rdr.headers().map_err(|e| DataError::parse(path, 1, 0, e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| DataError::parse(path, e.position().map_or(0, |p| p.line()), 0, e.to_string()))?;
            rows.push((rec.position().map_or(0, |p| p.line()), rec));
        }
        Ok(Self { path: path.to_path_buf(), header, rows })
    }

    fn col(&self, name: &str) -> Result<usize, DataError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::parse(&self.path, 1, 0, format!("missing column {name:?}")))
    }

    fn text<'a>(&self, rec: &'a csv::StringRecord, col: usize) -> &'a str {
        rec.get(col).unwrap_or("").trim()
    }

    fn num(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<f64, DataError> {
        let s = self.text(rec, col);
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| DataError::parse(&self.path, line, col + 1, format!("not a finite number: {s:?}")))
    }
}

type StageKey = (String, String);

#[derive(Default)]
struct Pending {
    stage_value: f64,
    eis: Vec<(f64, f64, f64)>,
    curves: BTreeMap<CurveKind, Vec<(f64, f64)>>,
    indicators: Vec<(Indicator, f64)>,
}

struct Registry {
    order: Vec<StageKey>,
    pending: BTreeMap<StageKey, Pending>,
    scale: f64,
}

impl Registry {
    fn entry(
        &mut self,
        t: &Table,
        line: u64,
        dev: &str,
        stage: &str,
        stage_col: usize,
        rec: &csv::StringRecord,
    ) -> Result<StageKey, DataError> {
        let key = (dev.to_string(), stage.to_string());
        if !self.pending.contains_key(&key) {
            let stage_value = t.num(line, rec, stage_col)? * self.scale;
            self.order.push(key.clone());
            self.pending.insert(key.clone(), Pending { stage_value, ..Pending::default() });
        }
        Ok(key)
    }
}

fn sorted_unique<T: Copy>(mut pts: Vec<(f64, T)>) -> Vec<(f64, T)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|b, a| a.0 == b.0);
    pts
}

/// Builds a dataset from the tables named in `cfg`; relative paths resolve
/// against `base_dir`.
pub fn ingest(cfg: &AdapterConfig, base_dir: &Path) -> Result<Dataset, DataError> {
    let freq = factor("frequency", &cfg.units.frequency)?;
    let imp = factor("impedance", &cfg.units.impedance)?;
    let cur = factor("current_density", &cfg.units.current_density)?;
    let volt = factor("voltage", &cfg.units.voltage)?;
    let mut reg = Registry { order: Vec::new(), pending: BTreeMap::new(), scale: cfg.stage_time_scale };
    let mut samples: Vec<(StageKey, Signal, f64, f64, f64)> = Vec::new();
    for spec in &cfg.tables {
        let t = Table::read(&base_dir.join(&spec.path), spec.delimiter)?;
        let (dc, sc, xc) = (t.col(&spec.device_column)?, t.col(&spec.stage_column)?, t.col(&spec.x_column)?);
        let need = if spec.signal == Signal::Eis { 2 } else { 1 };
        if spec.y_columns.len() != need {
            return Err(DataError::Config(format!("{}: {:?} needs {need} y column(s)", spec.path, spec.signal)));
        }
        let ycols: Vec<usize> = spec.y_columns.iter().map(|c| t.col(c)).collect::<Result<_, _>>()?;
        for (line, rec) in &t.rows {
            let key = reg.entry(&t, *line, t.text(rec, dc), t.text(rec, sc), sc, rec)?;
            let x = t.num(*line, rec, xc)?;
            let y0 = t.num(*line, rec, ycols[0])?;
            let y1 = if need == 2 { t.num(*line, rec, ycols[1])? } else { 0.0 };
            samples.push((key, spec.signal, x, y0, if spec.negate_im { -y1 } else { y1 }));
        }
    }
    for (key, signal, x, y0, y1) in samples {
        let p = reg.pending.get_mut(&key).expect("registered");
        match signal {
            Signal::Eis => p.eis.push((x * freq, y0 * imp, y1 * imp)),
            Signal::Iv => p.curves.entry(CurveKind::Iv).or_default().push((x * cur, y0 * volt)),
            Signal::Cv => p.curves.entry(CurveKind::Cv).or_default().push((x * volt, y0 * cur)),
            Signal::Lsv => p.curves.entry(CurveKind::Lsv).or_default().push((x * volt, y0 * cur)),
        }
    }

    for spec in &cfg.indicators {
        let t = Table::read(&base_dir.join(&spec.path), spec.delimiter)?;
        let (dc, sc) = (t.col(&spec.device_column)?, t.col(&spec.stage_column)?);
        let mut cols = Vec::new();
        for (name, col) in &spec.columns {
            let ind = Indicator::from_name(name).ok_or_else(|| DataError::Config(format!("unknown indicator {name:?}")))?;
            let unit = spec.units.get(name).map(String::as_str).unwrap_or(ind.unit());
            let k = indicator_factor(ind, unit).ok_or_else(|| DataError::Config(format!("unit {unit:?} not valid for {name}")))?;
            cols.push((ind, t.col(col)?, k));
        }
        for (line, rec) in &t.rows {
            let key = reg.entry(&t, *line, t.text(rec, dc), t.text(rec, sc), sc, rec)?;
            for &(ind, c, k) in &cols {
                if t.text(rec, c).is_empty() {
                    continue;
                }
                let v = t.num(*line, rec, c)? * k;
                reg.pending.get_mut(&key).expect("registered").indicators.push((ind, v));
            }
        }
    }

    let mut devices: Vec<LifeTest> = Vec::new();
    for key in &reg.order {
        if cfg.exclude_devices.contains(&key.0) {
            continue;
        }
        let p = reg.pending.remove(key).expect("registered");
        let mut c = CheckUp::new(key.1.clone(), StageTime::new(p.stage_value, cfg.time_unit));
        if !p.eis.is_empty() {
            let pts = sorted_unique(p.eis.into_iter().map(|(f, r, i)| (f, (r, i))).collect());
            c.eis = Some(EisSpectrum::new(
                pts.iter().map(|p| p.0).collect(),
                pts.iter().map(|p| p.1 .0).collect(),
                pts.iter().map(|p| p.1 .1).collect(),
            ));
        }
        for (kind, pts) in p.curves {
            let pts = if kind == CurveKind::Cv { pts } else { sorted_unique(pts) };
            let curve = SampledCurve::new(kind, pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect());
            match kind {
                CurveKind::Iv => c.iv = Some(curve),
                CurveKind::Cv => c.cv = Some(curve),
                _ => c.lsv = Some(curve),
            }
        }
        for (ind, v) in p.indicators {
            c.indicators.set(ind, Some(v));
        }
        match devices.iter_mut().find(|d| d.device_id == key.0) {
            Some(d) => d.checkups.push(c),
            None => devices.push(LifeTest {
                device_id: key.0.clone(),
                device_class: cfg.device_class,
                metadata: BTreeMap::new(),
                checkups: vec![c],
            }),
        }
    }
    for d in &mut devices {
        d.checkups.sort_by(|a, b| a.stage_time.value.total_cmp(&b.stage_time.value));
    }
    if !cfg.exclude_devices.is_empty() {
        log::info!("ingest: excluded devices {:?}", cfg.exclude_devices);
    }
    let problems = validate_collection(&devices);
    if !problems.is_empty() {
        return Err(DataError::Validation(problems));
    }
    let mut split = match cfg.preset {
        Some(p) => preset_split(p, &devices)?,
        None => Default::default(),
    };
    // excluded devices are gone, so drop them from the preset's sets
    for id in &cfg.exclude_devices {
        split.train_ids.remove(id);
        split.test_ids.remove(id);
        split.exclusions.remove(id);
    }
    check_split_ids(&devices, &split)?;
    Ok(Dataset { devices, split, provenance: cfg.provenance.clone() })
}
