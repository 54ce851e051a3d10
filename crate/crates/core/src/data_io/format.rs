use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::model::{
    validate_collection, CheckUp, CurveKind, DeviceClass, EisSpectrum, Indicator, LifeTest,
    SampledCurve, SplitLevel, SplitSpec, StageTime, TestConditions,
};

pub const DATASET_FORMAT: &str = "lifetest-dataset";
pub const DATASET_VERSION: u32 = 1;

const EIS_HEADER: [&str; 3] = ["frequency_hz", "re_mohm_cm2", "im_mohm_cm2"];
const IV_HEADER: [&str; 2] = ["current_density_a_cm2", "voltage_v"];
const VOLTAMMETRY_HEADER: [&str; 2] = ["voltage_v", "current_density"];
const INDICATOR_HEADER: [&str; 4] = ["stage_id", "indicator", "value", "unit"];

/// Units the CSV columns are stored in. Values are converted to the
/// canonical units on load; the writer always uses the canonical ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitDeclarations {
    pub frequency: String,
    pub impedance: String,
    pub current_density: String,
    pub voltage: String,
}

impl Default for UnitDeclarations {
    fn default() -> Self {
        Self {
            frequency: "Hz".into(),
            impedance: "mohm*cm2".into(),
            current_density: "A/cm2".into(),
            voltage: "V".into(),
        }
    }
}

pub(crate) fn factor(signal: &str, unit: &str) -> Result<f64, DataError> {
    let f = match (signal, unit) {
        ("frequency", "Hz") => 1.0,
        ("frequency", "kHz") => 1e3,
        ("impedance", "mohm*cm2") => 1.0,
        ("impedance", "ohm*cm2") => 1e3,
        ("current_density", "A/cm2") => 1.0,
        ("current_density", "mA/cm2") => 1e-3,
        ("voltage", "V") => 1.0,
        ("voltage", "mV") => 1e-3,
        _ => return Err(DataError::Schema(format!("unsupported {signal} unit {unit:?}"))),
    };
    Ok(f)
}

/// Factor converting an indicator value given in `unit` to the canonical unit.
pub(crate) fn indicator_factor(ind: Indicator, unit: &str) -> Option<f64> {
    if unit == ind.unit() {
        return Some(1.0);
    }
    match (ind, unit) {
        (Indicator::ILim | Indicator::ICross, "mA/cm2") => Some(1e-3),
        (Indicator::RO2Total, "s/cm") => Some(100.0),
        (Indicator::CRem, "F") => Some(1e6),
        (Indicator::CRem, "nF") => Some(1e-3),
        _ => None,
    }
}

struct Scales {
    frequency: f64,
    impedance: f64,
    current_density: f64,
    voltage: f64,
}

impl Scales {
    fn from(u: &UnitDeclarations) -> Result<Self, DataError> {
        Ok(Self {
            frequency: factor("frequency", &u.frequency)?,
            impedance: factor("impedance", &u.impedance)?,
            current_density: factor("current_density", &u.current_density)?,
            voltage: factor("voltage", &u.voltage)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    /// Common class of all devices, when they share one.
    #[serde(default)]
    pub device_class: Option<DeviceClass>,
    #[serde(default)]
    pub units: UnitDeclarations,
    pub devices: Vec<DeviceEntry>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub device_id: String,
    pub device_class: DeviceClass,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub indicators: Option<String>,
    pub checkups: Vec<CheckUpEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckUpEntry {
    pub stage_id: String,
    pub stage_time: StageTime,
    #[serde(default)]
    pub conditions: TestConditions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsv: Option<String>,
}

fn read_table(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, DataError> {
    let text = fs::read(path).map_err(|e| DataError::parse(path, 0, 0, format!("cannot read file: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_slice());
    let got = rdr.headers().map_err(|e| DataError::parse(path, 1, 0, e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(DataError::parse(
            path,
            1,
            0,
            format!("expected header {:?}, found {:?}", header, got.iter().collect::<Vec<_>>()),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            DataError::parse(path, line, 0, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(rows)
}

fn number(path: &Path, line: u64, rec: &csv::StringRecord, col: usize) -> Result<f64, DataError> {
    let field = rec.get(col).unwrap_or("");
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::parse(path, line, col + 1, format!("not a finite decimal number: {field:?}"))),
    }
}

fn read_columns(path: &Path, header: &[&str], scales: &[f64]) -> Result<Vec<Vec<f64>>, DataError> {
    let rows = read_table(path, header)?;
    let mut cols = vec![Vec::with_capacity(rows.len()); header.len()];
    for (line, rec) in &rows {
        for (c, out) in cols.iter_mut().enumerate() {
            out.push(number(path, *line, rec, c)? * scales[c]);
        }
    }
    Ok(cols)
}

fn load_curve(path: &Path, kind: CurveKind, s: &Scales) -> Result<SampledCurve, DataError> {
    let (header, scales): (&[&str], [f64; 2]) = match kind {
        CurveKind::Iv => (&IV_HEADER, [s.current_density, s.voltage]),
        _ => (&VOLTAMMETRY_HEADER, [s.voltage, s.current_density]),
    };
    let mut cols = read_columns(path, header, &scales)?;
    let y = cols.pop().expect("two columns");
    let x = cols.pop().expect("two columns");
    Ok(SampledCurve::new(kind, x, y))
}

fn load_eis(path: &Path, s: &Scales) -> Result<EisSpectrum, DataError> {
    let mut cols = read_columns(path, &EIS_HEADER, &[s.frequency, s.impedance, s.impedance])?;
    let im = cols.pop().expect("three columns");
    let re = cols.pop().expect("three columns");
    let f = cols.pop().expect("three columns");
    Ok(EisSpectrum::new(f, re, im))
}

fn load_indicators(path: &Path, checkups: &mut [CheckUp]) -> Result<(), DataError> {
    for (line, rec) in read_table(path, &INDICATOR_HEADER)? {
        let stage = rec.get(0).unwrap_or("");
        let name = rec.get(1).unwrap_or("");
        let ind = Indicator::from_name(name)
            .ok_or_else(|| DataError::parse(path, line, 2, format!("unknown indicator {name:?}")))?;
        let value = number(path, line, &rec, 2)?;
        let unit = rec.get(3).unwrap_or("");
        let k = indicator_factor(ind, unit)
            .ok_or_else(|| DataError::parse(path, line, 4, format!("unit {unit:?} not valid for {ind}")))?;
        let c = checkups
            .iter_mut()
            .find(|c| c.stage_id == stage)
            .ok_or_else(|| DataError::parse(path, line, 1, format!("no check-up with stage id {stage:?}")))?;
        if c.indicators.get(ind).is_some() {
            return Err(DataError::parse(path, line, 2, format!("{ind} given twice for stage {stage:?}")));
        }
        c.indicators.set(ind, Some(value * k));
    }
    Ok(())
}

fn load_device(root: &Path, entry: &DeviceEntry, s: &Scales) -> Result<LifeTest, DataError> {
    let mut checkups = Vec::with_capacity(entry.checkups.len());
    for ce in &entry.checkups {
        let mut c = CheckUp::new(ce.stage_id.clone(), ce.stage_time);
        c.conditions = ce.conditions.clone();
        if let Some(p) = &ce.eis {
            c.eis = Some(load_eis(&root.join(p), s)?);
        }
        for (slot, file, kind) in
            [(&mut c.iv, &ce.iv, CurveKind::Iv), (&mut c.cv, &ce.cv, CurveKind::Cv), (&mut c.lsv, &ce.lsv, CurveKind::Lsv)]
        {
            if let Some(p) = file {
                *slot = Some(load_curve(&root.join(p), kind, s)?);
            }
        }
        checkups.push(c);
    }
    if let Some(p) = &entry.indicators {
        load_indicators(&root.join(p), &mut checkups)?;
    }
    Ok(LifeTest {
        device_id: entry.device_id.clone(),
        device_class: entry.device_class,
        metadata: entry.metadata.clone(),
        checkups,
    })
}

pub(crate) fn check_split_ids(devices: &[LifeTest], split: &SplitSpec) -> Result<(), DataError> {
    if let Some(id) = split.overlaps().into_iter().next() {
        return Err(DataError::Schema(format!("split id {id:?} appears in more than one set")));
    }
    for id in split.train_ids.iter().chain(&split.test_ids).chain(&split.exclusions) {
        let known = match split.level {
            SplitLevel::Device => devices.iter().any(|d| &d.device_id == id),
            SplitLevel::CheckUp => devices.iter().any(|d| {
                d.checkups.iter().any(|c| &SplitSpec::checkup_key(&d.device_id, &c.stage_id) == id)
            }),
        };
        if !known {
            return Err(DataError::UnknownId(id.clone()));
        }
    }
    Ok(())
}

/// Reads a manifest and every file it references, normalizes units and
/// validates the result.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| DataError::parse(manifest_path, 0, 0, format!("cannot read manifest: {e}")))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| DataError::parse(manifest_path, e.line() as u64, e.column(), e.to_string()))?;
    if manifest.format != DATASET_FORMAT || manifest.version != DATASET_VERSION {
        return Err(DataError::Schema(format!(
            "expected {DATASET_FORMAT} v{DATASET_VERSION}, found {} v{}",
            manifest.format, manifest.version
        )));
    }
    let scales = Scales::from(&manifest.units)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let devices: Vec<LifeTest> =
        manifest.devices.par_iter().map(|d| load_device(root, d, &scales)).collect::<Result<_, _>>()?;
    let problems = validate_collection(&devices);
    if !problems.is_empty() {
        return Err(DataError::Validation(problems));
    }
    check_split_ids(&devices, &manifest.split)?;
    Ok(Dataset { devices, split: manifest.split, provenance: manifest.provenance })
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| DataError::Io { path: path.to_path_buf(), source: e.into() };
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| DataError::Io { path: path.to_path_buf(), source: e.into_error() })?;
    fs::write(path, bytes).map_err(io(path))
}

fn columns_rows<'a>(cols: &'a [&'a [f64]]) -> impl Iterator<Item = Vec<String>> + 'a {
    (0..cols[0].len()).map(move |i| cols.iter().map(|c| c[i].to_string()).collect())
}

/// Writes `dataset` in canonical units under `dir` and returns the
/// manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf, DataError> {
    let problems = validate_collection(&dataset.devices);
    if !problems.is_empty() {
        return Err(DataError::Validation(problems));
    }
    check_split_ids(&dataset.devices, &dataset.split)?;
    let mut entries = Vec::with_capacity(dataset.devices.len());
    for (di, lt) in dataset.devices.iter().enumerate() {
        let rel_dir = format!("devices/d{di:03}");
        let abs_dir = dir.join(&rel_dir);
        fs::create_dir_all(&abs_dir).map_err(io(&abs_dir))?;
        let mut checkups = Vec::with_capacity(lt.checkups.len());
        let mut indicator_rows = Vec::new();
        for (si, c) in lt.checkups.iter().enumerate() {
            let mut e = CheckUpEntry {
                stage_id: c.stage_id.clone(),
                stage_time: c.stage_time,
                conditions: c.conditions.clone(),
                eis: None,
                iv: None,
                cv: None,
                lsv: None,
            };
            if let Some(eis) = &c.eis {
                let rel = format!("{rel_dir}/s{si:03}_eis.csv");
                write_csv(&dir.join(&rel), &EIS_HEADER, columns_rows(&[&eis.frequencies_hz, &eis.re, &eis.im]))?;
                e.eis = Some(rel);
            }
            for (curve, slot, header) in [
                (&c.iv, &mut e.iv, &IV_HEADER),
                (&c.cv, &mut e.cv, &VOLTAMMETRY_HEADER),
                (&c.lsv, &mut e.lsv, &VOLTAMMETRY_HEADER),
            ] {
                if let Some(curve) = curve {
                    let rel = format!("{rel_dir}/s{si:03}_{}.csv", curve.kind.name());
                    write_csv(&dir.join(&rel), header, columns_rows(&[&curve.x, &curve.y]))?;
                    *slot = Some(rel);
                }
            }
            for (ind, v) in c.indicators.iter() {
                indicator_rows.push(vec![c.stage_id.clone(), ind.name().into(), v.to_string(), ind.unit().into()]);
            }
            checkups.push(e);
        }
        let indicators = if indicator_rows.is_empty() {
            None
        } else {
            let rel = format!("{rel_dir}/indicators.csv");
            write_csv(&dir.join(&rel), &INDICATOR_HEADER, indicator_rows.into_iter())?;
            Some(rel)
        };
        entries.push(DeviceEntry {
            device_id: lt.device_id.clone(),
            device_class: lt.device_class,
            metadata: lt.metadata.clone(),
            indicators,
            checkups,
        });
    }
    let first = dataset.devices.first().map(|d| d.device_class);
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        device_class: first.filter(|c| dataset.devices.iter().all(|d| d.device_class == *c)),
        units: UnitDeclarations::default(),
        devices: entries,
        split: dataset.split.clone(),
        provenance: dataset.provenance.clone(),
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, body + "\n").map_err(io(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::dataset1_like;
    use crate::model::TimeUnit;

    fn sample() -> Dataset {
        let mut a = dataset1_like();
        a.metadata.insert("pt_load".into(), "0.4".into());
        let mut b = dataset1_like();
        b.device_id = "2".into();
        b.checkups[1].cv = Some(SampledCurve::new(CurveKind::Cv, vec![0.1, 0.5, 0.9, 0.5, 0.1], vec![1e-3, 2e-3, 3e-3, -1e-3, -2e-3]));
        b.checkups[2].lsv = Some(SampledCurve::new(CurveKind::Lsv, vec![0.1, 0.2, 0.3], vec![1.0 / 3.0, 0.1 + 0.2, -0.0]));
        b.checkups[0].indicators.i_lim = Some(3.3000000000000003);
        let mut split = SplitSpec::default();
        split.train_ids.insert("1".into());
        split.test_ids.insert("2".into());
        Dataset { devices: vec![a, b], split, provenance: vec!["fixture".into()] }
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample();
        let path = write_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn empty_collection() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(&Dataset::default(), dir.path()).unwrap();
        let back = load_dataset(&path).unwrap();
        assert!(back.devices.is_empty());
    }

    #[test]
    fn missing_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(&sample(), dir.path()).unwrap();
        let victim = dir.path().join("devices/d000/s002_eis.csv");
        fs::remove_file(&victim).unwrap();
        match load_dataset(&path) {
            Err(DataError::Parse { file, .. }) => assert_eq!(file, victim),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(&sample(), dir.path()).unwrap();
        let f = dir.path().join("devices/d000/s000_iv.csv");
        let text = fs::read_to_string(&f).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = "0.26,1,5".into();
        fs::write(&f, lines.join("\n") + "\n").unwrap();
        match load_dataset(&path) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        lines[3] = "0.26,abc".into();
        fs::write(&f, lines.join("\n") + "\n").unwrap();
        match load_dataset(&path) {
            Err(DataError::Parse { line, column, .. }) => assert_eq!((line, column), (4, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn units_are_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(&sample(), dir.path()).unwrap();
        let mut m: DatasetManifest = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        m.units.impedance = "ohm*cm2".into();
        m.units.current_density = "mA/cm2".into();
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        let ds = load_dataset(&path).unwrap();
        let orig = sample();
        let (a, b) = (&ds.devices[0].checkups[0], &orig.devices[0].checkups[0]);
        assert_eq!(a.eis.as_ref().unwrap().re[0], b.eis.as_ref().unwrap().re[0] * 1e3);
        assert_eq!(a.iv.as_ref().unwrap().x[1], b.iv.as_ref().unwrap().x[1] * 1e-3);
        m.units.voltage = "kV".into();
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(load_dataset(&path), Err(DataError::Schema(_))));
    }

    #[test]
    fn invalid_collection_is_rejected() {
        let mut ds = sample();
        ds.devices[1].checkups[0].stage_time = StageTime::new(1e9, TimeUnit::Seconds);
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(write_dataset(&ds, dir.path()), Err(DataError::Validation(_))));
    }

    #[test]
    fn unknown_split_id() {
        let mut ds = sample();
        ds.split.test_ids.insert("99".into());
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(write_dataset(&ds, dir.path()), Err(DataError::UnknownId(id)) if id == "99"));
    }
}
