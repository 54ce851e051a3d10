//! Data model shared by every pipeline: spectra, curves, check-ups and life
//! tests, together with the stage and split selectors.
//!
//! All types are plain data with public fields. Invariants are not enforced on
//! construction; [`validate_lifetest`] reports every violation instead, which
//! lets adapters load imperfect data and surface all problems at once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physical unit tag carried by curve axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    /// A·cm⁻²
    AmperePerCm2,
    Volt,
    Hertz,
    /// mΩ·cm²
    MilliohmCm2,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::AmperePerCm2 => "A/cm2",
            Unit::Volt => "V",
            Unit::Hertz => "Hz",
            Unit::MilliohmCm2 => "mohm*cm2",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Role of a sampled curve. The kind fixes the axis units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Polarization curve: voltage over current density.
    Iv,
    /// Cyclic voltammogram: current density over voltage (raw, may loop).
    Cv,
    /// Linear sweep voltammogram: current density over voltage.
    Lsv,
    /// Voltage difference over current density.
    DeltaVi,
    /// Current-density difference over voltage.
    DeltaIv,
    /// Real-impedance difference over frequency.
    DeltaReF,
    /// Imaginary-impedance difference over frequency.
    DeltaImF,
}

impl CurveKind {
    pub const ALL: [CurveKind; 7] = [
        CurveKind::Iv,
        CurveKind::Cv,
        CurveKind::Lsv,
        CurveKind::DeltaVi,
        CurveKind::DeltaIv,
        CurveKind::DeltaReF,
        CurveKind::DeltaImF,
    ];

    /// (x unit, y unit)
    pub fn units(self) -> (Unit, Unit) {
        match self {
            CurveKind::Iv | CurveKind::DeltaVi => (Unit::AmperePerCm2, Unit::Volt),
            CurveKind::Cv | CurveKind::Lsv | CurveKind::DeltaIv => (Unit::Volt, Unit::AmperePerCm2),
            CurveKind::DeltaReF | CurveKind::DeltaImF => (Unit::Hertz, Unit::MilliohmCm2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Iv => "iv",
            CurveKind::Cv => "cv",
            CurveKind::Lsv => "lsv",
            CurveKind::DeltaVi => "delta_vi",
            CurveKind::DeltaIv => "delta_iv",
            CurveKind::DeltaReF => "delta_re_f",
            CurveKind::DeltaImF => "delta_im_f",
        }
    }

    /// Raw CV loops are multivalued in voltage, so only they are exempt from
    /// the monotone-x rule.
    pub fn requires_monotone_x(self) -> bool {
        self != CurveKind::Cv
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Frequency-indexed complex impedance of one check-up.
///
/// `im` keeps the sign found in the source data; nothing downstream negates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EisSpectrum {
    pub frequencies_hz: Vec<f64>,
    /// mΩ·cm²
    pub re: Vec<f64>,
    /// mΩ·cm²
    pub im: Vec<f64>,
}

impl EisSpectrum {
    pub fn new(frequencies_hz: Vec<f64>, re: Vec<f64>, im: Vec<f64>) -> Self {
        Self { frequencies_hz, re, im }
    }

    pub fn len(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_hz.is_empty()
    }

    /// Index of `freq` within relative tolerance `rel_tol`.
    pub fn find_frequency(&self, freq: f64, rel_tol: f64) -> Option<usize> {
        self.frequencies_hz
            .iter()
            .position(|&f| (f - freq).abs() <= rel_tol * f.abs().max(freq.abs()))
    }

    /// `[re..., im...]` at the requested frequencies, or the first missing one.
    pub fn stacked_at(&self, grid: &[f64], rel_tol: f64) -> Result<Vec<f64>, f64> {
        let mut re = Vec::with_capacity(grid.len() * 2);
        let mut im = Vec::with_capacity(grid.len());
        for &f in grid {
            let i = self.find_frequency(f, rel_tol).ok_or(f)?;
            re.push(self.re[i]);
            im.push(self.im[i]);
        }
        re.extend(im);
        Ok(re)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.frequencies_hz.len();
        if self.re.len() != n || self.im.len() != n {
            out.push(format!(
                "length mismatch: {} frequencies, {} re, {} im",
                n,
                self.re.len(),
                self.im.len()
            ));
        }
        if self.frequencies_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            out.push("frequencies must be finite and > 0".to_string());
        }
        if self.frequencies_hz.windows(2).any(|w| !(w[1] > w[0])) {
            out.push("frequencies not strictly increasing".to_string());
        }
        if self.re.iter().chain(&self.im).any(|v| !v.is_finite()) {
            out.push("non-finite impedance".to_string());
        }
        out
    }
}

/// A generic (x, y) curve with unit-tagged axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub kind: CurveKind,
    pub x: Vec<f64>,
    pub x_unit: Unit,
    pub y: Vec<f64>,
    pub y_unit: Unit,
}

impl SampledCurve {
    /// Builds a curve with the canonical units of `kind`.
    pub fn new(kind: CurveKind, x: Vec<f64>, y: Vec<f64>) -> Self {
        let (x_unit, y_unit) = kind.units();
        Self { kind, x, x_unit, y, y_unit }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_increasing(&self) -> bool {
        self.x.windows(2).all(|w| w[1] > w[0])
    }

    pub fn is_decreasing(&self) -> bool {
        self.x.windows(2).all(|w| w[1] < w[0])
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.x.len() != self.y.len() {
            out.push(format!("length mismatch: {} x, {} y", self.x.len(), self.y.len()));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            out.push("non-finite sample".to_string());
        }
        if self.kind.requires_monotone_x() && !(self.is_increasing() || self.is_decreasing()) {
            out.push("x not strictly monotone".to_string());
        }
        let (xu, yu) = self.kind.units();
        if self.x_unit != xu || self.y_unit != yu {
            out.push(format!(
                "units ({}, {}) do not match kind {} ({}, {})",
                self.x_unit, self.y_unit, self.kind, xu, yu
            ));
        }
        out
    }
}

/// Aging indicators tracked across the pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    /// Limiting current density, A·cm⁻².
    ILim,
    /// Total oxygen mass-transport resistance, s/m.
    RO2Total,
    /// Electrochemically active surface area, cm²_Pt·cm⁻²_geo.
    Ecsa,
    /// Hydrogen crossover current density, A·cm⁻².
    ICross,
    /// Remaining capacitance, µF.
    CRem,
}

impl Indicator {
    pub const ALL: [Indicator; 5] =
        [Indicator::ILim, Indicator::RO2Total, Indicator::Ecsa, Indicator::ICross, Indicator::CRem];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::ILim => "i_lim",
            Indicator::RO2Total => "r_o2_total",
            Indicator::Ecsa => "ecsa",
            Indicator::ICross => "i_cross",
            Indicator::CRem => "c_rem",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Indicator::ILim | Indicator::ICross => "A/cm2",
            Indicator::RO2Total => "s/m",
            Indicator::Ecsa => "cm2_Pt/cm2_geo",
            Indicator::CRem => "uF",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.name() == name)
    }

    fn must_be_positive(self) -> bool {
        matches!(self, Indicator::RO2Total | Indicator::Ecsa | Indicator::CRem)
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgingIndicators {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_lim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_o2_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecsa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_cross: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_rem: Option<f64>,
}

impl AgingIndicators {
    pub fn get(&self, ind: Indicator) -> Option<f64> {
        match ind {
            Indicator::ILim => self.i_lim,
            Indicator::RO2Total => self.r_o2_total,
            Indicator::Ecsa => self.ecsa,
            Indicator::ICross => self.i_cross,
            Indicator::CRem => self.c_rem,
        }
    }

    pub fn set(&mut self, ind: Indicator, value: Option<f64>) {
        let slot = match ind {
            Indicator::ILim => &mut self.i_lim,
            Indicator::RO2Total => &mut self.r_o2_total,
            Indicator::Ecsa => &mut self.ecsa,
            Indicator::ICross => &mut self.i_cross,
            Indicator::CRem => &mut self.c_rem,
        };
        *slot = value;
    }

    /// Present indicators in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (Indicator, f64)> + '_ {
        Indicator::ALL.into_iter().filter_map(|i| self.get(i).map(|v| (i, v)))
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (ind, v) in self.iter() {
            if !v.is_finite() {
                out.push(format!("{ind} is not finite"));
            } else if ind.must_be_positive() && v <= 0.0 {
                out.push(format!("{ind} must be > 0, got {v}"));
            }
        }
        out
    }
}

/// Recognized test-condition keys and their units.
pub const CONDITION_UNITS: &[(&str, &str)] = &[
    ("t_out", "degC"),
    ("h_ca", "%"),
    ("h_an", "%"),
    ("p_ca", "bara"),
    ("p_an", "bara"),
    ("f_ca", "NLPM"),
    ("f_an", "NLPM"),
    ("i_load", "A/cm2"),
    ("i_amp", "A/cm2"),
    ("v_min", "V"),
    ("v_max", "V"),
    ("v_step", "V"),
    ("t_hold", "s"),
    ("n_cv", "1"),
    ("scan_rate", "mV/s"),
    ("v_scan_min", "V"),
    ("v_scan_max", "V"),
];

/// Named test-condition parameters; every key must appear in
/// [`CONDITION_UNITS`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestConditions(pub BTreeMap<String, f64>);

impl TestConditions {
    pub fn unit_of(key: &str) -> Option<&'static str> {
        CONDITION_UNITS.iter().find(|(k, _)| *k == key).map(|(_, u)| *u)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: f64) {
        self.0.insert(key.into(), value);
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, v) in &self.0 {
            if Self::unit_of(k).is_none() {
                out.push(format!("unknown condition key {k:?}"));
            }
            if !v.is_finite() {
                out.push(format!("condition {k} is not finite"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    Seconds,
    Hours,
    Cycles,
}

impl TimeUnit {
    pub fn name(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "s",
            TimeUnit::Hours => "h",
            TimeUnit::Cycles => "cycles",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub value: f64,
    pub unit: TimeUnit,
}

impl StageTime {
    pub fn new(value: f64, unit: TimeUnit) -> Self {
        Self { value, unit }
    }
}

/// All performance-characterization data measured at one test stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckUp {
    pub stage_id: String,
    pub stage_time: StageTime,
    pub eis: Option<EisSpectrum>,
    pub iv: Option<SampledCurve>,
    pub cv: Option<SampledCurve>,
    pub lsv: Option<SampledCurve>,
    pub indicators: AgingIndicators,
    pub conditions: TestConditions,
}

impl CheckUp {
    pub fn new(stage_id: impl Into<String>, stage_time: StageTime) -> Self {
        Self {
            stage_id: stage_id.into(),
            stage_time,
            eis: None,
            iv: None,
            cv: None,
            lsv: None,
            indicators: AgingIndicators::default(),
            conditions: TestConditions::default(),
        }
    }

    pub fn curve(&self, kind: CurveKind) -> Option<&SampledCurve> {
        match kind {
            CurveKind::Iv => self.iv.as_ref(),
            CurveKind::Cv => self.cv.as_ref(),
            CurveKind::Lsv => self.lsv.as_ref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceClass {
    #[serde(rename = "PEMFC")]
    Pemfc,
    #[serde(rename = "PEMWE")]
    Pemwe,
    Capacitor,
}

/// One device's life test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTest {
    pub device_id: String,
    pub device_class: DeviceClass,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    /// Ascending by stage time.
    pub checkups: Vec<CheckUp>,
}

/// One invariant violation found by [`validate_lifetest`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub device_id: String,
    pub stage_id: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.stage_id {
            Some(s) => write!(f, "{}/{}/{}: {}", self.device_id, s, self.field, self.message),
            None => write!(f, "{}/{}: {}", self.device_id, self.field, self.message),
        }
    }
}

/// Checks every invariant of the data model and reports all violations.
pub fn validate_lifetest(lt: &LifeTest) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |stage: Option<&str>, field: &str, message: String| {
        out.push(Violation {
            device_id: lt.device_id.clone(),
            stage_id: stage.map(str::to_string),
            field: field.to_string(),
            message,
        })
    };

    if lt.device_id.is_empty() {
        push(None, "device_id", "empty device id".into());
    }
    if let Some(first) = lt.checkups.first() {
        if lt.checkups.iter().any(|c| c.stage_time.unit != first.stage_time.unit) {
            push(None, "checkups", "mixed stage time units".into());
        }
    }
    if lt.checkups.windows(2).any(|w| w[1].stage_time.value < w[0].stage_time.value) {
        push(None, "checkups", "checkups unsorted".into());
    }
    let mut seen = BTreeSet::new();
    for c in &lt.checkups {
        let s = Some(c.stage_id.as_str());
        if !seen.insert(c.stage_id.as_str()) {
            push(s, "stage_id", "duplicate stage id".into());
        }
        let t = c.stage_time.value;
        if !(t.is_finite() && t >= 0.0) {
            push(s, "stage_time", format!("stage time must be finite and >= 0, got {t}"));
        }
        if let Some(eis) = &c.eis {
            for m in eis.violations() {
                push(s, "eis", m);
            }
        }
        for (field, slot, kind) in [
            ("iv", &c.iv, CurveKind::Iv),
            ("cv", &c.cv, CurveKind::Cv),
            ("lsv", &c.lsv, CurveKind::Lsv),
        ] {
            if let Some(curve) = slot {
                if curve.kind != kind {
                    push(s, field, format!("curve of kind {} stored in {field} slot", curve.kind));
                }
                for m in curve.violations() {
                    push(s, field, m);
                }
            }
        }
        for m in c.indicators.violations() {
            push(s, "indicators", m);
        }
        for m in c.conditions.violations() {
            push(s, "conditions", m);
        }
    }
    out
}

/// [`validate_lifetest`] over a collection, plus device-id uniqueness.
pub fn validate_collection(collection: &[LifeTest]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for lt in collection {
        if !ids.insert(lt.device_id.as_str()) {
            out.push(Violation {
                device_id: lt.device_id.clone(),
                stage_id: None,
                field: "device_id".into(),
                message: "duplicate device id".into(),
            });
        }
        out.extend(validate_lifetest(lt));
    }
    out
}

/// Identifies a check-up by id or by stage time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageSelector {
    Id(String),
    /// Matched against `stage_time.value` with relative tolerance 1e-9.
    Time(f64),
}

impl fmt::Display for StageSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageSelector::Id(id) => write!(f, "id {id:?}"),
            StageSelector::Time(t) => write!(f, "time {t}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StageError {
    #[error("device {device}: no check-up matches {selector}")]
    NoMatch { device: String, selector: String },
    #[error("device {device}: {count} check-ups match {selector}")]
    Ambiguous { device: String, selector: String, count: usize },
    #[error("device {device}: stages must satisfy t1 < t2 < t3 by stage time")]
    Order { device: String },
}

const STAGE_TIME_REL_TOL: f64 = 1e-9;

fn time_matches(actual: f64, wanted: f64) -> bool {
    (actual - wanted).abs() <= STAGE_TIME_REL_TOL * actual.abs().max(wanted.abs())
}

/// Returns the single check-up matching `selector`.
pub fn resolve_stage<'a>(lt: &'a LifeTest, selector: &StageSelector) -> Result<&'a CheckUp, StageError> {
    let mut hits = lt.checkups.iter().filter(|c| match selector {
        StageSelector::Id(id) => &c.stage_id == id,
        StageSelector::Time(t) => time_matches(c.stage_time.value, *t),
    });
    match (hits.next(), hits.count()) {
        (None, _) => Err(StageError::NoMatch {
            device: lt.device_id.clone(),
            selector: selector.to_string(),
        }),
        (Some(c), 0) => Ok(c),
        (Some(_), rest) => Err(StageError::Ambiguous {
            device: lt.device_id.clone(),
            selector: selector.to_string(),
            count: rest + 1,
        }),
    }
}

/// The two early stages (T1, T2) and the predicted target stage (T3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub t1: StageSelector,
    pub t2: StageSelector,
    pub t3: StageSelector,
}

#[derive(Debug, Clone, Copy)]
pub struct ResolvedStages<'a> {
    pub t1: &'a CheckUp,
    pub t2: &'a CheckUp,
    pub t3: &'a CheckUp,
}

impl StageSpec {
    pub fn by_time(t1: f64, t2: f64, t3: f64) -> Self {
        Self {
            t1: StageSelector::Time(t1),
            t2: StageSelector::Time(t2),
            t3: StageSelector::Time(t3),
        }
    }

    pub fn resolve<'a>(&self, lt: &'a LifeTest) -> Result<ResolvedStages<'a>, StageError> {
        let t1 = resolve_stage(lt, &self.t1)?;
        let t2 = resolve_stage(lt, &self.t2)?;
        let t3 = resolve_stage(lt, &self.t3)?;
        let ordered = t1.stage_time.value < t2.stage_time.value
            && t2.stage_time.value < t3.stage_time.value;
        if !ordered {
            return Err(StageError::Order { device: lt.device_id.clone() });
        }
        Ok(ResolvedStages { t1, t2, t3 })
    }
}

/// Whether split ids name devices or individual check-ups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLevel {
    #[default]
    Device,
    /// Ids are `"<device_id>/<stage_id>"`.
    CheckUp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default)]
    pub level: SplitLevel,
    pub train_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
    #[serde(default)]
    pub exclusions: BTreeSet<String>,
}

impl SplitSpec {
    /// Ids that appear in more than one of the three sets.
    pub fn overlaps(&self) -> Vec<String> {
        let mut out: BTreeSet<String> = BTreeSet::new();
        out.extend(self.train_ids.intersection(&self.test_ids).cloned());
        out.extend(self.train_ids.intersection(&self.exclusions).cloned());
        out.extend(self.test_ids.intersection(&self.exclusions).cloned());
        out.into_iter().collect()
    }

    pub fn checkup_key(device_id: &str, stage_id: &str) -> String {
        format!("{device_id}/{stage_id}")
    }
}
