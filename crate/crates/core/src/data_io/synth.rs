use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::model::{CheckUp, CurveKind, DeviceClass, EisSpectrum, LifeTest, SampledCurve, SplitSpec, StageTime, TimeUnit};
use crate::seed::{child_rng, derive_seed, Rng};

/// The 41 measured frequencies between 1 Hz and 10 kHz.
pub const STANDARD_FREQUENCIES_HZ: [f64; 41] = [
    1.0, 1.2589, 1.5849, 1.9953, 2.5119, 3.1623, 3.9811, 5.0119, 6.3096, 7.9433, 10.0, 12.589, 15.849, 19.953, 25.119,
    31.623, 39.811, 50.119, 63.096, 79.433, 100.0, 125.89, 158.49, 199.53, 251.19, 316.23, 398.11, 501.19, 630.96,
    794.33, 1000.0, 1258.9, 1584.9, 1995.3, 2511.9, 3162.3, 3981.1, 5011.9, 6309.6, 7943.3, 10000.0,
];

/// `R0 + R1/(1 + (iωτ1)^α1) + R2/(1 + (iωτ2)^α2)`, resistances in mΩ·cm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub r0: f64,
    pub r1: f64,
    pub tau1: f64,
    pub alpha1: f64,
    pub r2: f64,
    pub tau2: f64,
    pub alpha2: f64,
}

impl Default for Circuit {
    fn default() -> Self {
        Self { r0: 40.0, r1: 100.0, tau1: 3e-4, alpha1: 0.9, r2: 40.0, tau2: 6e-3, alpha2: 0.8 }
    }
}

fn zarc(r: f64, tau: f64, alpha: f64, omega: f64) -> (f64, f64) {
    let m = (omega * tau).powf(alpha);
    let (a, b) = (1.0 + m * (alpha * PI / 2.0).cos(), m * (alpha * PI / 2.0).sin());
    let d = a * a + b * b;
    (r * a / d, -r * b / d)
}

/// Complex impedance `(Re, Im)` of `c` at `f` Hz.
pub fn zarc_impedance(c: &Circuit, f: f64) -> (f64, f64) {
    let w = 2.0 * PI * f;
    let (r1, i1) = zarc(c.r1, c.tau1, c.alpha1, w);
    let (r2, i2) = zarc(c.r2, c.tau2, c.alpha2, w);
    (c.r0 + r1 + r2, i1 + i2)
}

/// Per-device degradation rates are drawn uniformly from these ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRanges {
    /// ECSA(t) = ECSA₀·exp(−ρ·h(t))
    pub ecsa: [f64; 2],
    /// R2(t) = R2₀·(1 + ρ·h(t))
    pub mass_transport: [f64; 2],
    /// membrane state m(t) = ρ·h(t)
    pub membrane: [f64; 2],
    /// Weight of a per-device severity shared by all three rates; each rate
    /// sits at `lo + (hi − lo)·(w·u_shared + (1 − w)·u_own)`.
    pub shared: f64,
}

impl Default for RateRanges {
    fn default() -> Self {
        Self { ecsa: [0.1, 0.7], mass_transport: [0.1, 1.2], membrane: [0.2, 1.5], shared: 0.7 }
    }
}

impl RateRanges {
    pub fn zero() -> Self {
        Self { ecsa: [0.0; 2], mass_transport: [0.0; 2], membrane: [0.0; 2], shared: 0.0 }
    }
}

/// Links between the circuit states, the curves and the indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// Nominal fresh ECSA, cm²_Pt·cm⁻²_geo. R1 scales as ECSA₀/ECSA.
    pub ecsa0: f64,
    /// R_O2,total per mΩ·cm² of R2, s/m.
    pub r_o2_per_r2: f64,
    /// Limiting current at nominal R2, A·cm⁻²; scales as 1/R2.
    pub i_lim0: f64,
    /// Fresh crossover current, A·cm⁻²; grows as (1 + m).
    pub i_cross0: f64,
    /// Relative R0 growth per unit membrane state.
    pub membrane_r0_gain: f64,
    /// Open-circuit reference voltage, V.
    pub u0: f64,
    /// Tafel slope, V/decade.
    pub tafel: f64,
    /// Exchange current density at nominal ECSA, A·cm⁻².
    pub j0: f64,
    /// Mass-transport loss coefficient, V.
    pub mass_transport_c: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Self {
            ecsa0: 60.0,
            r_o2_per_r2: 1.0,
            i_lim0: 8.0,
            i_cross0: 2e-3,
            membrane_r0_gain: 0.3,
            u0: 1.0,
            tafel: 0.06,
            j0: 1e-4,
            mass_transport_c: 0.1,
        }
    }
}

/// Relative Gaussian noise per sample (σ = level·|y|). Indicators stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    pub eis: f64,
    pub iv: f64,
    pub cv: f64,
    pub lsv: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        Self { eis: 0.01, iv: 0.01, cv: 0.01, lsv: 0.01 }
    }
}

impl NoiseLevels {
    pub fn zero() -> Self {
        Self { eis: 0.0, iv: 0.0, cv: 0.0, lsv: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_devices: usize,
    pub n_test: usize,
    /// Check-up stages in cycles, ascending.
    pub stage_cycles: Vec<f64>,
    pub circuit: Circuit,
    /// Half-width of the uniform per-device spread of base parameters.
    pub device_spread: f64,
    pub rates: RateRanges,
    /// h(t) = 1 − exp(−t / saturation_cycles)
    pub saturation_cycles: f64,
    pub coupling: Coupling,
    pub noise: NoiseLevels,
    pub frequencies_hz: Vec<f64>,
    /// Highest current density of the measured I-V sweep, A·cm⁻².
    pub iv_max_current: f64,
    pub iv_points: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_devices: 30,
            n_test: 8,
            stage_cycles: vec![0.0, 1000.0, 5000.0, 10000.0, 30000.0],
            circuit: Circuit::default(),
            device_spread: 0.03,
            rates: RateRanges::default(),
            saturation_cycles: 3000.0,
            coupling: Coupling::default(),
            noise: NoiseLevels::default(),
            frequencies_hz: STANDARD_FREQUENCIES_HZ.to_vec(),
            iv_max_current: 3.1,
            iv_points: 25,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Early-life prediction scenario: stages 0 / 1k / 30k cycles, front-loaded
    /// degradation driven mostly by one per-device severity, and a stronger
    /// mass-transport loss so a 1k-cycle I-V change carries the I_lim trend
    /// above the 1% noise. 100 devices, 25 held out.
    pub fn life_prediction(seed: u64) -> Self {
        Self {
            n_devices: 100,
            n_test: 25,
            stage_cycles: vec![0.0, 1000.0, 30000.0],
            rates: RateRanges { shared: 0.9, ..RateRanges::default() },
            saturation_cycles: 500.0,
            coupling: Coupling { mass_transport_c: 0.2, ..Coupling::default() },
            seed,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Config(m));
        let c = &self.circuit;
        if [c.r0, c.r1, c.tau1, c.r2, c.tau2].iter().any(|v| !(*v > 0.0)) {
            return bad("resistances and time constants must be > 0".into());
        }
        if !(c.alpha1 > 0.0 && c.alpha1 <= 1.0 && c.alpha2 > 0.0 && c.alpha2 <= 1.0) {
            return bad("alpha values must lie in (0, 1]".into());
        }
        if self.n_devices == 0 || self.n_test > self.n_devices {
            return bad(format!("{} devices with {} test devices", self.n_devices, self.n_test));
        }
        if self.stage_cycles.is_empty()
            || self.stage_cycles[0] < 0.0
            || self.stage_cycles.windows(2).any(|w| !(w[1] > w[0]))
        {
            return bad("stage_cycles must be non-negative and strictly ascending".into());
        }
        if !(0.0..1.0).contains(&self.device_spread) || !(self.saturation_cycles > 0.0) {
            return bad("device_spread must be in [0, 1) and saturation_cycles > 0".into());
        }
        let r = &self.rates;
        for (name, [lo, hi]) in [("ecsa", r.ecsa), ("mass_transport", r.mass_transport), ("membrane", r.membrane)] {
            if !(lo >= 0.0 && hi >= lo) {
                return bad(format!("rate range {name} must satisfy 0 <= lo <= hi"));
            }
        }
        if !(0.0..=1.0).contains(&r.shared) {
            return bad("shared rate weight must be in [0, 1]".into());
        }
        let n = &self.noise;
        if [n.eis, n.iv, n.cv, n.lsv].iter().any(|v| !(*v >= 0.0)) {
            return bad("noise levels must be >= 0".into());
        }
        if self.frequencies_hz.is_empty() || self.frequencies_hz.windows(2).any(|w| !(w[1] > w[0])) || self.frequencies_hz[0] <= 0.0 {
            return bad("frequencies must be positive and strictly ascending".into());
        }
        if self.iv_points < 3 || !(self.iv_max_current > 0.0) {
            return bad("I-V sweep needs >= 3 points and a positive maximum".into());
        }
        // the sweep must stay below the limiting current of the worst device
        let worst_r2 = (1.0 + self.device_spread) * (1.0 + r.mass_transport[1]);
        let min_i_lim = self.coupling.i_lim0 * (1.0 - self.device_spread) / worst_r2;
        if min_i_lim <= self.iv_max_current * 1.01 {
            return bad(format!(
                "limiting current can fall to {min_i_lim:.3} A/cm2, below the {} A/cm2 sweep",
                self.iv_max_current
            ));
        }
        Ok(())
    }

    fn h(&self, cycles: f64) -> f64 {
        1.0 - (-cycles / self.saturation_cycles).exp()
    }
}

/// Fixed per-device draws.
#[derive(Debug, Clone, Copy)]
struct Device {
    r0: f64,
    r2: f64,
    ecsa0: f64,
    i_lim0: f64,
    rate_ecsa: f64,
    rate_mt: f64,
    rate_mem: f64,
}

/// Physical state at one stage.
#[derive(Debug, Clone, Copy)]
struct State {
    circuit: Circuit,
    ecsa: f64,
    i_lim: f64,
    i_cross: f64,
    r_o2: f64,
}

fn rate(rng: &mut Rng, [lo, hi]: [f64; 2], shared: f64, u_shared: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * (shared * u_shared + (1.0 - shared) * u)
}

fn draw_device(cfg: &SynthConfig, rng: &mut Rng) -> Device {
    let s = cfg.device_spread;
    let mut spread = |v: f64| if s > 0.0 { v * (1.0 + rng.random_range(-s..s)) } else { v };
    let (r0, r2, ecsa0, i_lim0) = (spread(cfg.circuit.r0), spread(cfg.circuit.r2), spread(cfg.coupling.ecsa0), spread(cfg.coupling.i_lim0));
    let (w, u) = (cfg.rates.shared, rng.random::<f64>());
    Device {
        r0,
        r2,
        ecsa0,
        i_lim0,
        rate_ecsa: rate(rng, cfg.rates.ecsa, w, u),
        rate_mt: rate(rng, cfg.rates.mass_transport, w, u),
        rate_mem: rate(rng, cfg.rates.membrane, w, u),
    }
}

fn state(cfg: &SynthConfig, d: &Device, cycles: f64) -> State {
    let h = cfg.h(cycles);
    let k = &cfg.coupling;
    let ecsa = d.ecsa0 * (-d.rate_ecsa * h).exp();
    let membrane = d.rate_mem * h;
    let r2 = d.r2 * (1.0 + d.rate_mt * h);
    let circuit = Circuit {
        r0: d.r0 * (1.0 + k.membrane_r0_gain * membrane),
        r1: cfg.circuit.r1 * k.ecsa0 / ecsa,
        r2,
        ..cfg.circuit
    };
    State {
        circuit,
        ecsa,
        i_lim: d.i_lim0 * cfg.circuit.r2 / r2,
        i_cross: k.i_cross0 * (1.0 + membrane),
        r_o2: k.r_o2_per_r2 * r2,
    }
}

fn noisy(rng: &mut Rng, level: f64, v: f64) -> f64 {
    if level > 0.0 && v != 0.0 {
        v + Normal::new(0.0, level * v.abs()).expect("positive sigma").sample(rng)
    } else {
        v
    }
}

fn iv_curve(cfg: &SynthConfig, s: &State, rng: &mut Rng) -> SampledCurve {
    let k = &cfg.coupling;
    let j0 = k.j0 * s.ecsa / k.ecsa0;
    let n = cfg.iv_points;
    let x: Vec<f64> = (0..n).map(|i| cfg.iv_max_current * i as f64 / (n - 1) as f64).collect();
    let y = x
        .iter()
        .map(|&j| {
            let v = k.u0 - k.tafel * ((j + s.i_cross) / j0).log10() - s.circuit.r0 / 1000.0 * j
                + k.mass_transport_c * (1.0 - j / s.i_lim).ln();
            noisy(rng, cfg.noise.iv, v)
        })
        .collect();
    SampledCurve::new(CurveKind::Iv, x, y)
}

fn gauss(v: f64, mu: f64, w: f64) -> f64 {
    (-((v - mu) / w).powi(2)).exp()
}

/// Two-cycle CV loop between 0.05 V and 0.9 V; peak heights scale with ECSA.
fn cv_curve(cfg: &SynthConfig, s: &State, rng: &mut Rng) -> SampledCurve {
    let scale = s.ecsa / cfg.coupling.ecsa0;
    let anodic = |v: f64| scale * (1.5e-3 + 4e-3 * gauss(v, 0.13, 0.03) + 3e-3 * gauss(v, 0.27, 0.035));
    let cathodic = |v: f64| -scale * (1.2e-3 + 3.5e-3 * gauss(v, 0.11, 0.03) + 2.5e-3 * gauss(v, 0.25, 0.035));
    let m = 150;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for _ in 0..2 {
        for i in 0..=m {
            let v = 0.05 + 0.85 * i as f64 / m as f64;
            x.push(v);
            y.push(noisy(rng, cfg.noise.cv, anodic(v)));
        }
        for i in 1..m {
            let v = 0.9 - 0.85 * i as f64 / m as f64;
            x.push(v);
            y.push(noisy(rng, cfg.noise.cv, cathodic(v)));
        }
    }
    SampledCurve::new(CurveKind::Cv, x, y)
}

/// Crossover plateau plus a shunt term, swept 0.05 V to 0.6 V.
fn lsv_curve(cfg: &SynthConfig, s: &State, rng: &mut Rng) -> SampledCurve {
    let m = 110;
    let x: Vec<f64> = (0..=m).map(|i| 0.05 + 0.55 * i as f64 / m as f64).collect();
    let y = x
        .iter()
        .map(|&v| {
            let i = s.i_cross * (1.0 - (-(v - 0.05) / 0.02).exp()) + v / 500.0;
            noisy(rng, cfg.noise.lsv, i)
        })
        .collect();
    SampledCurve::new(CurveKind::Lsv, x, y)
}

fn checkup(cfg: &SynthConfig, s: &State, cycles: f64, rng: &mut Rng) -> CheckUp {
    let mut c = CheckUp::new(cycles.to_string(), StageTime::new(cycles, TimeUnit::Cycles));
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for &f in &cfg.frequencies_hz {
        let (r, i) = zarc_impedance(&s.circuit, f);
        re.push(noisy(rng, cfg.noise.eis, r));
        im.push(noisy(rng, cfg.noise.eis, i));
    }
    c.eis = Some(EisSpectrum::new(cfg.frequencies_hz.clone(), re, im));
    c.iv = Some(iv_curve(cfg, s, rng));
    c.cv = Some(cv_curve(cfg, s, rng));
    c.lsv = Some(lsv_curve(cfg, s, rng));
    c.indicators.i_lim = Some(s.i_lim);
    c.indicators.r_o2_total = Some(s.r_o2);
    c.indicators.ecsa = Some(s.ecsa);
    c.indicators.i_cross = Some(s.i_cross);
    c.conditions.insert("t_out", 80.0);
    c.conditions.insert("h_ca", 100.0);
    c.conditions.insert("h_an", 100.0);
    c.conditions.insert("scan_rate", 50.0);
    c
}

fn device_id(i: usize) -> String {
    format!("S{:02}", i + 1)
}

/// Synthetic PEMFC life tests with known degradation states.
///
/// Device `d` draws its parameters from `child_rng(seed, d)` and stage `s`
/// its noise from `child_rng(derive_seed(seed, d), s + 1)`. Test devices are
/// a seeded sample of `n_test` ids.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset, DataError> {
    cfg.check()?;
    let devices: Vec<LifeTest> = (0..cfg.n_devices)
        .into_par_iter()
        .map(|d| {
            let dev = draw_device(cfg, &mut child_rng(cfg.seed, d as u64));
            let dev_seed = derive_seed(cfg.seed, d as u64);
            let checkups = cfg
                .stage_cycles
                .iter()
                .enumerate()
                .map(|(si, &cyc)| checkup(cfg, &state(cfg, &dev, cyc), cyc, &mut child_rng(dev_seed, si as u64 + 1)))
                .collect();
            let mut metadata = BTreeMap::new();
            metadata.insert("rate_ecsa".into(), dev.rate_ecsa.to_string());
            metadata.insert("rate_mass_transport".into(), dev.rate_mt.to_string());
            metadata.insert("rate_membrane".into(), dev.rate_mem.to_string());
            LifeTest { device_id: device_id(d), device_class: DeviceClass::Pemfc, metadata, checkups }
        })
        .collect();

    let mut split = SplitSpec::default();
    let mut rng = child_rng(cfg.seed, u64::MAX);
    let test: Vec<usize> = sample(&mut rng, cfg.n_devices, cfg.n_test).into_vec();
    for d in 0..cfg.n_devices {
        if test.contains(&d) {
            split.test_ids.insert(device_id(d));
        } else {
            split.train_ids.insert(device_id(d));
        }
    }
    Ok(Dataset { devices, split, provenance: vec![format!("synthetic, seed {}", cfg.seed)] })
}
