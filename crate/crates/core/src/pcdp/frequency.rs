use serde::{Deserialize, Serialize};

use super::PcdpError;
use crate::model::EisSpectrum;
use crate::numerics::{kmeans, mean, variance};
use crate::seed::derive_seed;

/// Relative tolerance for matching a preset frequency in a spectrum.
pub const PROBE_REL_TOL: f64 = 1e-6;

/// How preset frequencies are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequencySelection {
    /// Points outside this band are ignored, Hz.
    pub band: [f64; 2],
    pub medium_band: [f64; 2],
    pub high_band: [f64; 2],
    /// Cluster on log10(f) rather than f.
    pub log_frequency: bool,
    /// Z-score Re before clustering.
    pub zscore_re: bool,
    pub max_iter: usize,
}

impl Default for FrequencySelection {
    fn default() -> Self {
        Self {
            band: [1.0, 1e4],
            medium_band: [1.0, 100.0],
            high_band: [100.0, 1e4],
            log_frequency: true,
            zscore_re: true,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub f_medium: f64,
    pub f_high: f64,
    pub count: usize,
}

/// The medium and high probe frequencies with the per-curve vote table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetFrequencies {
    pub f_medium: f64,
    pub f_high: f64,
    /// Sorted by count descending, then by `f_medium` ascending.
    pub votes: Vec<Vote>,
}

/// Re and Im at the two preset frequencies, mΩ·cm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeVector {
    pub re1: f64,
    pub im1: f64,
    pub re2: f64,
    pub im2: f64,
}

impl ProbeVector {
    /// Model input order.
    pub fn features(&self) -> [f64; 4] {
        [self.re1, self.re2, self.im1, self.im2]
    }
}

fn within(f: f64, [lo, hi]: [f64; 2]) -> bool {
    f >= lo * (1.0 - 1e-9) && f <= hi * (1.0 + 1e-9)
}

/// Nearest grid frequency to `target` inside `band`.
fn snap(target: f64, grid: &[f64], band: [f64; 2]) -> Option<f64> {
    grid.iter()
        .copied()
        .filter(|f| within(*f, band))
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
}

/// The (medium, high) pair one curve votes for.
pub fn curve_vote(eis: &EisSpectrum, cfg: &FrequencySelection, seed: u64, curve_idx: usize) -> Result<(f64, f64), PcdpError> {
    let idx: Vec<usize> = (0..eis.len()).filter(|&i| within(eis.frequencies_hz[i], cfg.band)).collect();
    let covers = |edge: f64| eis.find_frequency(edge, PROBE_REL_TOL).is_some()
        || eis.frequencies_hz.iter().any(|f| *f < edge) && eis.frequencies_hz.iter().any(|f| *f > edge);
    if idx.len() < 2 || !covers(cfg.band[0]) || !covers(cfg.band[1]) {
        return Err(PcdpError::InsufficientRange { curve: curve_idx, band: cfg.band });
    }
    let f: Vec<f64> = idx.iter().map(|&i| eis.frequencies_hz[i]).collect();
    let re: Vec<f64> = idx.iter().map(|&i| eis.re[i]).collect();
    let (m, sd) = (mean(&re), variance(&re).sqrt());
    let points: Vec<Vec<f64>> = f
        .iter()
        .zip(&re)
        .map(|(f, r)| {
            let x = if cfg.log_frequency { f.log10() } else { *f };
            let y = if !cfg.zscore_re {
                *r
            } else if sd > 0.0 {
                (r - m) / sd
            } else {
                0.0
            };
            vec![x, y]
        })
        .collect();
    let c = kmeans(&points, 2, derive_seed(seed, curve_idx as u64), cfg.max_iter, 0.0)
        .map_err(|e| PcdpError::Numerics(e.to_string()))?;
    let cluster_mean = |k: usize, vals: &[f64]| {
        let v: Vec<f64> = vals.iter().zip(&c.assignments).filter(|(_, a)| **a == k).map(|(v, _)| *v).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            mean(&v)
        }
    };
    let logf: Vec<f64> = f.iter().map(|v| v.log10()).collect();
    let (lo, hi) = if cluster_mean(0, &logf) <= cluster_mean(1, &logf) { (0, 1) } else { (1, 0) };
    let (mean_lo, mean_hi) = (cluster_mean(lo, &f), cluster_mean(hi, &f));
    if !(mean_lo.is_finite() && mean_hi.is_finite()) {
        return Err(PcdpError::Numerics(format!("curve {curve_idx}: empty cluster")));
    }
    let fm = snap(mean_lo, &f, cfg.medium_band).ok_or(PcdpError::InsufficientRange { curve: curve_idx, band: cfg.medium_band })?;
    let fh = snap(mean_hi, &f, cfg.high_band).ok_or(PcdpError::InsufficientRange { curve: curve_idx, band: cfg.high_band })?;
    Ok((fm, fh))
}

/// Votes one pair per curve and returns the most frequent pair; ties go to
/// the lower medium frequency.
pub fn select_preset_frequencies(
    curves: &[&EisSpectrum],
    cfg: &FrequencySelection,
    seed: u64,
) -> Result<PresetFrequencies, PcdpError> {
    if curves.is_empty() {
        return Err(PcdpError::NoTrainingRows("preset frequencies".into()));
    }
    let mut votes: Vec<Vote> = Vec::new();
    for (i, eis) in curves.iter().enumerate() {
        let (fm, fh) = curve_vote(eis, cfg, seed, i)?;
        match votes.iter_mut().find(|v| v.f_medium == fm && v.f_high == fh) {
            Some(v) => v.count += 1,
            None => votes.push(Vote { f_medium: fm, f_high: fh, count: 1 }),
        }
    }
    votes.sort_by(|a, b| {
        b.count.cmp(&a.count).then(a.f_medium.total_cmp(&b.f_medium)).then(a.f_high.total_cmp(&b.f_high))
    });
    Ok(PresetFrequencies { f_medium: votes[0].f_medium, f_high: votes[0].f_high, votes })
}

pub fn probe_impedances(eis: &EisSpectrum, pf: &PresetFrequencies) -> Result<ProbeVector, PcdpError> {
    let at = |f: f64| eis.find_frequency(f, PROBE_REL_TOL).ok_or(PcdpError::FrequencyMissing(f));
    let (i, j) = (at(pf.f_medium)?, at(pf.f_high)?);
    Ok(ProbeVector { re1: eis.re[i], im1: eis.im[i], re2: eis.re[j], im2: eis.im[j] })
}
