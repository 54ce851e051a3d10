use serde::{Deserialize, Serialize};

use super::LpAltError;
use crate::model::{CheckUp, CurveKind, EisSpectrum, SampledCurve};
use crate::numerics::{standardize_curve, StandardGrids};

/// Relative tolerance for two stages' EIS frequencies to count as the same grid.
pub const FREQ_GRID_REL_TOL: f64 = 1e-9;

/// Difference curves between two early stages; a kind is absent when either
/// stage lacks its source data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DifferenceCurveSet {
    /// IV(T2) − IV(T1)
    pub delta_vi: Option<SampledCurve>,
    /// CV(T1) − CV(T2)
    pub delta_iv: Option<SampledCurve>,
    /// Re(T2) − Re(T1)
    pub delta_re: Option<SampledCurve>,
    /// Im(T2) − Im(T1)
    pub delta_im: Option<SampledCurve>,
}

impl DifferenceCurveSet {
    pub fn get(&self, kind: CurveKind) -> Option<&SampledCurve> {
        match kind {
            CurveKind::DeltaVi => self.delta_vi.as_ref(),
            CurveKind::DeltaIv => self.delta_iv.as_ref(),
            CurveKind::DeltaReF => self.delta_re.as_ref(),
            CurveKind::DeltaImF => self.delta_im.as_ref(),
            _ => None,
        }
    }

    fn slot(&mut self, kind: CurveKind) -> &mut Option<SampledCurve> {
        match kind {
            CurveKind::DeltaVi => &mut self.delta_vi,
            CurveKind::DeltaIv => &mut self.delta_iv,
            CurveKind::DeltaReF => &mut self.delta_re,
            CurveKind::DeltaImF => &mut self.delta_im,
            other => unreachable!("{other} is not a difference kind"),
        }
    }
}

pub const DIFFERENCE_KINDS: [CurveKind; 4] =
    [CurveKind::DeltaVi, CurveKind::DeltaIv, CurveKind::DeltaReF, CurveKind::DeltaImF];

fn same_grid(a: &EisSpectrum, b: &EisSpectrum) -> bool {
    a.len() == b.len()
        && a.frequencies_hz
            .iter()
            .zip(&b.frequencies_hz)
            .all(|(x, y)| (x - y).abs() <= FREQ_GRID_REL_TOL * x.abs().max(y.abs()))
}

fn standardized_delta(
    kind: CurveKind,
    source: CurveKind,
    early: &CheckUp,
    late: &CheckUp,
    grids: &StandardGrids,
) -> Result<Option<SampledCurve>, LpAltError> {
    let (Some(a), Some(b)) = (early.curve(source), late.curve(source)) else {
        return Ok(None);
    };
    let grid = grids.get(source).expect("measured kind has a grid");
    let a = standardize_curve(a, &grid)?;
    let b = standardize_curve(b, &grid)?;
    let y = a.y.iter().zip(&b.y).map(|(p, q)| q - p).collect();
    Ok(Some(SampledCurve::new(kind, a.x, y)))
}

/// One difference curve; `Ok(None)` when a stage lacks the source data.
pub fn difference_curve(
    kind: CurveKind,
    t1: &CheckUp,
    t2: &CheckUp,
    grids: &StandardGrids,
) -> Result<Option<SampledCurve>, LpAltError> {
    match kind {
        CurveKind::DeltaVi => standardized_delta(kind, CurveKind::Iv, t1, t2, grids),
        // reversed: CV(T1) − CV(T2)
        CurveKind::DeltaIv => standardized_delta(kind, CurveKind::Cv, t2, t1, grids),
        CurveKind::DeltaReF | CurveKind::DeltaImF => {
            let (Some(a), Some(b)) = (&t1.eis, &t2.eis) else { return Ok(None) };
            if !same_grid(a, b) {
                return Err(LpAltError::FrequencyGridMismatch { t1: t1.stage_id.clone(), t2: t2.stage_id.clone() });
            }
            let (p, q) = if kind == CurveKind::DeltaReF { (&a.re, &b.re) } else { (&a.im, &b.im) };
            let y = p.iter().zip(q).map(|(p, q)| q - p).collect();
            Ok(Some(SampledCurve::new(kind, a.frequencies_hz.clone(), y)))
        }
        other => Err(LpAltError::UnsupportedKind(other)),
    }
}

/// ΔV/I = IV(T2) − IV(T1), ΔI/V = CV(T1) − CV(T2), ΔRe/f = Re(T2) − Re(T1),
/// ΔIm/f = Im(T2) − Im(T1). I-V and CV are standardized first; EIS is
/// subtracted on its measured grid.
pub fn build_difference_curves(
    t1: &CheckUp,
    t2: &CheckUp,
    grids: &StandardGrids,
) -> Result<DifferenceCurveSet, LpAltError> {
    let mut set = DifferenceCurveSet::default();
    for kind in DIFFERENCE_KINDS {
        let curve = difference_curve(kind, t1, t2, grids)?;
        if curve.is_none() {
            log::debug!("{} -> {}: no {kind}", t1.stage_id, t2.stage_id);
        }
        *set.slot(kind) = curve;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{generate_synthetic, SynthConfig};
    use crate::numerics::NumericsError;
    use crate::sisso::enumerate_two_point_features;
    use proptest::prelude::*;

    fn pair(seed: u64) -> (CheckUp, CheckUp) {
        let ds = generate_synthetic(&SynthConfig { n_devices: 2, n_test: 0, seed, ..Default::default() }).unwrap();
        let d = &ds.devices[0];
        (d.checkups[0].clone(), d.checkups[1].clone())
    }

    fn all(set: &DifferenceCurveSet) -> Vec<&SampledCurve> {
        DIFFERENCE_KINDS.iter().filter_map(|k| set.get(*k)).collect()
    }

    #[test]
    fn identical_checkups_give_zero() {
        let (a, _) = pair(1);
        let set = build_difference_curves(&a, &a, &StandardGrids::default()).unwrap();
        assert_eq!(all(&set).len(), 4);
        for c in all(&set) {
            assert!(c.y.iter().all(|v| v.abs() <= 1e-12), "{}", c.kind);
        }
    }

    #[test]
    fn sign_conventions() {
        let (a, b) = pair(2);
        let g = StandardGrids::default();
        let set = build_difference_curves(&a, &b, &g).unwrap();
        let iv1 = standardize_curve(a.iv.as_ref().unwrap(), &g.iv).unwrap();
        let iv2 = standardize_curve(b.iv.as_ref().unwrap(), &g.iv).unwrap();
        assert_eq!(set.delta_vi.as_ref().unwrap().y[7], iv2.y[7] - iv1.y[7]);
        let cv1 = standardize_curve(a.cv.as_ref().unwrap(), &g.cv).unwrap();
        let cv2 = standardize_curve(b.cv.as_ref().unwrap(), &g.cv).unwrap();
        assert_eq!(set.delta_iv.as_ref().unwrap().y[30], cv1.y[30] - cv2.y[30]);
        let (e1, e2) = (a.eis.as_ref().unwrap(), b.eis.as_ref().unwrap());
        assert_eq!(set.delta_re.as_ref().unwrap().y[3], e2.re[3] - e1.re[3]);
        assert_eq!(set.delta_im.as_ref().unwrap().y[3], e2.im[3] - e1.im[3]);
        assert_eq!(set.delta_vi.as_ref().unwrap().x, g.iv.points());
        assert_eq!(set.delta_re.as_ref().unwrap().x, e1.frequencies_hz);
    }

    #[test]
    fn uniform_re_shift() {
        let (a, _) = pair(3);
        let mut b = a.clone();
        for r in &mut b.eis.as_mut().unwrap().re {
            *r += 0.5;
        }
        let set = build_difference_curves(&a, &b, &StandardGrids::default()).unwrap();
        let d = set.delta_re.unwrap();
        let re1 = &a.eis.as_ref().unwrap().re;
        for (v, r) in d.y.iter().zip(re1) {
            // the oracle: (r + 0.5) − r in floating point
            assert_eq!(*v, (r + 0.5) - r);
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_pcd_gives_absent_delta() {
        let (a, mut b) = pair(4);
        b.cv = None;
        b.eis = None;
        let set = build_difference_curves(&a, &b, &StandardGrids::default()).unwrap();
        assert!(set.delta_iv.is_none() && set.delta_re.is_none() && set.delta_im.is_none());
        assert!(set.delta_vi.is_some());
    }

    #[test]
    fn mismatched_frequency_grid() {
        let (a, mut b) = pair(5);
        b.eis.as_mut().unwrap().frequencies_hz[4] *= 1.001;
        assert!(matches!(
            build_difference_curves(&a, &b, &StandardGrids::default()),
            Err(LpAltError::FrequencyGridMismatch { .. })
        ));
    }

    #[test]
    fn out_of_domain_iv() {
        let (a, mut b) = pair(6);
        let iv = b.iv.as_mut().unwrap();
        iv.x.truncate(10);
        iv.y.truncate(10);
        assert!(matches!(
            build_difference_curves(&a, &b, &StandardGrids::default()),
            Err(LpAltError::Numerics(NumericsError::GridOutOfDomain { .. }))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn antisymmetric(seed in 0u64..1000) {
            let (a, b) = pair(seed);
            let g = StandardGrids::default();
            let ab = build_difference_curves(&a, &b, &g).unwrap();
            let ba = build_difference_curves(&b, &a, &g).unwrap();
            for k in DIFFERENCE_KINDS {
                let (p, q) = (ab.get(k).unwrap(), ba.get(k).unwrap());
                prop_assert_eq!(&p.x, &q.x);
                for (u, v) in p.y.iter().zip(&q.y) {
                    prop_assert_eq!(*u, -*v);
                }
            }
        }

        #[test]
        fn offsets(seed in 0u64..1000, c in -5.0f64..5.0) {
            let (a, b) = pair(seed);
            let g = StandardGrids::default();
            let base = build_difference_curves(&a, &b, &g).unwrap();
            let shift = |cu: &CheckUp| {
                let mut cu = cu.clone();
                for y in &mut cu.iv.as_mut().unwrap().y {
                    *y += c;
                }
                for r in &mut cu.eis.as_mut().unwrap().re {
                    *r += c;
                }
                cu
            };
            // both stages shifted: deltas unchanged
            let both = build_difference_curves(&shift(&a), &shift(&b), &g).unwrap();
            for k in [CurveKind::DeltaVi, CurveKind::DeltaReF] {
                for (u, v) in base.get(k).unwrap().y.iter().zip(&both.get(k).unwrap().y) {
                    prop_assert!((u - v).abs() <= 1e-9);
                }
            }
            // one stage shifted: delta moves uniformly, two-point features do not
            let one = build_difference_curves(&a, &shift(&b), &g).unwrap();
            for k in [CurveKind::DeltaVi, CurveKind::DeltaReF] {
                let p = base.get(k).unwrap();
                let q = one.get(k).unwrap();
                for (u, v) in p.y.iter().zip(&q.y) {
                    prop_assert!((v - u - c).abs() <= 1e-9);
                }
                let fp = enumerate_two_point_features(std::slice::from_ref(p)).unwrap();
                let fq = enumerate_two_point_features(std::slice::from_ref(q)).unwrap();
                for (x, y) in fp.columns.iter().zip(&fq.columns) {
                    prop_assert!((x[0] - y[0]).abs() <= 1e-12);
                }
            }
        }
    }
}
