//! The 2M-ary phase constellation and the mapper from (data bit, basis) to
//! transmitted phase.
//!
//! Basis `k'` owns the antipodal pair of points `k'` and `k' + M`. The bit
//! carried by a point alternates between neighbouring bases, so adjacent
//! points on the circle always carry opposite logical values:
//!
//! ```text
//! point index  l = k' + M * b,   b = x XOR (k' mod 2)
//! phase        theta_s = (pi / M) * l
//! ```

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{domain, Result};

/// A phase on the circle, kept as its representative in `[0, 2pi)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct PhaseAngle(f64);

impl PhaseAngle {
    pub fn new(radians: f64) -> Self {
        let mut r = radians.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2pi for tiny negative inputs.
        if r >= TAU {
            r = 0.0;
        }
        PhaseAngle(r)
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Signed circular difference `self - other`, in `[-pi, pi)`.
    #[inline]
    pub fn diff(self, other: PhaseAngle) -> f64 {
        wrap_signed(self.0 - other.0)
    }

    /// Unsigned circular distance, in `[0, pi]`.
    #[inline]
    pub fn distance(self, other: PhaseAngle) -> f64 {
        self.diff(other).abs()
    }

    pub fn offset(self, radians: f64) -> PhaseAngle {
        PhaseAngle::new(self.0 + radians)
    }
}

impl fmt::Display for PhaseAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.12}", self.0)
    }
}

/// Reduce an angle to `[-pi, pi)`.
#[inline]
pub fn wrap_signed(radians: f64) -> f64 {
    let r = (radians + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Running-key segment selecting one of the M bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex(pub u32);

/// One of the 2M constellation points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalPointIndex(pub u32);

/// Constellation geometry: M bases (a power of two) at mean photon number S.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstellationSpec {
    bases: u32,
    photons: f64,
}

impl ConstellationSpec {
    pub fn new(bases: u32, photons: f64) -> Result<Self> {
        if bases < 2 || !bases.is_power_of_two() {
            return domain(format!("M must be a power of two >= 2, got {bases}"));
        }
        if !(photons > 0.0 && photons.is_finite()) {
            return domain(format!("S must be positive and finite, got {photons}"));
        }
        Ok(ConstellationSpec { bases, photons })
    }

    /// M.
    #[inline]
    pub fn bases(&self) -> u32 {
        self.bases
    }

    /// 2M.
    #[inline]
    pub fn points(&self) -> u32 {
        2 * self.bases
    }

    /// S = alpha_0^2.
    #[inline]
    pub fn photons(&self) -> f64 {
        self.photons
    }

    /// m = log2 M, running-key bits consumed per qumode.
    #[inline]
    pub fn key_bits(&self) -> u32 {
        self.bases.trailing_zeros()
    }

    /// Angular spacing between neighbouring points, pi / M.
    #[inline]
    pub fn spacing(&self) -> f64 {
        PI / self.bases as f64
    }

    pub fn basis(&self, k: u32) -> Result<BasisIndex> {
        if k >= self.bases {
            return domain(format!("basis index {k} out of range for M = {}", self.bases));
        }
        Ok(BasisIndex(k))
    }

    #[inline]
    pub fn point_phase(&self, point: SignalPointIndex) -> PhaseAngle {
        PhaseAngle::new(self.spacing() * point.0 as f64)
    }

    /// Split a point back into (data bit, basis).
    #[inline]
    pub fn split_point(&self, point: SignalPointIndex) -> (bool, BasisIndex) {
        let k = point.0 % self.bases;
        let b = point.0 >= self.bases;
        (b ^ (k & 1 == 1), BasisIndex(k))
    }
}

/// Integer form of the mapper: `l = k' + M * (x XOR (k' mod 2))`.
pub fn point_index(x: bool, k: BasisIndex, spec: &ConstellationSpec) -> Result<SignalPointIndex> {
    if k.0 >= spec.bases {
        return domain(format!("basis index {} out of range for M = {}", k.0, spec.bases));
    }
    Ok(point_index_unchecked(x, k, spec))
}

#[inline]
pub(crate) fn point_index_unchecked(x: bool, k: BasisIndex, spec: &ConstellationSpec) -> SignalPointIndex {
    let b = x ^ (k.0 & 1 == 1);
    SignalPointIndex(k.0 + if b { spec.bases } else { 0 })
}

/// Transmitted phase theta_s(x, k').
pub fn signal_phase(x: bool, k: BasisIndex, spec: &ConstellationSpec) -> Result<PhaseAngle> {
    point_index(x, k, spec).map(|l| spec.point_phase(l))
}

#[inline]
pub(crate) fn signal_phase_unchecked(x: bool, k: BasisIndex, spec: &ConstellationSpec) -> PhaseAngle {
    spec.point_phase(point_index_unchecked(x, k, spec))
}

/// Nearest constellation point to `theta`; exact ties go to the smaller index.
pub fn quantize_to_sector(theta: PhaseAngle, spec: &ConstellationSpec) -> SignalPointIndex {
    let n = spec.points() as f64;
    let t = theta.radians() * spec.bases as f64 / PI;
    let lo = t.floor();
    let frac = t - lo;
    let lo = (lo as u32) % spec.points();
    let hi = (lo + 1) % spec.points();
    debug_assert!(t < n + 1.0);
    let l = if frac < 0.5 {
        lo
    } else if frac > 0.5 {
        hi
    } else {
        lo.min(hi)
    };
    SignalPointIndex(l)
}

/// Random-cipher characteristic Gamma = M / (pi sqrt S): the number of point
/// spacings covered by one noise standard deviation 1/sqrt S.
pub fn gamma(spec: &ConstellationSpec) -> f64 {
    spec.bases as f64 / (PI * spec.photons.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(m: u32) -> ConstellationSpec {
        ConstellationSpec::new(m, 1.0e4).unwrap()
    }

    #[test]
    fn signal_phase_examples() {
        let s = spec(4);
        assert_eq!(signal_phase(false, BasisIndex(0), &s).unwrap().radians(), 0.0);
        assert!((signal_phase(true, BasisIndex(0), &s).unwrap().radians() - PI).abs() < 1e-15);
        let p = signal_phase(false, BasisIndex(1), &s).unwrap().radians();
        assert!((p - 5.0 * PI / 4.0).abs() < 1e-15);
        assert!(signal_phase(false, BasisIndex(4), &s).is_err());
    }

    #[test]
    fn point_index_examples() {
        let s = spec(4);
        assert_eq!(point_index(false, BasisIndex(0), &s).unwrap(), SignalPointIndex(0));
        assert_eq!(point_index(false, BasisIndex(1), &s).unwrap(), SignalPointIndex(5));
        let mut seen: Vec<u32> = (0..4)
            .flat_map(|k| [false, true].map(|x| point_index(x, BasisIndex(k), &s).unwrap().0))
            .collect();
        seen.sort();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn quantize_examples() {
        let s = spec(4);
        assert_eq!(quantize_to_sector(PhaseAngle::new(0.01), &s), SignalPointIndex(0));
        assert_eq!(quantize_to_sector(PhaseAngle::new(PI / 8.0), &s), SignalPointIndex(0));
        assert_eq!(quantize_to_sector(PhaseAngle::new(TAU - 0.01), &s), SignalPointIndex(0));
    }

    #[test]
    fn gamma_examples() {
        let g = gamma(&ConstellationSpec::new(1024, 1.5e4).unwrap());
        assert!((g - 2.661).abs() < 1e-3, "{g}");
        let sq = 16.0 / PI;
        let g = gamma(&ConstellationSpec::new(16, sq * sq).unwrap());
        assert!((g - 1.0).abs() < 1e-12);
        assert!(gamma(&ConstellationSpec::new(16, 1e300).unwrap()) < 1e-140);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ConstellationSpec::new(1, 1.0).is_err());
        assert!(ConstellationSpec::new(12, 1.0).is_err());
        assert!(ConstellationSpec::new(8, 0.0).is_err());
        assert!(ConstellationSpec::new(8, f64::NAN).is_err());
    }

    #[test]
    fn wrap_signed_range() {
        assert_eq!(wrap_signed(PI), -PI);
        assert_eq!(wrap_signed(-PI), -PI);
        assert!((wrap_signed(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn mapper_properties(log_m in 1u32..12, k_raw in any::<u32>(), x in any::<bool>()) {
            let s = spec(1 << log_m);
            let k = BasisIndex(k_raw % s.bases());
            let p0 = signal_phase(x, k, &s).unwrap();
            let p1 = signal_phase(!x, k, &s).unwrap();
            prop_assert!((p0.distance(p1) - PI).abs() < 1e-12);

            let l = point_index(x, k, &s).unwrap();
            prop_assert_eq!(s.split_point(l), (x, k));
            prop_assert_eq!(quantize_to_sector(p0, &s), l);
            prop_assert_eq!(quantize_to_sector(p0, &s).0 % s.bases(), k.0);

            let next = BasisIndex((k.0 + 1) % s.bases());
            if k.0 + 1 < s.bases() {
                let b = |kk: BasisIndex| point_index(x, kk, &s).unwrap().0 >= s.bases();
                prop_assert_ne!(b(k), b(next));
            }
        }
    }
}
