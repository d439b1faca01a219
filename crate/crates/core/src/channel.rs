//! Phase measurement noise: the kernel `p(theta | theta_r)` and samplers.
//!
//! Every kernel here is circularly symmetric, a function of the offset
//! `theta - theta_r` only. Custom measurement models plug in through
//! [`PhaseNoise`].

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::constellation::{wrap_signed, PhaseAngle};
use crate::error::{domain, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};

/// Eve's (or Bob's) observed signal point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub theta: PhaseAngle,
    /// Raw in-phase / quadrature pair, for heterodyne measurements.
    pub iq: Option<(f64, f64)>,
}

impl Observation {
    pub fn phase(theta: PhaseAngle) -> Self {
        Observation { theta, iq: None }
    }
}

/// A circularly symmetric phase-noise kernel.
pub trait PhaseNoise: Send + Sync + fmt::Debug {
    /// Density of the offset `delta = theta - theta_in`, `delta` in `[-pi, pi)`.
    fn density(&self, delta: f64) -> f64;

    /// Draw an observation of a transmitted phase.
    fn sample(&self, theta_in: PhaseAngle, rng: &mut dyn RngCore) -> Observation;

    /// Offsets where the density is non-smooth or sharply peaked.
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0]
    }

    /// `P(offset in [lo, hi])` on the circle, `0 <= hi - lo <= 2pi`.
    fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        mass_by_quadrature(self, lo, hi)
    }

    /// Offsets beyond this carry no representable density.
    fn support_half_width(&self) -> f64 {
        PI
    }

    /// Whether the kernel is a point mass (noiseless measurement).
    fn is_point_mass(&self) -> bool {
        false
    }

    fn label(&self) -> String;
}

/// Built-in measurement models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// No measurement noise; the observed phase equals the sent phase.
    Noiseless,
    /// Uniform on `[theta_r - sigma, theta_r + sigma)`.
    Wedge { sigma: f64 },
    /// Wrapped Gaussian of standard deviation `sigma`.
    GaussianPhase { sigma: f64 },
    /// Heterodyne of a coherent state of mean photon number `photons`:
    /// quadratures `sqrt(S) (cos, sin) + N(0, 1/2)` each.
    ExactHeterodyne { photons: f64 },
}

/// Wedge half-width 1/sqrt(S).
pub fn wedge_sigma(photons: f64) -> f64 {
    1.0 / photons.sqrt()
}

impl NoiseModel {
    pub fn wedge(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= PI) {
            return domain(format!("wedge sigma must be in (0, pi], got {sigma}"));
        }
        Ok(NoiseModel::Wedge { sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= PI) {
            return domain(format!("gaussian sigma must be in (0, pi], got {sigma}"));
        }
        Ok(NoiseModel::GaussianPhase { sigma })
    }

    pub fn heterodyne(photons: f64) -> Result<Self> {
        if !(photons > 0.0 && photons.is_finite()) {
            return domain(format!("heterodyne S must be positive, got {photons}"));
        }
        Ok(NoiseModel::ExactHeterodyne { photons })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            NoiseModel::Noiseless => "noiseless",
            NoiseModel::Wedge { .. } => "wedge",
            NoiseModel::GaussianPhase { .. } => "gaussian",
            NoiseModel::ExactHeterodyne { .. } => "heterodyne",
        }
    }

    /// Large-S phase standard deviation of the model.
    pub fn phase_std(&self) -> f64 {
        match *self {
            NoiseModel::Noiseless => 0.0,
            NoiseModel::Wedge { sigma } => sigma / 3f64.sqrt(),
            NoiseModel::GaussianPhase { sigma } => sigma,
            NoiseModel::ExactHeterodyne { photons } => 1.0 / (2.0 * photons).sqrt(),
        }
    }
}

const WRAP_TURNS: i32 = 3;

fn std_normal_cdf_diff(a: f64, b: f64) -> f64 {
    // Phi(b) - Phi(a) without cancellation in either tail
    use statrs::function::erf::erfc;
    let q = |x: f64| 0.5 * erfc(x / std::f64::consts::SQRT_2);
    if a >= 0.0 {
        q(a) - q(b)
    } else if b <= 0.0 {
        q(-b) - q(-a)
    } else {
        1.0 - q(-a) - q(b)
    }
}

/// Measure of `[lo, hi]` that falls on `[a, b)` modulo 2pi.
pub(crate) fn circular_overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    let shift = ((lo - a) / TAU).floor();
    for k in -1..=3 {
        let off = (shift + k as f64) * TAU;
        let (s, e) = (a + off, b + off);
        let w = hi.min(e) - lo.max(s);
        if w > 0.0 {
            total += w;
        }
    }
    total
}

/// Whether some `2 pi k` lies in `[lo, hi)`.
fn contains_origin(lo: f64, hi: f64) -> bool {
    let k = (lo / TAU).ceil();
    k * TAU < hi
}

fn graded(scale: f64) -> Vec<f64> {
    [-12.0, -5.0, -2.0, 0.0, 2.0, 5.0, 12.0]
        .iter()
        .map(|k| k * scale)
        .filter(|x| x.abs() < PI)
        .collect()
}

/// Integrate the density of `noise` over `[lo, hi]`, splitting at the
/// kernel's breakpoints.
pub fn mass_by_quadrature<N: PhaseNoise + ?Sized>(noise: &N, lo: f64, hi: f64) -> f64 {
    let mut pts = vec![lo, hi];
    for b in noise.breakpoints() {
        let k0 = ((lo - b) / TAU).floor() as i64;
        for k in k0..=k0 + 2 {
            let p = b + k as f64 * TAU;
            if p > lo && p < hi {
                pts.push(p);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    let tol = Tolerance {
        absolute: 1e-12,
        max_segments: 20_000,
    };
    integrate_with_breaks(|t| noise.density(wrap_signed(t)), &pts, tol)
        .expect("kernel mass quadrature converges for bounded densities")
}

impl PhaseNoise for NoiseModel {
    fn density(&self, delta: f64) -> f64 {
        match *self {
            NoiseModel::Noiseless => {
                if delta.abs() < 1e-12 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            NoiseModel::Wedge { sigma } => {
                if (-sigma..sigma).contains(&delta) || (sigma >= PI) {
                    0.5 / sigma
                } else {
                    0.0
                }
            }
            NoiseModel::GaussianPhase { sigma } => {
                let norm = 1.0 / (sigma * TAU.sqrt());
                (-WRAP_TURNS..=WRAP_TURNS)
                    .map(|k| {
                        let z = (delta + k as f64 * TAU) / sigma;
                        norm * (-0.5 * z * z).exp()
                    })
                    .sum()
            }
            NoiseModel::ExactHeterodyne { photons } => heterodyne_phase_density(delta, photons),
        }
    }

    fn sample(&self, theta_in: PhaseAngle, rng: &mut dyn RngCore) -> Observation {
        match *self {
            NoiseModel::Noiseless => Observation::phase(theta_in),
            NoiseModel::Wedge { sigma } => {
                let u: f64 = rng.random();
                Observation::phase(theta_in.offset(sigma * (2.0 * u - 1.0)))
            }
            NoiseModel::GaussianPhase { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                Observation::phase(theta_in.offset(sigma * z))
            }
            NoiseModel::ExactHeterodyne { photons } => {
                let amp = photons.sqrt();
                let (zi, zq): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let i = amp * theta_in.radians().cos() + s * zi;
                let q = amp * theta_in.radians().sin() + s * zq;
                Observation {
                    theta: PhaseAngle::new(q.atan2(i)),
                    iq: Some((i, q)),
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            NoiseModel::Noiseless => vec![0.0],
            NoiseModel::Wedge { sigma } => vec![-sigma, sigma],
            NoiseModel::GaussianPhase { sigma } => graded(sigma),
            NoiseModel::ExactHeterodyne { photons } => graded(1.0 / (2.0 * photons).sqrt()),
        }
    }

    fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(hi >= lo && hi - lo <= TAU + 1e-9);
        match *self {
            NoiseModel::Noiseless => contains_origin(lo, hi) as u8 as f64,
            NoiseModel::Wedge { sigma } => {
                if sigma >= PI {
                    (hi - lo) / TAU
                } else {
                    circular_overlap(lo, hi, -sigma, sigma) / (2.0 * sigma)
                }
            }
            NoiseModel::GaussianPhase { sigma } => (-WRAP_TURNS..=WRAP_TURNS)
                .map(|k| {
                    let off = k as f64 * TAU;
                    std_normal_cdf_diff((lo + off) / sigma, (hi + off) / sigma)
                })
                .sum(),
            NoiseModel::ExactHeterodyne { .. } => {
                if hi - lo >= TAU {
                    1.0
                } else {
                    mass_by_quadrature(self, lo, hi)
                }
            }
        }
    }

    fn support_half_width(&self) -> f64 {
        match *self {
            NoiseModel::Noiseless => 0.0,
            NoiseModel::Wedge { sigma } => sigma,
            NoiseModel::GaussianPhase { sigma } => (39.0 * sigma).min(PI),
            NoiseModel::ExactHeterodyne { photons } => {
                // below this the e^{-S} floor is nonzero everywhere
                if photons < 800.0 {
                    return PI;
                }
                let t = (760.0 + 0.5 * photons.ln()) / photons;
                if t >= 1.0 {
                    PI
                } else {
                    t.sqrt().asin()
                }
            }
        }
    }

    fn is_point_mass(&self) -> bool {
        matches!(self, NoiseModel::Noiseless)
    }

    fn label(&self) -> String {
        match *self {
            NoiseModel::Noiseless => "noiseless".into(),
            NoiseModel::Wedge { sigma } => format!("wedge(sigma={sigma})"),
            NoiseModel::GaussianPhase { sigma } => format!("gaussian(sigma={sigma})"),
            NoiseModel::ExactHeterodyne { photons } => format!("heterodyne(S={photons})"),
        }
    }
}

/// Marginal phase density of a noncentral circular Gaussian: amplitude
/// sqrt(S), quadrature variance 1/2, so the noncentrality is `rho = S`.
///
/// `p(phi) = e^{-S} / 2pi + sqrt(S / pi) / 2 * cos(phi) * e^{-S sin^2 phi} * erfc(-sqrt(S) cos phi)`
pub fn heterodyne_phase_density(delta: f64, photons: f64) -> f64 {
    use statrs::function::erf::erfc;
    let c = delta.cos();
    let s = delta.sin();
    let r = photons.sqrt();
    (-photons).exp() / TAU + 0.5 * (photons / PI).sqrt() * c * (-photons * s * s).exp() * erfc(-r * c)
}

/// `sample_observation`: one measurement of the transmitted phase.
pub fn sample_observation(theta_in: PhaseAngle, model: &dyn PhaseNoise, rng: &mut dyn RngCore) -> Observation {
    model.sample(theta_in, rng)
}

/// `observation_density`: `p(theta | theta_in)`.
pub fn observation_density(theta: PhaseAngle, theta_in: PhaseAngle, model: &dyn PhaseNoise) -> f64 {
    model.density(theta.diff(theta_in))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::chi_square_gof;

    fn models() -> Vec<NoiseModel> {
        vec![
            NoiseModel::wedge(0.05).unwrap(),
            NoiseModel::wedge(1.3).unwrap(),
            NoiseModel::gaussian(0.01).unwrap(),
            NoiseModel::gaussian(1.5).unwrap(),
            NoiseModel::heterodyne(0.3).unwrap(),
            NoiseModel::heterodyne(100.0).unwrap(),
            NoiseModel::heterodyne(1.5e4).unwrap(),
        ]
    }

    #[test]
    fn wedge_sigma_examples() {
        assert!((wedge_sigma(1e4) - 0.01).abs() < 1e-15);
        assert!((wedge_sigma(1.5e4) - 8.165e-3).abs() < 1e-6);
    }

    #[test]
    fn densities_normalize() {
        for m in models() {
            let total = mass_by_quadrature(&m, -PI, PI);
            assert!((total - 1.0).abs() < 1e-6, "{m:?}: {total}");
            assert!((m.interval_mass(-PI, PI) - 1.0).abs() < 1e-9, "{m:?}");
        }
        assert_eq!(NoiseModel::Noiseless.interval_mass(-PI, PI), 1.0);
        assert_eq!(NoiseModel::Noiseless.interval_mass(0.1, 0.2), 0.0);
    }

    #[test]
    fn closed_form_masses_match_quadrature() {
        for m in models() {
            for (lo, hi) in [(-0.3, 0.02), (0.01, 2.0), (-5.0, -1.0), (2.5, 4.0), (-PI / 2.0, PI / 2.0)] {
                let a = m.interval_mass(lo, hi);
                let b = mass_by_quadrature(&m, lo, hi);
                assert!((a - b).abs() < 1e-9, "{m:?} [{lo}, {hi}]: {a} vs {b}");
            }
        }
    }

    #[test]
    fn density_vanishes_beyond_support() {
        for m in models() {
            let h = m.support_half_width();
            if h < PI {
                for f in [1.0001, 1.1, 2.0] {
                    if h * f < PI {
                        assert!(m.density(h * f) < 1e-300, "{m:?}");
                        assert!(m.density(-h * f) < 1e-300, "{m:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn wedge_density_support() {
        let w = NoiseModel::wedge(0.1).unwrap();
        let th = PhaseAngle::new(1.0);
        assert_eq!(observation_density(PhaseAngle::new(1.05), th, &w), 5.0);
        assert_eq!(observation_density(PhaseAngle::new(1.2), th, &w), 0.0);
    }

    #[test]
    fn densities_depend_only_on_difference() {
        for m in models() {
            for d in [-0.2, 0.0, 0.003, 1.0] {
                let a = observation_density(PhaseAngle::new(0.4 + d), PhaseAngle::new(0.4), &m);
                let b = observation_density(PhaseAngle::new(5.9 + d), PhaseAngle::new(5.9), &m);
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{m:?} {d}");
            }
        }
    }

    #[test]
    fn tiny_wedge_is_identity() {
        let w = NoiseModel::wedge(1e-15).unwrap();
        let mut rng = stream(1, &[]);
        let th = PhaseAngle::new(2.0);
        for _ in 0..100 {
            assert!(sample_observation(th, &w, &mut rng).theta.distance(th) <= 1e-15);
        }
    }

    #[test]
    fn gaussian_coverage() {
        let g = NoiseModel::gaussian(0.01).unwrap();
        let mut rng = stream(2, &[]);
        let th = PhaseAngle::new(0.0);
        let n = 100_000;
        let inside = (0..n)
            .filter(|_| sample_observation(th, &g, &mut rng).theta.distance(th) <= 0.02)
            .count();
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.9545).abs() < 0.004, "{frac}");
    }

    #[test]
    fn heterodyne_large_s_phase_std() {
        let s = 1e6;
        let h = NoiseModel::heterodyne(s).unwrap();
        let mut rng = stream(3, &[]);
        let th = PhaseAngle::new(1.0);
        let n = 100_000;
        let var: f64 = (0..n)
            .map(|_| sample_observation(th, &h, &mut rng).theta.diff(th).powi(2))
            .sum::<f64>()
            / n as f64;
        let target = 1.0 / (2.0 * s).sqrt();
        assert!((var.sqrt() / target - 1.0).abs() < 0.05);
    }

    #[test]
    fn heterodyne_iq_consistent_with_phase() {
        let h = NoiseModel::heterodyne(5.0).unwrap();
        let mut rng = stream(4, &[]);
        for _ in 0..100 {
            let o = sample_observation(PhaseAngle::new(2.5), &h, &mut rng);
            let (i, q) = o.iq.unwrap();
            assert!((PhaseAngle::new(q.atan2(i)).radians() - o.theta.radians()).abs() < 1e-15);
        }
    }

    #[test]
    fn sampler_matches_density_chi_square() {
        let bins = 64;
        for (idx, m) in models().into_iter().enumerate() {
            let mut rng = stream(10, &[idx as u64]);
            let th = PhaseAngle::new(0.7);
            // bins spanning +-6 phase std (or the circle) around the sent phase
            let half = (6.0 * m.phase_std()).min(PI);
            let width = 2.0 * half / bins as f64;
            let mut counts = vec![0u64; bins + 1];
            let n = 200_000;
            for _ in 0..n {
                let d = sample_observation(th, &m, &mut rng).theta.diff(th);
                let b = ((d + half) / width).floor();
                let b = if (0.0..bins as f64).contains(&b) { b as usize } else { bins };
                counts[b] += 1;
            }
            let mut probs: Vec<f64> = (0..bins)
                .map(|b| m.interval_mass(-half + b as f64 * width, -half + (b + 1) as f64 * width))
                .collect();
            let inside: f64 = probs.iter().sum();
            probs.push((1.0 - inside).max(0.0));
            let t = chi_square_gof(&counts, &probs);
            assert!(!t.significant(1e-3), "{m:?}: {t:?}");
        }
    }
}
