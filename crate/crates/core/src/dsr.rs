//! Deliberate signal randomization: the transmitter spreads `theta_s` over
//! the half-circle centred on it before the state leaves Alice.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, RngCore};

use crate::channel::{mass_by_quadrature, wedge_sigma, PhaseNoise};
use crate::constellation::{signal_phase, BasisIndex, ConstellationSpec, PhaseAngle};
use crate::error::{domain, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsrPolicy {
    Off,
    /// Uniform on `[theta_s - pi/2, theta_s + pi/2)`.
    ContinuousHalfCircle,
    /// `W` equiprobable mid-wedge positions spaced `pi / W` over the same
    /// half-circle.
    DiscreteWedges(u32),
}

impl DsrPolicy {
    pub fn discrete(wedges: u32) -> Result<Self> {
        if wedges == 0 {
            return domain("wedge count must be positive");
        }
        Ok(DsrPolicy::DiscreteWedges(wedges))
    }

    /// The config name: `off`, `continuous` or `discrete`.
    pub fn kind(&self) -> &'static str {
        match self {
            DsrPolicy::Off => "off",
            DsrPolicy::ContinuousHalfCircle => "continuous",
            DsrPolicy::DiscreteWedges(_) => "discrete",
        }
    }

    /// Build from config fields; a discrete policy without an explicit count
    /// uses [`wedge_count`].
    pub fn from_kind(kind: &str, wedges: Option<u32>, spec: &ConstellationSpec) -> Result<Self> {
        match kind {
            "off" => Ok(DsrPolicy::Off),
            "continuous" => Ok(DsrPolicy::ContinuousHalfCircle),
            "discrete" => DsrPolicy::discrete(wedges.unwrap_or_else(|| wedge_count(spec).0)),
            other => crate::error::config(format!("unknown dsr kind `{other}`")),
        }
    }

    /// Offset of discrete position `j` from `theta_s`.
    pub fn wedge_offset(wedges: u32, j: u32) -> f64 {
        -FRAC_PI_2 + (j as f64 + 0.5) * PI / wedges as f64
    }
}

/// Randomize a signal phase according to `policy`.
pub fn randomize_phase(theta_s: PhaseAngle, policy: DsrPolicy, rng: &mut dyn RngCore) -> PhaseAngle {
    match policy {
        DsrPolicy::Off => theta_s,
        DsrPolicy::ContinuousHalfCircle => {
            let u: f64 = rng.random();
            theta_s.offset(PI * u - FRAC_PI_2)
        }
        DsrPolicy::DiscreteWedges(w) => {
            let j = rng.random_range(0..w);
            theta_s.offset(DsrPolicy::wedge_offset(w, j))
        }
    }
}

/// `W = round(pi / (2 sigma))` for the wedge half-width at the session's
/// signal level, and whether the ratio was integral to 1e-9.
pub fn wedge_count(spec: &ConstellationSpec) -> (u32, bool) {
    wedge_count_for_sigma(wedge_sigma(spec.photons()))
}

pub fn wedge_count_for_sigma(sigma: f64) -> (u32, bool) {
    let ratio = PI / (2.0 * sigma);
    let w = ratio.round().max(1.0);
    (w as u32, (ratio - w).abs() <= 1e-9)
}

/// How a density is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DensityMethod {
    /// Closed forms where the kernel has them.
    #[default]
    Auto,
    /// Numerical quadrature of the kernel throughout.
    Quadrature,
}

/// `p(theta | x, k')`: the randomization density convolved with the
/// measurement kernel.
pub fn conditional_output_density(
    theta: PhaseAngle,
    x: bool,
    k: BasisIndex,
    policy: DsrPolicy,
    model: &dyn PhaseNoise,
    spec: &ConstellationSpec,
) -> Result<f64> {
    conditional_output_density_with(theta, x, k, policy, model, spec, DensityMethod::Auto)
}

pub fn conditional_output_density_with(
    theta: PhaseAngle,
    x: bool,
    k: BasisIndex,
    policy: DsrPolicy,
    model: &dyn PhaseNoise,
    spec: &ConstellationSpec,
    method: DensityMethod,
) -> Result<f64> {
    let theta_s = signal_phase(x, k, spec)?;
    let delta = theta.diff(theta_s);
    Ok(density_at_offset(delta, policy, model, method))
}

/// Output density as a function of `theta - theta_s` alone.
pub fn density_at_offset(delta: f64, policy: DsrPolicy, model: &dyn PhaseNoise, method: DensityMethod) -> f64 {
    match policy {
        DsrPolicy::Off => model.density(delta),
        DsrPolicy::DiscreteWedges(w) => {
            let sum: f64 = (0..w)
                .map(|j| model.density(crate::constellation::wrap_signed(delta - DsrPolicy::wedge_offset(w, j))))
                .sum();
            sum / w as f64
        }
        DsrPolicy::ContinuousHalfCircle => {
            // theta_r = theta_s + u, u in [-pi/2, pi/2); the kernel offset
            // theta - theta_r then ranges over (delta - pi/2, delta + pi/2]
            let (lo, hi) = (delta - FRAC_PI_2, delta + FRAC_PI_2);
            let mass = if model.is_point_mass() {
                // u = delta must land in [-pi/2, pi/2)
                ((-FRAC_PI_2..FRAC_PI_2).contains(&delta)) as u8 as f64
            } else {
                match method {
                    DensityMethod::Auto => model.interval_mass(lo, hi),
                    DensityMethod::Quadrature => mass_by_quadrature(model, lo, hi),
                }
            };
            mass / PI
        }
    }
}

/// `p(theta | k')` for uniform data: `(p(theta|0,k') + p(theta|1,k')) / 2`.
pub fn marginal_output_density(
    theta: PhaseAngle,
    k: BasisIndex,
    policy: DsrPolicy,
    model: &dyn PhaseNoise,
    spec: &ConstellationSpec,
) -> Result<f64> {
    marginal_output_density_with(theta, k, policy, model, spec, DensityMethod::Auto)
}

pub fn marginal_output_density_with(
    theta: PhaseAngle,
    k: BasisIndex,
    policy: DsrPolicy,
    model: &dyn PhaseNoise,
    spec: &ConstellationSpec,
    method: DensityMethod,
) -> Result<f64> {
    let a = conditional_output_density_with(theta, false, k, policy, model, spec, method)?;
    let b = conditional_output_density_with(theta, true, k, policy, model, spec, method)?;
    Ok(0.5 * (a + b))
}

/// Probability that the output lands in `[theta_s + lo, theta_s + hi]`.
pub fn output_mass_at_offset(lo: f64, hi: f64, policy: DsrPolicy, model: &dyn PhaseNoise) -> f64 {
    match policy {
        DsrPolicy::Off => model.interval_mass(lo, hi),
        DsrPolicy::DiscreteWedges(w) => {
            (0..w)
                .map(|j| {
                    let c = DsrPolicy::wedge_offset(w, j);
                    model.interval_mass(lo - c, hi - c)
                })
                .sum::<f64>()
                / w as f64
        }
        DsrPolicy::ContinuousHalfCircle => {
            let f = |d: f64| density_at_offset(d, policy, model, DensityMethod::Auto);
            let tol = crate::quadrature::Tolerance {
                absolute: 1e-11,
                max_segments: 20_000,
            };
            let mut pts = vec![lo, hi];
            for b in [-FRAC_PI_2, FRAC_PI_2] {
                for k in -2..=2 {
                    let p = b + k as f64 * std::f64::consts::TAU;
                    if p > lo && p < hi {
                        pts.push(p);
                    }
                }
            }
            pts.sort_by(f64::total_cmp);
            if model.is_point_mass() {
                // piecewise constant 1/pi on the half circle
                let overlap = crate::channel::circular_overlap(lo, hi, -FRAC_PI_2, FRAC_PI_2);
                return overlap / PI;
            }
            crate::quadrature::integrate_with_breaks(f, &pts, tol).expect("bounded output density integrates")
        }
    }
}
