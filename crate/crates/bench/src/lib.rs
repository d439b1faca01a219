//! Shared fixtures for the benchmarks.

use y00_core::attacks::{intercept, running_key_posteriors, AttackScenario, SoftInfo};
use y00_core::channel::wedge_sigma;
use y00_core::endpoints::SessionConfig;
use y00_core::keystream::{EncSpec, LfsrSpec};
use y00_core::{ConstellationSpec, DsrPolicy, NoiseModel};

/// Eve's CTA soft information on `n` qumodes of a bare LFSR session under
/// the wedge model at the standard width.
pub fn wedge_soft(lfsr: &LfsrSpec, bases: u32, photons: f64, n: usize) -> SoftInfo {
    let spec = ConstellationSpec::new(bases, photons).expect("valid constellation");
    let eve = NoiseModel::wedge(wedge_sigma(photons)).expect("valid width");
    let cfg = SessionConfig::new(spec, EncSpec::Lfsr(lfsr.clone())).expect("valid session").with_seed(1);
    let icp = intercept(&cfg, &eve, n).expect("interception");
    running_key_posteriors(&icp.observations, &AttackScenario::Cta, &spec, &eve, DsrPolicy::Off).expect("posteriors")
}
