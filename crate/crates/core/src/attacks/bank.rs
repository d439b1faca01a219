//! Correlation statistics against the parallel bank, lane by lane.

use std::time::Instant;

use rand::Rng;

use crate::attacks::fca::disjoint_soft_parities;
use crate::attacks::{find_parity_checks, running_key_posteriors, AttackParams, AttackScenario, SoftInfo};
use crate::channel::{sample_observation, PhaseNoise};
use crate::constellation::{signal_phase_unchecked, BasisIndex, ConstellationSpec};
use crate::dsr::{randomize_phase, DsrPolicy};
use crate::endpoints::Observations;
use crate::error::Result;
use crate::gf2::BitVector;
use crate::keystream::{AesCtr, BankLane, ParallelBankSpec};
use crate::rng::{label, stream};
use crate::stats::{ks_two_sample, TestOutcome};

/// Keys tried by the token search on lane 0.
const TOKEN_KEYS: u64 = 256;

#[derive(Clone, Debug)]
pub struct LaneStatistic {
    pub lane: usize,
    /// Lane transmitted by a linear generator (positive control).
    pub linear: bool,
    pub samples: usize,
    pub mean: f64,
    pub baseline_mean: f64,
    pub ks: TestOutcome,
}

#[derive(Clone, Debug)]
pub struct BankAttackReport {
    pub lanes: Vec<LaneStatistic>,
    /// Feedback hypotheses whose checks were evaluated.
    pub hypotheses: usize,
    pub parity_checks: u64,
    /// Keys tried by the token search and the best log-likelihood found.
    pub token_states: u64,
    pub token_best: Option<f64>,
    pub wall: std::time::Duration,
}

impl BankAttackReport {
    /// KS p-values of the block-cipher lanes and of the linear lanes.
    pub fn p_values(&self) -> (Vec<f64>, Vec<f64>) {
        let mut cipher = Vec::new();
        let mut linear = Vec::new();
        for l in &self.lanes {
            if l.linear {
                linear.push(l.ks.p_value);
            } else {
                cipher.push(l.ks.p_value);
            }
        }
        (cipher, linear)
    }
}

/// Soft information for a session whose running key is replaced by
/// independent uniform segments, seen through the same channel.
pub fn random_keystream_baseline(
    spec: &ConstellationSpec,
    eve: &dyn PhaseNoise,
    policy: DsrPolicy,
    known_plaintext: bool,
    n: usize,
    seed: u64,
) -> Result<SoftInfo> {
    let mut rng = stream(seed, &[label::BASELINE]);
    let data: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let points = data
        .iter()
        .map(|&x| {
            let k = BasisIndex(rng.random_range(0..spec.bases()));
            let r = randomize_phase(signal_phase_unchecked(x, k, spec), policy, &mut rng);
            sample_observation(r, eve, &mut rng)
        })
        .collect();
    let obs = Observations { start: 0, points };
    let scenario = if known_plaintext {
        AttackScenario::Kpa(data)
    } else {
        AttackScenario::Cta
    };
    running_key_posteriors(&obs, &scenario, spec, eve, policy)
}

fn lane_llrs(llrs: &[f64], m: usize, lane: usize) -> Vec<f64> {
    llrs.iter().skip(lane).step_by(m).copied().collect()
}

/// Evaluate, for every lane, the soft parity values of bit-disjoint
/// placements of the checks derived from each hypothesised feedback
/// polynomial, and compare their distribution with the same statistic on
/// `baseline`.
///
/// No key search is attempted beyond a token scan of lane 0.
pub fn attack_parallel_bank(
    soft: &SoftInfo,
    baseline: &SoftInfo,
    bank: &ParallelBankSpec,
    hypotheses: &[BitVector],
    params: &AttackParams,
) -> Result<BankAttackReport> {
    let t0 = Instant::now();
    let m = soft.key_bits() as usize;
    if soft.is_empty() {
        return Ok(BankAttackReport {
            lanes: Vec::new(),
            hypotheses: hypotheses.len(),
            parity_checks: 0,
            token_states: 0,
            token_best: None,
            wall: t0.elapsed(),
        });
    }
    let n = params.qumodes.min(soft.len()).min(baseline.len());
    let llrs = soft.window(0..n).bit_llrs();
    let base = baseline.window(0..n).bit_llrs();
    let mut checks = Vec::new();
    for h in hypotheses {
        if let Ok((c, _)) = find_parity_checks(h, n, params) {
            checks.extend(c);
        }
    }
    let mut lanes = Vec::with_capacity(m);
    let mut evaluated = 0u64;
    for (lane, spec) in bank.lanes().iter().enumerate().take(m) {
        let a = disjoint_soft_parities(&lane_llrs(&llrs, m, lane), &checks);
        let b = disjoint_soft_parities(&lane_llrs(&base, m, lane), &checks);
        evaluated += (a.len() + b.len()) as u64;
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        lanes.push(LaneStatistic {
            lane,
            linear: matches!(spec, BankLane::Lfsr(_)),
            samples: a.len(),
            mean: mean(&a),
            baseline_mean: mean(&b),
            ks: ks_two_sample(&a, &b),
        });
    }

    let (token_states, token_best) = match bank.lanes().first() {
        Some(BankLane::Aes256Ctr { .. }) => {
            let lane0 = lane_llrs(&llrs, m, 0);
            let tried = TOKEN_KEYS.min(params.max_states);
            let best = (0..tried)
                .map(|i| {
                    let mut key = [0u8; 32];
                    key[24..].copy_from_slice(&i.to_be_bytes());
                    let mut g = AesCtr::new(key);
                    lane0
                        .iter()
                        .enumerate()
                        .map(|(c, &l)| log_prob(l, g.bit_at(soft.start() + c as u64)))
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (tried, Some(best))
        }
        _ => (0, None),
    };

    Ok(BankAttackReport {
        lanes,
        hypotheses: hypotheses.len(),
        parity_checks: evaluated,
        token_states,
        token_best,
        wall: t0.elapsed(),
    })
}

/// `ln P(bit)` from an LLR `ln P(0)/P(1)`.
fn log_prob(llr: f64, bit: bool) -> f64 {
    let l = if bit { -llr } else { llr };
    // ln sigmoid(l)
    if l > 0.0 {
        -(-l).exp().ln_1p()
    } else {
        l - l.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_observations_give_empty_report() {
        let soft = SoftInfo::from_likelihoods(4, 0, &[]).unwrap();
        let bank = ParallelBankSpec::aes(&[[1; 32], [2; 32]]).unwrap();
        let r = attack_parallel_bank(&soft, &soft, &bank, &[], &AttackParams::default()).unwrap();
        assert!(r.lanes.is_empty());
        assert_eq!(r.token_states, 0);
    }

    #[test]
    fn log_prob_is_a_log_sigmoid() {
        assert!((log_prob(0.0, true) - 0.5f64.ln()).abs() < 1e-15);
        let p0 = 0.8f64;
        let l = (p0 / (1.0 - p0)).ln();
        assert!((log_prob(l, false) - p0.ln()).abs() < 1e-12);
        assert!((log_prob(l, true) - (1.0 - p0).ln()).abs() < 1e-12);
        assert!(log_prob(800.0, true).is_finite());
    }
}
