//! Eve's side: soft information about the running key and the seed-key
//! attacks built on it.
//!
//! Seed recovery is decoding: the seed is the information word, the running
//! key seen through Eve's measurement is the codeword on a memoryless
//! channel with alphabet 2M (ciphertext only) or M (known plaintext).

mod bank;
mod exhaustive;
mod fca;
mod soft;

pub use bank::{attack_parallel_bank, random_keystream_baseline, BankAttackReport, LaneStatistic};
pub use exhaustive::{exhaustive_likelihood_attack, score_seed, MAX_EXHAUSTIVE_STATES};
pub use fca::{disjoint_soft_parities, fca_bit_flip, find_parity_checks, soft_parities, ParityCheck};
pub use soft::{running_key_posteriors, SoftInfo, PROBABILITY_FLOOR};

use std::time::Duration;

use rand::{Rng, RngCore};

use crate::channel::{NoiseModel, PhaseNoise};
use crate::endpoints::{alice_encode, transmit, Frame, Observations, SessionConfig, Transmitter};
use crate::error::{config, Result};
use crate::gf2::BitVector;
use crate::rng::{label, stream};
use crate::constellation::BasisIndex;

/// What Eve knows besides her measurements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttackScenario {
    /// Ciphertext only.
    Cta,
    /// Known plaintext, one bit per observed qumode.
    Kpa(Vec<bool>),
}

impl AttackScenario {
    pub fn kind(&self) -> &'static str {
        match self {
            AttackScenario::Cta => "cta",
            AttackScenario::Kpa(_) => "kpa",
        }
    }
}

/// Eve's full-copy measurement of every transmitted qumode.
pub fn eve_observe(frame: &Frame, model: &dyn PhaseNoise, rng: &mut dyn RngCore) -> Observations {
    transmit(frame, model, rng)
}

/// Attack knobs shared by the attack family.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackParams {
    /// Qumodes used.
    pub qumodes: usize,
    /// Qumodes per independent attempt; candidate lists are merged.
    pub window: usize,
    pub max_candidates: usize,
    /// Iterative decoding rounds of the correlation attack.
    pub rounds: usize,
    /// Largest parity-check weight searched beyond the feedback polynomial.
    pub check_weight: usize,
    /// Degree bound on polynomial multiples.
    pub max_multiple_degree: usize,
    /// Cap on distinct parity-check polynomials.
    pub max_checks: usize,
    /// Cap on states scored by the exhaustive attack.
    pub max_states: u64,
    /// Hard cap on `qumodes`.
    pub max_qumodes: usize,
    /// Tie-breaking and perturbation seed.
    pub seed: u64,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            qumodes: 1500,
            window: 1500,
            max_candidates: 16,
            rounds: 20,
            check_weight: 3,
            max_multiple_degree: 1 << 16,
            max_checks: 64,
            max_states: MAX_EXHAUSTIVE_STATES,
            max_qumodes: 1_000_000,
            seed: 0,
        }
    }
}

impl AttackParams {
    pub fn with_qumodes(mut self, n: usize) -> Self {
        self.qumodes = n;
        self.window = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window > self.qumodes {
            return config(format!("window {} must be in 1..={}", self.window, self.qumodes));
        }
        if self.qumodes > self.max_qumodes {
            return config(format!("N = {} exceeds the cap {}", self.qumodes, self.max_qumodes));
        }
        if self.max_candidates == 0 {
            return config("max_candidates must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub seed: BitVector,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkCounters {
    pub states: u64,
    pub parity_checks: u64,
    pub rounds: u64,
}

impl WorkCounters {
    pub fn merge(self, o: WorkCounters) -> Self {
        WorkCounters {
            states: self.states + o.states,
            parity_checks: self.parity_checks + o.parity_checks,
            rounds: self.rounds.max(o.rounds),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AttackResult {
    /// Best first.
    pub candidates: Vec<Candidate>,
    pub work: WorkCounters,
    pub converged: bool,
    pub wall: Duration,
    pub params: AttackParams,
    /// Set by [`AttackResult::judge`].
    pub success: Option<bool>,
    /// 1-based rank of the true seed among the candidates.
    pub rank: Option<usize>,
}

impl AttackResult {
    pub(crate) fn new(candidates: Vec<Candidate>, work: WorkCounters, converged: bool, wall: Duration, params: AttackParams) -> Self {
        AttackResult {
            candidates,
            work,
            converged,
            wall,
            params,
            success: None,
            rank: None,
        }
    }

    /// Compare against the true seed.
    pub fn judge(&mut self, truth: &BitVector) -> bool {
        self.rank = self.candidates.iter().position(|c| &c.seed == truth).map(|r| r + 1);
        let ok = self.rank == Some(1);
        self.success = Some(ok);
        ok
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.candidates.first()
    }
}

/// Ground truth and Eve's view of one intercepted session.
#[derive(Clone, Debug)]
pub struct Interception {
    pub observations: Observations,
    pub data: Vec<bool>,
    pub bases: Vec<BasisIndex>,
}

impl Interception {
    pub fn scenario(&self, known_plaintext: bool) -> AttackScenario {
        if known_plaintext {
            AttackScenario::Kpa(self.data.clone())
        } else {
            AttackScenario::Cta
        }
    }
}

/// Run `n` qumodes of the session and hand Eve her copy measured with
/// `eve`. Data, DSR and Eve's noise draw from streams of `cfg.master_seed`.
pub fn intercept(cfg: &SessionConfig, eve: &NoiseModel, n: usize) -> Result<Interception> {
    let mut tx = Transmitter::new(cfg)?;
    let mut data_rng = stream(cfg.master_seed, &[label::DATA]);
    let mut dsr_rng = stream(cfg.master_seed, &[label::DSR]);
    let mut eve_rng = stream(cfg.master_seed, &[label::EVE_CHANNEL]);
    let data: Vec<bool> = (0..n).map(|_| data_rng.random()).collect();
    let mut bases = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    for &x in &data {
        let (k, p) = tx.encode_bit(x, &mut dsr_rng);
        bases.push(k);
        phases.push(p);
    }
    let frame = Frame { start: 0, phases };
    Ok(Interception {
        observations: eve_observe(&frame, eve, &mut eve_rng),
        data,
        bases,
    })
}

/// Like [`intercept`] but through the public encoder entry point, for
/// callers holding their own transmitter.
pub fn intercept_frame(tx: &mut Transmitter, bits: &[bool], eve: &NoiseModel, rng: &mut dyn RngCore) -> Observations {
    let frame = alice_encode(tx, bits, rng);
    eve_observe(&frame, eve, rng)
}

/// SplitMix-style mix for deterministic tie-breaks.
pub(crate) fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
