//! Alice's encryptor, Bob's keyed decryptor and bit-error-rate measurement.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, RngCore};

use crate::channel::{sample_observation, NoiseModel, Observation, PhaseNoise};
use crate::constellation::{signal_phase_unchecked, BasisIndex, ConstellationSpec, PhaseAngle};
use crate::dsr::{randomize_phase, DsrPolicy};
use crate::error::{Error, Result};
use crate::keystream::{EncSpec, KeyedMapperSpec, RunningKey};
use crate::rng::{label, stream};

/// Everything Alice and Bob share, plus Bob's measurement channel.
#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub spec: ConstellationSpec,
    pub enc: EncSpec,
    pub mapper: Option<KeyedMapperSpec>,
    pub policy: DsrPolicy,
    /// Bob's channel; heterodyne at the session's signal level by default.
    pub model: NoiseModel,
    pub master_seed: u64,
}

impl SessionConfig {
    pub fn new(spec: ConstellationSpec, enc: EncSpec) -> Result<Self> {
        enc.check(&spec)?;
        Ok(SessionConfig {
            model: NoiseModel::ExactHeterodyne { photons: spec.photons() },
            spec,
            enc,
            mapper: None,
            policy: DsrPolicy::Off,
            master_seed: 0,
        })
    }

    pub fn with_policy(mut self, policy: DsrPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_model(mut self, model: NoiseModel) -> Self {
        self.model = model;
        self
    }

    pub fn with_mapper(mut self, mapper: KeyedMapperSpec) -> Self {
        self.mapper = Some(mapper);
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn running_key(&self) -> Result<RunningKey> {
        RunningKey::new(&self.enc, self.mapper.as_ref(), &self.spec)
    }
}

/// A transmitted block of qumodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// Qumode counter of the first entry.
    pub start: u64,
    pub phases: Vec<PhaseAngle>,
}

/// A measured block of qumodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    pub start: u64,
    pub points: Vec<Observation>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Send every phase of a frame through a measurement channel.
pub fn transmit(frame: &Frame, model: &dyn PhaseNoise, rng: &mut dyn RngCore) -> Observations {
    Observations {
        start: frame.start,
        points: frame.phases.iter().map(|&p| sample_observation(p, model, rng)).collect(),
    }
}

/// Alice: running key, mapper and DSR.
pub struct Transmitter {
    spec: ConstellationSpec,
    policy: DsrPolicy,
    key: RunningKey,
}

impl Transmitter {
    pub fn new(cfg: &SessionConfig) -> Result<Self> {
        Ok(Self::with_key(cfg, cfg.running_key()?))
    }

    /// Use an explicit running-key source.
    pub fn with_key(cfg: &SessionConfig, key: RunningKey) -> Self {
        Transmitter {
            spec: cfg.spec,
            policy: cfg.policy,
            key,
        }
    }

    pub fn position(&self) -> u64 {
        self.key.position()
    }

    pub fn running_key(&self) -> &RunningKey {
        &self.key
    }

    /// Encode one bit, returning the basis used and the sent phase.
    pub fn encode_bit(&mut self, x: bool, rng: &mut dyn RngCore) -> (BasisIndex, PhaseAngle) {
        let k = self.key.next_basis();
        let theta_s = signal_phase_unchecked(x, k, &self.spec);
        (k, randomize_phase(theta_s, self.policy, rng))
    }
}

/// Encode `bits`; the DSR draws come from `rng`.
pub fn alice_encode(tx: &mut Transmitter, bits: &[bool], rng: &mut dyn RngCore) -> Frame {
    let start = tx.position();
    let phases = bits.iter().map(|&x| tx.encode_bit(x, rng).1).collect();
    Frame { start, phases }
}

/// Bob: a synchronized copy of the running key.
pub struct Receiver {
    spec: ConstellationSpec,
    key: RunningKey,
}

impl Receiver {
    pub fn new(cfg: &SessionConfig) -> Result<Self> {
        Ok(Self::with_key(cfg, cfg.running_key()?))
    }

    pub fn with_key(cfg: &SessionConfig, key: RunningKey) -> Self {
        Receiver { spec: cfg.spec, key }
    }

    pub fn position(&self) -> u64 {
        self.key.position()
    }

    pub fn running_key(&self) -> &RunningKey {
        &self.key
    }

    /// Half-circle rule for one qumode. A distance of exactly pi/2 decodes
    /// as 0.
    pub fn decode_one(&mut self, theta: PhaseAngle) -> bool {
        let k = self.key.next_basis();
        decide(theta, k, &self.spec)
    }
}

/// The bit whose signal point is circularly nearer to `theta`.
pub fn decide(theta: PhaseAngle, k: BasisIndex, spec: &ConstellationSpec) -> bool {
    theta.distance(signal_phase_unchecked(false, k, spec)) > FRAC_PI_2
}

pub fn bob_decode(rx: &mut Receiver, obs: &Observations) -> Result<Vec<bool>> {
    if obs.start != rx.position() {
        return Err(Error::Sync {
            expected: rx.position(),
            found: obs.start,
        });
    }
    Ok(obs.points.iter().map(|o| rx.decode_one(o.theta)).collect())
}

/// One qumode of a logged frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QumodeRecord {
    pub x: bool,
    pub basis: BasisIndex,
    pub sent: PhaseAngle,
    pub observed: PhaseAngle,
    pub decoded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    pub n: u64,
    pub errors: u64,
    pub ber: f64,
    pub log: Option<Vec<QumodeRecord>>,
}

impl FrameResult {
    fn new(n: u64, errors: u64, log: Option<Vec<QumodeRecord>>) -> Self {
        FrameResult {
            n,
            errors,
            ber: if n == 0 { 0.0 } else { errors as f64 / n as f64 },
            log,
        }
    }
}

/// Separate random streams for data, DSR and Bob's channel, so that two
/// sessions differing only in S or policy share their data bits.
pub struct SessionStreams {
    pub data: crate::rng::SimRng,
    pub dsr: crate::rng::SimRng,
    pub channel: crate::rng::SimRng,
}

impl SessionStreams {
    pub fn from_seed(master: u64) -> Self {
        SessionStreams {
            data: stream(master, &[label::DATA]),
            dsr: stream(master, &[label::DSR]),
            channel: stream(master, &[label::BOB_CHANNEL]),
        }
    }
}

/// Transmit `n` uniform bits from Alice to Bob and count errors, drawing all
/// randomness from `rng`.
pub fn measure_ber(cfg: &SessionConfig, n: u64, rng: &mut dyn RngCore) -> Result<FrameResult> {
    let mut tx = Transmitter::new(cfg)?;
    let mut rx = Receiver::new(cfg)?;
    let mut errors = 0;
    for _ in 0..n {
        let x: bool = rng.random();
        let (_, sent) = tx.encode_bit(x, rng);
        let obs = sample_observation(sent, &cfg.model, rng);
        errors += (rx.decode_one(obs.theta) != x) as u64;
    }
    Ok(FrameResult::new(n, errors, None))
}

/// [`measure_ber`] over the session's own seeded streams, optionally keeping
/// a per-qumode log.
pub fn measure_ber_seeded(cfg: &SessionConfig, n: u64, keep_log: bool) -> Result<FrameResult> {
    let mut s = SessionStreams::from_seed(cfg.master_seed);
    let mut tx = Transmitter::new(cfg)?;
    let mut rx = Receiver::new(cfg)?;
    let mut log = keep_log.then(Vec::new);
    let mut errors = 0;
    for _ in 0..n {
        let x: bool = s.data.random();
        let (basis, sent) = tx.encode_bit(x, &mut s.dsr);
        let obs = sample_observation(sent, &cfg.model, &mut s.channel);
        let decoded = rx.decode_one(obs.theta);
        errors += (decoded != x) as u64;
        if let Some(l) = &mut log {
            l.push(QumodeRecord {
                x,
                basis,
                sent,
                observed: obs.theta,
                decoded,
            });
        }
    }
    Ok(FrameResult::new(n, errors, log))
}
