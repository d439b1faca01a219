//! Run configuration: a TOML document with `[session]`, optional `[eve]`,
//! `[experiment]` and `[output]` sections. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use y00_core::attacks::{AttackParams, AttackScenario};
use y00_core::channel::wedge_sigma;
use y00_core::endpoints::SessionConfig;
use y00_core::gf2::BitVector;
use y00_core::keystream::{key_from_hex, BankLane, EncSpec, KeyedMapperSpec, LfsrSpec, ParallelBankSpec, PolynomialTable};
use y00_core::rng::{derive_seed, label};
use y00_core::{ConstellationSpec, DsrPolicy, NoiseModel};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub session: SessionSection,
    /// Eve's measurement; defaults to the wedge at `sigma = 1/sqrt(S)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve: Option<ChannelSection>,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    pub bases: u32,
    pub photons: f64,
    pub master_seed: u64,
    pub enc: EncSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapper: Option<MapperSection>,
    #[serde(default)]
    pub dsr: DsrSection,
    /// Bob's measurement.
    #[serde(default)]
    pub channel: ChannelSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum EncSection {
    /// Missing `feedback` takes the first table entry of the degree; missing
    /// `seed` is drawn per trial from the master seed.
    #[serde(rename = "lfsr")]
    Lfsr {
        degree: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feedback: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<String>,
    },
    #[serde(rename = "lfsr_keyed_poly")]
    KeyedPoly {
        degree: usize,
        poly_key: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<PathBuf>,
    },
    /// One AES-256 subkey per lane; missing keys are derived from the master
    /// seed. `lfsr_lanes` replaces lanes by registers.
    #[serde(rename = "parallel_bank")]
    Bank {
        #[serde(default)]
        keys: Vec<String>,
        #[serde(default)]
        lfsr_lanes: Vec<LaneSection>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSection {
    pub lane: usize,
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    pub seed: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapperSection {
    pub aux_key: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsrSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wedges: Option<u32>,
}

impl Default for DsrSection {
    fn default() -> Self {
        DsrSection {
            kind: "off".into(),
            wedges: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// `heterodyne`, `wedge`, `gaussian` or `noiseless`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photons: Option<f64>,
    /// Wedge half-width `pi / (2W)` under discrete randomization.
    #[serde(default)]
    pub tiled: bool,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            kind: "heterodyne".into(),
            sigma: None,
            photons: None,
            tiled: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Experiment {
    Simulate {
        qumodes: u64,
        #[serde(default = "one")]
        trials: u32,
    },
    Attack {
        attack: AttackKind,
        #[serde(default = "cta")]
        scenario: String,
        /// Observation lengths; every trial is evaluated on prefixes of one
        /// interception.
        qumodes: Vec<usize>,
        #[serde(default = "one")]
        trials: u32,
        #[serde(default)]
        params: ParamsSection,
        /// Feedback polynomials tried against each lane of a bank.
        #[serde(default)]
        hypotheses: Vec<PolySection>,
    },
    Leakage {
        estimators: Vec<Estimator>,
        #[serde(default = "million")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bins: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sectors: Option<u32>,
        #[serde(default = "cta")]
        scenario: String,
        #[serde(default = "milli")]
        threshold: f64,
        #[serde(default = "grid")]
        grid: usize,
    },
    Scaling {
        gamma: f64,
        photons: Vec<f64>,
        qumodes: u64,
        #[serde(default = "discrete")]
        policy: String,
    },
}

fn one() -> u32 {
    1
}
fn cta() -> String {
    "cta".into()
}
fn million() -> usize {
    1_000_000
}
fn milli() -> f64 {
    1e-3
}
fn grid() -> usize {
    256
}
fn discrete() -> String {
    "discrete".into()
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::Attack { .. } => "attack",
            Experiment::Leakage { .. } => "leakage",
            Experiment::Scaling { .. } => "scaling",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Exhaustive,
    Fca,
    Bank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Uniform-input information rate from the transition densities.
    Exact,
    /// Joint-histogram Monte Carlo estimate.
    Joint,
    /// Rotation-covariant Monte Carlo estimate.
    Covariant,
    /// Key bits minus mean posterior entropy on an intercepted session.
    Posterior,
    /// Uniformity certificate of the output phase.
    Certificate,
    /// Largest spread of `p(theta | k')` across bases, by quadrature.
    Spread,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_weight: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_multiple_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_checks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_states: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_qumodes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolySection {
    pub degree: usize,
    pub feedback: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub name: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("."),
            name: "run".into(),
        }
    }
}

impl OutputSection {
    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(format!("{}.csv", self.name))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(format!("{}.manifest.toml", self.name))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Build everything the experiment needs once, so every error surfaces
    /// before work starts.
    pub fn validate(&self) -> CliResult<()> {
        let spec = self.spec()?;
        self.session_for_trial(0)?;
        self.eve_model(&spec)?;
        match &self.experiment {
            Experiment::Simulate { qumodes, trials } => {
                if *qumodes == 0 || *trials == 0 {
                    return Err(CliError::Validation("qumodes and trials must be positive".into()));
                }
            }
            Experiment::Attack {
                attack,
                scenario,
                qumodes,
                trials,
                hypotheses,
                ..
            } => {
                scenario_kind(scenario)?;
                if qumodes.is_empty() || qumodes.contains(&0) || *trials == 0 {
                    return Err(CliError::Validation("qumodes must be a non-empty list of positive lengths and trials positive".into()));
                }
                for &n in qumodes {
                    self.attack_params(n, 0)?.validate()?;
                }
                let bank = matches!(self.session.enc, EncSection::Bank { .. });
                match attack {
                    AttackKind::Bank if !bank => {
                        return Err(CliError::Validation("attack = \"bank\" needs enc.kind = \"parallel_bank\"".into()))
                    }
                    AttackKind::Exhaustive | AttackKind::Fca if bank => {
                        return Err(CliError::Validation("this attack needs a single-register ENC".into()))
                    }
                    _ => {}
                }
                for h in hypotheses {
                    BitVector::from_hex(h.degree, &h.feedback)?;
                }
            }
            Experiment::Leakage {
                estimators,
                samples,
                bins,
                sectors,
                scenario,
                ..
            } => {
                if estimators.is_empty() {
                    return Err(CliError::Validation("estimators must not be empty".into()));
                }
                let kpa = scenario_kind(scenario)?;
                let mc = estimators.iter().any(|e| matches!(e, Estimator::Joint | Estimator::Covariant));
                if kpa && mc {
                    return Err(CliError::Validation("Monte Carlo estimators are ciphertext-only".into()));
                }
                if mc && *samples < y00_core::analysis::MIN_SAMPLES {
                    return Err(CliError::Validation(format!("samples must be at least {}", y00_core::analysis::MIN_SAMPLES)));
                }
                let two_m = 2 * spec.bases();
                for (name, v) in [("bins", bins), ("sectors", sectors)] {
                    if let Some(v) = v {
                        if *v == 0 || v % two_m != 0 {
                            return Err(CliError::Validation(format!("{name} = {v} must be a positive multiple of 2M = {two_m}")));
                        }
                    }
                }
            }
            Experiment::Scaling { gamma, photons, qumodes, policy } => {
                if !(*gamma > 0.0) || photons.is_empty() || photons.iter().any(|s| !(*s > 0.0)) || *qumodes == 0 {
                    return Err(CliError::Validation("scaling needs gamma > 0, positive photon numbers and qumodes".into()));
                }
                DsrPolicy::from_kind(policy, None, &spec)?;
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> CliResult<ConstellationSpec> {
        Ok(ConstellationSpec::new(self.session.bases, self.session.photons)?)
    }

    pub fn policy(&self, spec: &ConstellationSpec) -> CliResult<DsrPolicy> {
        Ok(DsrPolicy::from_kind(&self.session.dsr.kind, self.session.dsr.wedges, spec)?)
    }

    /// Master seed of trial `trial`.
    pub fn trial_seed(&self, trial: u64) -> u64 {
        derive_seed(self.session.master_seed, &[label::TRIAL, trial])
    }

    /// Session of one trial, and the register whose seed is the attack's
    /// target when the ENC is a single LFSR.
    pub fn session_for_trial(&self, trial: u64) -> CliResult<(SessionConfig, Option<LfsrSpec>)> {
        let spec = self.spec()?;
        let master = self.session.master_seed;
        let trial_key = |degree: usize| -> CliResult<BitVector> {
            let mut rng = y00_core::rng::stream(master, &[label::KEYS, trial]);
            let mut v = BitVector::zeros(degree);
            loop {
                for i in 0..degree {
                    v.set(i, rng.random());
                }
                if !v.is_zero() {
                    return Ok(v);
                }
            }
        };
        let (enc, lfsr) = match &self.session.enc {
            EncSection::Lfsr { degree, feedback, seed } => {
                let fb = feedback_or_default(*degree, feedback.as_deref())?;
                let seed = match seed {
                    Some(s) => BitVector::from_hex(*degree, s)?,
                    None => trial_key(*degree)?,
                };
                let l = LfsrSpec::new(fb, seed)?;
                (EncSpec::Lfsr(l.clone()), Some(l))
            }
            EncSection::KeyedPoly { degree, poly_key, seed, table } => {
                let table = match table {
                    Some(p) => PolynomialTable::load(p)?,
                    None => PolynomialTable::builtin(),
                };
                let seed = match seed {
                    Some(s) => BitVector::from_hex(*degree, s)?,
                    None => trial_key(*degree)?,
                };
                let key = BitVector::from_hex(256, poly_key)?;
                let enc = EncSpec::keyed_poly(seed, &key, &table)?;
                let l = enc.lfsr().cloned();
                (enc, l)
            }
            EncSection::Bank { keys, lfsr_lanes } => {
                let width = spec.key_bits() as usize;
                let mut subkeys = Vec::with_capacity(width);
                for i in 0..width {
                    subkeys.push(match keys.get(i) {
                        Some(k) => key_from_hex(k)?,
                        None => derived_key(master, i as u64),
                    });
                }
                if keys.len() > width {
                    return Err(CliError::Validation(format!("{} bank keys for {width} lanes", keys.len())));
                }
                let mut bank = ParallelBankSpec::aes(&subkeys)?;
                for l in lfsr_lanes {
                    if l.lane >= width {
                        return Err(CliError::Validation(format!("lfsr lane {} outside 0..{width}", l.lane)));
                    }
                    let fb = feedback_or_default(l.degree, l.feedback.as_deref())?;
                    let lane = LfsrSpec::new(fb, BitVector::from_hex(l.degree, &l.seed)?)?;
                    bank = bank.with_lane(l.lane, BankLane::Lfsr(lane))?;
                }
                (EncSpec::ParallelBank(bank), None)
            }
        };
        let mut cfg = SessionConfig::new(spec, enc)?
            .with_policy(self.policy(&spec)?)
            .with_model(channel_model(&self.session.channel, &spec, self.policy(&spec)?)?)
            .with_seed(self.trial_seed(trial));
        if let Some(m) = &self.session.mapper {
            cfg = cfg.with_mapper(KeyedMapperSpec {
                aux_key: key_from_hex(&m.aux_key)?,
            });
        }
        Ok((cfg, lfsr))
    }

    pub fn eve_model(&self, spec: &ConstellationSpec) -> CliResult<NoiseModel> {
        let policy = self.policy(spec)?;
        match &self.eve {
            Some(c) => channel_model(c, spec, policy),
            None => Ok(NoiseModel::wedge(wedge_sigma(spec.photons()))?),
        }
    }

    /// Attack parameters for length `n` and tie-breaking seed `seed`.
    pub fn attack_params(&self, n: usize, seed: u64) -> CliResult<AttackParams> {
        let Experiment::Attack { params: p, .. } = &self.experiment else {
            return Err(CliError::Validation("not an attack experiment".into()));
        };
        let d = AttackParams::default().with_qumodes(n);
        Ok(AttackParams {
            qumodes: n,
            window: p.window.map_or(n, |w| w.min(n)),
            max_candidates: p.max_candidates.unwrap_or(d.max_candidates),
            rounds: p.rounds.unwrap_or(d.rounds),
            check_weight: p.check_weight.unwrap_or(d.check_weight),
            max_multiple_degree: p.max_multiple_degree.unwrap_or(d.max_multiple_degree),
            max_checks: p.max_checks.unwrap_or(d.max_checks),
            max_states: p.max_states.unwrap_or(d.max_states),
            max_qumodes: p.max_qumodes.unwrap_or(d.max_qumodes),
            seed,
        })
    }
}

/// `true` for known plaintext.
pub fn scenario_kind(s: &str) -> CliResult<bool> {
    match s {
        "cta" => Ok(false),
        "kpa" => Ok(true),
        other => Err(CliError::Validation(format!("unknown scenario `{other}`, expected cta or kpa"))),
    }
}

pub fn scenario_of(kpa: bool) -> AttackScenario {
    if kpa {
        AttackScenario::Kpa(Vec::new())
    } else {
        AttackScenario::Cta
    }
}

fn derived_key(master: u64, lane: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&derive_seed(master, &[label::KEYS, 1 << 32 | lane, i as u64]).to_be_bytes());
    }
    key
}

fn feedback_or_default(degree: usize, feedback: Option<&str>) -> CliResult<BitVector> {
    match feedback {
        Some(f) => Ok(BitVector::from_hex(degree, f)?),
        None => PolynomialTable::builtin()
            .entries(degree)
            .first()
            .cloned()
            .ok_or_else(|| CliError::Validation(format!("no table polynomial of degree {degree}; give feedback explicitly"))),
    }
}

pub fn channel_model(c: &ChannelSection, spec: &ConstellationSpec, policy: DsrPolicy) -> CliResult<NoiseModel> {
    let s = spec.photons();
    let sigma = || -> CliResult<f64> {
        if c.tiled {
            return match policy {
                DsrPolicy::DiscreteWedges(w) => Ok(PI / (2.0 * w as f64)),
                _ => Err(CliError::Validation("tiled = true needs discrete randomization".into())),
            };
        }
        Ok(c.sigma.unwrap_or_else(|| wedge_sigma(s)))
    };
    let m = match c.kind.as_str() {
        "heterodyne" => NoiseModel::heterodyne(c.photons.unwrap_or(s))?,
        "wedge" => NoiseModel::wedge(sigma()?)?,
        "gaussian" => NoiseModel::gaussian(sigma()?)?,
        "noiseless" => NoiseModel::Noiseless,
        other => return Err(CliError::Validation(format!("unknown channel kind `{other}`"))),
    };
    Ok(m)
}
