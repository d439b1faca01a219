//! ENC-box variants that expand a seed key into the running key, plus the
//! keyed mapper and keyed connection polynomial.

mod bank;
mod lfsr;
mod poly;

pub use bank::{check_bank_width, key_from_hex, parallel_bank_segment, AesCtr, BankLane, ParallelBank, ParallelBankSpec};
pub use lfsr::{lfsr_step, word_linear_forms, LinearForms, Lfsr, LfsrSpec};
pub use poly::{maximal_period, sample_connection_polynomial, PolynomialTable};

use crate::constellation::{BasisIndex, ConstellationSpec};
use crate::error::Result;
use crate::gf2::BitVector;

/// A deterministic running-key source.
pub trait KeystreamGenerator: Send {
    fn next_bit(&mut self) -> bool;

    /// Next `m` bits packed most-significant-first.
    fn next_segment(&mut self, m: u32) -> u32 {
        (0..m).fold(0, |k, _| k << 1 | self.next_bit() as u32)
    }

    /// Rewind to the state right after construction.
    fn reset(&mut self);

    fn bits_emitted(&self) -> u64;

    fn descriptor(&self) -> String;
}

/// Draw the next basis index, consuming exactly `m` keystream bits.
pub fn running_key_segment(gen: &mut dyn KeystreamGenerator, m: u32) -> BasisIndex {
    BasisIndex(gen.next_segment(m))
}

/// Keyed mapper: the auxiliary segment shifts the basis index modulo M.
pub fn keyed_mapper_apply(k: BasisIndex, aux_segment: BasisIndex, bases: u32) -> BasisIndex {
    debug_assert!(k.0 < bases && aux_segment.0 < bases);
    BasisIndex((k.0 + aux_segment.0) % bases)
}

/// Buildable description of an ENC box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EncSpec {
    Lfsr(LfsrSpec),
    /// An LFSR whose feedback was drawn from a polynomial table by a key.
    KeyedPolyLfsr { lfsr: LfsrSpec, table_entry: usize },
    ParallelBank(ParallelBankSpec),
}

impl EncSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            EncSpec::Lfsr(_) => "lfsr",
            EncSpec::KeyedPolyLfsr { .. } => "lfsr_keyed_poly",
            EncSpec::ParallelBank(_) => "parallel_bank",
        }
    }

    /// The underlying register, for the LFSR-based variants.
    pub fn lfsr(&self) -> Option<&LfsrSpec> {
        match self {
            EncSpec::Lfsr(l) | EncSpec::KeyedPolyLfsr { lfsr: l, .. } => Some(l),
            EncSpec::ParallelBank(_) => None,
        }
    }

    pub fn build(&self) -> Box<dyn KeystreamGenerator> {
        match self {
            EncSpec::Lfsr(l) | EncSpec::KeyedPolyLfsr { lfsr: l, .. } => Box::new(Lfsr::new(l.clone())),
            EncSpec::ParallelBank(b) => Box::new(ParallelBank::new(b.clone())),
        }
    }

    pub fn check(&self, spec: &ConstellationSpec) -> Result<()> {
        match self {
            EncSpec::ParallelBank(b) => check_bank_width(b, spec.key_bits()),
            _ => Ok(()),
        }
    }

    /// Build a keyed-polynomial LFSR from a seed, a polynomial key and a table.
    pub fn keyed_poly(seed: BitVector, poly_key: &BitVector, table: &PolynomialTable) -> Result<Self> {
        let degree = seed.len();
        let (entry, feedback) = sample_connection_polynomial(poly_key, degree, table)?;
        Ok(EncSpec::KeyedPolyLfsr {
            lfsr: LfsrSpec::new(feedback.clone(), seed)?,
            table_entry: entry,
        })
    }
}

/// Keyed mapper configuration: the auxiliary cipher ENC_m and its key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyedMapperSpec {
    pub aux_key: [u8; 32],
}

impl KeyedMapperSpec {
    pub fn build(&self) -> Box<dyn KeystreamGenerator> {
        Box::new(AesCtr::new(self.aux_key))
    }
}

/// Per-qumode basis source: ENC, optionally composed with the keyed mapper.
/// The auxiliary cipher is clocked in lockstep, m bits per qumode.
pub struct RunningKey {
    main: Box<dyn KeystreamGenerator>,
    aux: Option<Box<dyn KeystreamGenerator>>,
    bits: u32,
    bases: u32,
    qumodes: u64,
}

impl RunningKey {
    pub fn new(
        enc: &EncSpec,
        mapper: Option<&KeyedMapperSpec>,
        spec: &ConstellationSpec,
    ) -> Result<Self> {
        enc.check(spec)?;
        Ok(RunningKey {
            main: enc.build(),
            aux: mapper.map(|m| m.build()),
            bits: spec.key_bits(),
            bases: spec.bases(),
            qumodes: 0,
        })
    }

    /// Wrap explicit generators, e.g. a known test keystream.
    pub fn from_generators(
        main: Box<dyn KeystreamGenerator>,
        aux: Option<Box<dyn KeystreamGenerator>>,
        spec: &ConstellationSpec,
    ) -> Self {
        RunningKey {
            main,
            aux,
            bits: spec.key_bits(),
            bases: spec.bases(),
            qumodes: 0,
        }
    }

    pub fn next_basis(&mut self) -> BasisIndex {
        self.qumodes += 1;
        let k = running_key_segment(self.main.as_mut(), self.bits);
        match &mut self.aux {
            Some(aux) => keyed_mapper_apply(k, running_key_segment(aux.as_mut(), self.bits), self.bases),
            None => k,
        }
    }

    /// Qumodes served so far.
    pub fn position(&self) -> u64 {
        self.qumodes
    }

    /// (main, auxiliary) keystream bits consumed.
    pub fn bits_consumed(&self) -> (u64, u64) {
        (
            self.main.bits_emitted(),
            self.aux.as_ref().map_or(0, |a| a.bits_emitted()),
        )
    }

    pub fn reset(&mut self) {
        self.main.reset();
        if let Some(a) = &mut self.aux {
            a.reset();
        }
        self.qumodes = 0;
    }

    pub fn descriptor(&self) -> String {
        match &self.aux {
            Some(a) => format!("{} + keyed_mapper({})", self.main.descriptor(), a.descriptor()),
            None => self.main.descriptor(),
        }
    }
}
