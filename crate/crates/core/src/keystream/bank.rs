//! Block cipher keystreams and the parallel bank that feeds one bit lane per
//! running-key bit.

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes256;

use crate::constellation::BasisIndex;
use crate::error::{config, domain, Result};
use crate::keystream::lfsr::{Lfsr, LfsrSpec};
use crate::keystream::KeystreamGenerator;

/// Parse a hex integer of at most 256 bits into a big-endian AES-256 key.
pub fn key_from_hex(hex: &str) -> Result<[u8; 32]> {
    let v = crate::gf2::BitVector::from_hex(256, hex)?;
    let mut key = [0u8; 32];
    for i in v.iter_ones() {
        key[31 - i / 8] |= 1 << (i % 8);
    }
    Ok(key)
}

/// AES-256 in counter mode as a bit stream.
///
/// Bit `c` is bit `c mod 128` of `AES_K(c / 128)`, the block index encoded
/// as a big-endian 128-bit counter; bits are read MSB-first within bytes.
#[derive(Clone)]
pub struct AesCtr {
    key: [u8; 32],
    cipher: Aes256,
    block: [u8; 16],
    block_index: u64,
    position: u64,
}

impl AesCtr {
    pub fn new(key: [u8; 32]) -> Self {
        let cipher = Aes256::new(GenericArray::from_slice(&key));
        let mut g = AesCtr {
            key,
            cipher,
            block: [0; 16],
            block_index: u64::MAX,
            position: 0,
        };
        g.load(0);
        g
    }

    pub fn key(&self) -> &[u8; 32] {
        &self.key
    }

    fn load(&mut self, index: u64) {
        let mut block = GenericArray::clone_from_slice(&(index as u128).to_be_bytes());
        self.cipher.encrypt_block(&mut block);
        self.block.copy_from_slice(&block);
        self.block_index = index;
    }

    /// Random access to output bit `counter`; does not move the stream.
    pub fn bit_at(&mut self, counter: u64) -> bool {
        let index = counter / 128;
        if index != self.block_index {
            self.load(index);
        }
        let j = (counter % 128) as usize;
        self.block[j / 8] >> (7 - j % 8) & 1 == 1
    }
}

impl KeystreamGenerator for AesCtr {
    fn next_bit(&mut self) -> bool {
        let b = self.bit_at(self.position);
        self.position += 1;
        b
    }

    fn reset(&mut self) {
        self.position = 0;
    }

    fn bits_emitted(&self) -> u64 {
        self.position
    }

    fn descriptor(&self) -> String {
        "aes256-ctr".to_string()
    }
}

/// One lane of the bank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BankLane {
    Aes256Ctr { key: [u8; 32] },
    /// A linear lane; only used as a positive control for the lane statistics.
    Lfsr(LfsrSpec),
}

/// m independent keyed bit sources, lane i supplying bit i (MSB first) of
/// every running-key segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelBankSpec {
    lanes: Vec<BankLane>,
}

impl ParallelBankSpec {
    pub fn new(lanes: Vec<BankLane>) -> Result<Self> {
        if lanes.is_empty() || lanes.len() > 31 {
            return config(format!("bank width must be in 1..=31, got {}", lanes.len()));
        }
        for (i, a) in lanes.iter().enumerate() {
            for b in &lanes[i + 1..] {
                if a == b {
                    return config(format!("duplicate subkey in bank lane {i}"));
                }
            }
        }
        Ok(ParallelBankSpec { lanes })
    }

    pub fn aes(subkeys: &[[u8; 32]]) -> Result<Self> {
        Self::new(subkeys.iter().map(|&key| BankLane::Aes256Ctr { key }).collect())
    }

    pub fn width(&self) -> u32 {
        self.lanes.len() as u32
    }

    pub fn lanes(&self) -> &[BankLane] {
        &self.lanes
    }

    /// The same bank with lane `index` replaced.
    pub fn with_lane(&self, index: usize, lane: BankLane) -> Result<Self> {
        let mut lanes = self.lanes.clone();
        lanes[index] = lane;
        Self::new(lanes)
    }
}

enum LaneState {
    Aes(AesCtr),
    Lfsr(Lfsr),
}

impl LaneState {
    fn new(lane: &BankLane) -> Self {
        match lane {
            BankLane::Aes256Ctr { key } => LaneState::Aes(AesCtr::new(*key)),
            BankLane::Lfsr(spec) => LaneState::Lfsr(Lfsr::new(spec.clone())),
        }
    }

    fn next(&mut self) -> bool {
        match self {
            LaneState::Aes(g) => g.next_bit(),
            LaneState::Lfsr(g) => g.next_bit(),
        }
    }
}

/// Stateless evaluation of the segment at `counter`.
pub fn parallel_bank_segment(bank: &ParallelBankSpec, counter: u64) -> BasisIndex {
    let mut k = 0u32;
    for lane in &bank.lanes {
        let bit = match lane {
            BankLane::Aes256Ctr { key } => AesCtr::new(*key).bit_at(counter),
            BankLane::Lfsr(spec) => {
                let mut g = Lfsr::new(spec.clone());
                for _ in 0..counter {
                    g.next_bit();
                }
                g.next_bit()
            }
        };
        k = k << 1 | bit as u32;
    }
    BasisIndex(k)
}

/// Stateful bank; lanes never share state.
pub struct ParallelBank {
    spec: ParallelBankSpec,
    lanes: Vec<LaneState>,
    counter: u64,
    pending: u32,
    pending_left: u32,
    emitted: u64,
}

impl ParallelBank {
    pub fn new(spec: ParallelBankSpec) -> Self {
        let lanes = spec.lanes.iter().map(LaneState::new).collect();
        ParallelBank {
            spec,
            lanes,
            counter: 0,
            pending: 0,
            pending_left: 0,
            emitted: 0,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    fn segment(&mut self) -> u32 {
        self.counter += 1;
        self.lanes.iter_mut().fold(0, |k, lane| k << 1 | lane.next() as u32)
    }
}

impl KeystreamGenerator for ParallelBank {
    fn next_bit(&mut self) -> bool {
        if self.pending_left == 0 {
            self.pending = self.segment();
            self.pending_left = self.spec.width();
        }
        self.pending_left -= 1;
        self.emitted += 1;
        self.pending >> self.pending_left & 1 == 1
    }

    fn next_segment(&mut self, m: u32) -> u32 {
        if m == self.spec.width() && self.pending_left == 0 {
            self.emitted += m as u64;
            return self.segment();
        }
        (0..m).fold(0, |k, _| k << 1 | self.next_bit() as u32)
    }

    fn reset(&mut self) {
        *self = ParallelBank::new(self.spec.clone());
    }

    fn bits_emitted(&self) -> u64 {
        self.emitted
    }

    fn descriptor(&self) -> String {
        let linear = self
            .spec
            .lanes
            .iter()
            .filter(|l| matches!(l, BankLane::Lfsr(_)))
            .count();
        if linear == 0 {
            format!("parallel_bank(m={}, family=aes256-ctr)", self.spec.width())
        } else {
            format!(
                "parallel_bank(m={}, family=aes256-ctr, lfsr_lanes={linear})",
                self.spec.width()
            )
        }
    }
}

/// Check that a bank width matches the constellation.
pub fn check_bank_width(bank: &ParallelBankSpec, key_bits: u32) -> Result<()> {
    if bank.width() != key_bits {
        return domain(format!(
            "bank width {} does not match m = {key_bits}",
            bank.width()
        ));
    }
    Ok(())
}
