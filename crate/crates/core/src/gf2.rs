//! Dense bit vectors over GF(2) and an incremental linear-system solver.

use std::fmt;

use crate::error::{domain, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(index, true);
        v
    }

    /// Low `len` bits of `value`; higher bits must be clear.
    pub fn from_u64(len: usize, value: u64) -> Result<Self> {
        if len < 64 && value >> len != 0 {
            return domain(format!("value {value:#x} does not fit in {len} bits"));
        }
        let mut v = Self::zeros(len);
        if len > 0 {
            v.words[0] = value;
        }
        Ok(v)
    }

    /// Parse a hex integer (optional `0x` prefix); bit i of the integer is element i.
    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let digits = hex.trim();
        let digits = digits
            .strip_prefix("0x")
            .or_else(|| digits.strip_prefix("0X"))
            .unwrap_or(digits);
        let digits: Vec<char> = digits.chars().filter(|c| *c != '_').collect();
        if digits.is_empty() {
            return domain("empty hex string");
        }
        let mut v = Self::zeros(len);
        for (pos, c) in digits.iter().rev().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| crate::Error::Domain(format!("invalid hex digit {c:?} in {hex:?}")))?;
            for b in 0..4 {
                if nibble >> b & 1 == 1 {
                    let idx = pos * 4 + b;
                    if idx >= len {
                        return domain(format!("hex value {hex:?} does not fit in {len} bits"));
                    }
                    v.set(idx, true);
                }
            }
        }
        Ok(v)
    }

    pub fn to_hex(&self) -> String {
        let nibbles = self.len.div_ceil(4).max(1);
        let mut s = String::with_capacity(nibbles + 2);
        s.push_str("0x");
        let mut started = false;
        for n in (0..nibbles).rev() {
            let mut d = 0u32;
            for b in 0..4 {
                let idx = n * 4 + b;
                if idx < self.len && self.get(idx) {
                    d |= 1 << b;
                }
            }
            if d != 0 || started || n == 0 {
                started = true;
                s.push(char::from_digit(d, 16).unwrap());
            }
        }
        s
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The vector as an integer, when it fits a single word.
    pub fn as_u64(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let w = &mut self.words[i / 64];
        if bit {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitVector) -> bool {
        debug_assert_eq!(self.len, other.len);
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn lowest_set_bit(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }

    /// Integer value of the vector reduced modulo `modulus`.
    pub fn rem_u64(&self, modulus: u64) -> u64 {
        assert!(modulus > 0);
        let m = modulus as u128;
        let mut r: u128 = 0;
        for i in (0..self.len).rev() {
            r = (r * 2 + self.get(i) as u128) % m;
        }
        r as u64
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({}; {})", self.len, self.to_hex())
    }
}

/// Incremental solver for a square linear system over GF(2).
///
/// Rows are kept with distinct pivots (lowest set bit), so insertion either
/// extends the rank or reports the row as dependent.
#[derive(Clone, Debug)]
pub struct Gf2Solver {
    unknowns: usize,
    pivots: Vec<Option<(BitVector, bool)>>,
    rank: usize,
}

impl Gf2Solver {
    pub fn new(unknowns: usize) -> Self {
        Gf2Solver {
            unknowns,
            pivots: vec![None; unknowns],
            rank: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.unknowns
    }

    /// Add `<row, x> = rhs`. Returns false when the row is dependent on the
    /// rows already present (the equation is then dropped).
    pub fn add(&mut self, mut row: BitVector, mut rhs: bool) -> bool {
        debug_assert_eq!(row.len(), self.unknowns);
        while let Some(col) = row.lowest_set_bit() {
            match &self.pivots[col] {
                Some((prow, prhs)) => {
                    row.xor_assign(prow);
                    rhs ^= *prhs;
                }
                None => {
                    self.pivots[col] = Some((row, rhs));
                    self.rank += 1;
                    return true;
                }
            }
        }
        false
    }

    /// Back-substitute once full rank is reached.
    pub fn solve(&self) -> Option<BitVector> {
        if !self.is_full_rank() {
            return None;
        }
        let mut x = BitVector::zeros(self.unknowns);
        for col in (0..self.unknowns).rev() {
            let (row, rhs) = self.pivots[col].as_ref()?;
            let mut v = *rhs;
            for j in row.iter_ones().filter(|&j| j > col) {
                v ^= x.get(j);
            }
            x.set(col, v);
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_roundtrip_and_errors() {
        let v = BitVector::from_hex(16, "0xACE1").unwrap();
        assert_eq!(v.as_u64(), Some(0xace1));
        assert_eq!(v.to_hex(), "0xace1");
        assert!(BitVector::from_hex(8, "0x1ff").is_err());
        assert!(BitVector::from_hex(8, "0xzz").is_err());
        assert_eq!(BitVector::zeros(5).to_hex(), "0x0");
        let wide = BitVector::from_hex(200, &format!("0x1{}1", "0".repeat(47))).unwrap();
        assert_eq!(wide.iter_ones().collect::<Vec<_>>(), vec![0, 192]);
    }

    #[test]
    fn rem_matches_integer_arithmetic() {
        let v = BitVector::from_u64(40, 0xde_adbe_ef12).unwrap();
        for m in [1u64, 3, 7, 1000, 65537] {
            assert_eq!(v.rem_u64(m), 0xde_adbe_ef12 % m);
        }
    }

    proptest! {
        #[test]
        fn solver_recovers_random_systems(seed in any::<u64>(), n in 1usize..90) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut x = BitVector::zeros(n);
            for i in 0..n { x.set(i, rng.random()); }
            let mut solver = Gf2Solver::new(n);
            let mut guard = 0;
            while !solver.is_full_rank() {
                let mut row = BitVector::zeros(n);
                for i in 0..n { row.set(i, rng.random()); }
                let rhs = row.dot(&x);
                solver.add(row, rhs);
                guard += 1;
                prop_assert!(guard < 10 * n + 100);
            }
            prop_assert_eq!(solver.solve().unwrap(), x);
        }
    }
}
