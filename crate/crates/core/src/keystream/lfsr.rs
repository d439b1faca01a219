//! Fibonacci LFSR running-key generator.
//!
//! State bits `r_0 .. r_{n-1}`. Each step outputs `r_0`, shifts every bit
//! down one position and writes `XOR { r_i : mask bit i set }` into
//! `r_{n-1}`. The output sequence therefore obeys
//! `s_{t+n} = XOR_{i in mask} s_{t+i}` with characteristic polynomial
//! `x^n + sum_{i in mask} x^i`, and the first `n` outputs are the seed.

use crate::error::{config, Error, Result};
use crate::gf2::BitVector;
use crate::keystream::KeystreamGenerator;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LfsrSpec {
    feedback: BitVector,
    seed: BitVector,
    taps: Vec<usize>,
}

impl LfsrSpec {
    pub fn new(feedback: BitVector, seed: BitVector) -> Result<Self> {
        if feedback.is_empty() {
            return config("LFSR degree must be at least 1");
        }
        if feedback.len() != seed.len() {
            return config(format!(
                "feedback has {} bits but seed has {}",
                feedback.len(),
                seed.len()
            ));
        }
        if feedback.is_zero() {
            return config("feedback mask is zero");
        }
        if seed.is_zero() {
            return Err(Error::DegenerateState);
        }
        let taps = feedback.iter_ones().collect();
        Ok(LfsrSpec { feedback, seed, taps })
    }

    pub fn from_u64(degree: usize, feedback: u64, seed: u64) -> Result<Self> {
        Self::new(
            BitVector::from_u64(degree, feedback)?,
            BitVector::from_u64(degree, seed)?,
        )
    }

    pub fn from_hex(degree: usize, feedback: &str, seed: &str) -> Result<Self> {
        Self::new(
            BitVector::from_hex(degree, feedback)?,
            BitVector::from_hex(degree, seed)?,
        )
    }

    /// Same register and feedback, different seed key.
    pub fn with_seed(&self, seed: BitVector) -> Result<Self> {
        Self::new(self.feedback.clone(), seed)
    }

    /// |K|.
    pub fn degree(&self) -> usize {
        self.feedback.len()
    }

    pub fn feedback(&self) -> &BitVector {
        &self.feedback
    }

    pub fn seed(&self) -> &BitVector {
        &self.seed
    }

    /// State positions tapped by the feedback (mask bit indices).
    pub fn tap_positions(&self) -> &[usize] {
        &self.taps
    }

    /// t, the number of nonzero feedback coefficients.
    pub fn taps(&self) -> usize {
        self.taps.len()
    }
}

/// One register step: `(output bit, next state)`.
pub fn lfsr_step(state: &BitVector, feedback: &BitVector) -> Result<(bool, BitVector)> {
    if state.is_zero() {
        return Err(Error::DegenerateState);
    }
    if state.len() != feedback.len() {
        return config("state and feedback lengths differ");
    }
    let n = state.len();
    let out = state.get(0);
    let fb = state.dot(feedback);
    let mut next = BitVector::zeros(n);
    for i in 1..n {
        next.set(i - 1, state.get(i));
    }
    next.set(n - 1, fb);
    Ok((out, next))
}

#[derive(Clone, Debug)]
enum Register {
    /// Degree <= 64: the state is a single word.
    Word { bits: u64, mask: u64, top: u32 },
    /// Wider registers: a ring buffer, `head` holds `r_0`.
    Ring { buf: BitVector, head: usize },
}

#[derive(Clone, Debug)]
pub struct Lfsr {
    spec: LfsrSpec,
    reg: Register,
    emitted: u64,
}

impl Lfsr {
    pub fn new(spec: LfsrSpec) -> Self {
        let reg = Self::initial(&spec);
        Lfsr {
            spec,
            reg,
            emitted: 0,
        }
    }

    fn initial(spec: &LfsrSpec) -> Register {
        let n = spec.degree();
        if n <= 64 {
            Register::Word {
                bits: spec.seed.as_u64().unwrap(),
                mask: spec.feedback.as_u64().unwrap(),
                top: (n - 1) as u32,
            }
        } else {
            Register::Ring {
                buf: spec.seed.clone(),
                head: 0,
            }
        }
    }

    pub fn spec(&self) -> &LfsrSpec {
        &self.spec
    }

    /// Current register contents `r_0 .. r_{n-1}`.
    pub fn state(&self) -> BitVector {
        let n = self.spec.degree();
        match &self.reg {
            Register::Word { bits, .. } => BitVector::from_u64(n, *bits).unwrap(),
            Register::Ring { buf, head } => {
                let mut v = BitVector::zeros(n);
                for i in 0..n {
                    v.set(i, buf.get((head + i) % n));
                }
                v
            }
        }
    }

    /// Steps until the register first returns to its seed, up to `limit`.
    pub fn cycle_length(spec: &LfsrSpec, limit: u64) -> Option<u64> {
        let mut g = Lfsr::new(spec.clone());
        let start = g.state();
        if let Register::Word { bits, .. } = g.reg {
            for steps in 1..=limit {
                g.step();
                if let Register::Word { bits: now, .. } = g.reg {
                    if now == bits {
                        return Some(steps);
                    }
                }
            }
            return None;
        }
        for steps in 1..=limit {
            g.step();
            if g.state() == start {
                return Some(steps);
            }
        }
        None
    }

    #[inline]
    fn step(&mut self) -> bool {
        self.emitted += 1;
        match &mut self.reg {
            Register::Word { bits, mask, top } => {
                let out = *bits & 1 == 1;
                let fb = (*bits & *mask).count_ones() as u64 & 1;
                *bits = (*bits >> 1) | (fb << *top);
                out
            }
            Register::Ring { buf, head } => {
                let n = buf.len();
                let out = buf.get(*head);
                let mut fb = false;
                for &i in &self.spec.taps {
                    let j = *head + i;
                    fb ^= buf.get(if j >= n { j - n } else { j });
                }
                buf.set(*head, fb);
                *head = if *head + 1 == n { 0 } else { *head + 1 };
                out
            }
        }
    }
}

impl KeystreamGenerator for Lfsr {
    fn next_bit(&mut self) -> bool {
        self.step()
    }

    fn reset(&mut self) {
        self.reg = Self::initial(&self.spec);
        self.emitted = 0;
    }

    fn bits_emitted(&self) -> u64 {
        self.emitted
    }

    fn descriptor(&self) -> String {
        format!(
            "lfsr(degree={}, taps={}, feedback={})",
            self.spec.degree(),
            self.spec.taps(),
            self.spec.feedback.to_hex()
        )
    }
}

/// Linear forms of the output sequence: `s_t = <a_t, seed>` over GF(2).
///
/// `a_t` is the unit vector `e_t` for `t < n` and follows the register
/// recurrence afterwards. Only the last `n` forms are retained.
pub struct LinearForms {
    degree: usize,
    taps: Vec<usize>,
    ring: Vec<BitVector>,
    t: usize,
}

impl LinearForms {
    pub fn new(spec: &LfsrSpec) -> Self {
        let n = spec.degree();
        LinearForms {
            degree: n,
            taps: spec.tap_positions().to_vec(),
            ring: (0..n).map(|i| BitVector::unit(n, i)).collect(),
            t: 0,
        }
    }
}

impl Iterator for LinearForms {
    type Item = BitVector;

    fn next(&mut self) -> Option<BitVector> {
        let n = self.degree;
        let slot = self.t % n;
        if self.t >= n {
            let mut f = BitVector::zeros(n);
            for &i in &self.taps {
                f.xor_assign(&self.ring[(self.t + i) % n]);
            }
            self.ring[slot] = f;
        }
        self.t += 1;
        Some(self.ring[slot].clone())
    }
}

/// Word-sized linear forms for `degree <= 64`.
pub fn word_linear_forms(spec: &LfsrSpec, count: usize) -> Vec<u64> {
    let n = spec.degree();
    assert!(n <= 64, "word_linear_forms requires degree <= 64");
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let f = if t < n {
            1u64 << t
        } else {
            spec.taps.iter().fold(0, |acc, &i| acc ^ out[t - n + i])
        };
        out.push(f);
    }
    out
}
