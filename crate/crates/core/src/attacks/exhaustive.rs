//! Assisted brute force: score every nonzero register state by the
//! log-posterior of the running key it implies.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Instant;

use rayon::prelude::*;

use crate::attacks::{mix, AttackParams, AttackResult, Candidate, SoftInfo, WorkCounters};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::keystream::{word_linear_forms, KeystreamGenerator, Lfsr, LfsrSpec};

/// Largest state space the exhaustive attack will enumerate.
pub const MAX_EXHAUSTIVE_STATES: u64 = 1 << 26;

/// Log-likelihood of `spec`'s seed against the soft information: the sum of
/// per-qumode log posteriors of the segments the register emits.
pub fn score_seed(soft: &SoftInfo, spec: &LfsrSpec) -> f64 {
    let m = soft.key_bits();
    let mut g = Lfsr::new(spec.clone());
    for _ in 0..soft.start() * m as u64 {
        g.next_bit();
    }
    (0..soft.len()).map(|i| soft.log_posterior(i, g.next_segment(m))).sum()
}

/// Per-qumode contribution of each seed byte to the packed segment.
struct SegmentTables {
    chunks: usize,
    /// `[qumode][chunk][byte]`, flattened.
    table: Vec<u32>,
}

impl SegmentTables {
    fn new(lfsr: &LfsrSpec, start: u64, n: usize, m: u32) -> Self {
        let d = lfsr.degree();
        let chunks = d.div_ceil(8);
        let first = (start * m as u64) as usize;
        let forms = word_linear_forms(lfsr, first + n * m as usize);
        let mut table = vec![0u32; n * chunks * 256];
        let mut per_bit = vec![0u32; d];
        for i in 0..n {
            per_bit.iter_mut().for_each(|v| *v = 0);
            for j in 0..m as usize {
                let f = forms[first + i * m as usize + j];
                let weight = 1u32 << (m as usize - 1 - j);
                for (b, v) in per_bit.iter_mut().enumerate() {
                    if f >> b & 1 == 1 {
                        *v ^= weight;
                    }
                }
            }
            for c in 0..chunks {
                let base = (i * chunks + c) * 256;
                for v in 1..256usize {
                    // build from the lowest set bit
                    let low = v.trailing_zeros() as usize;
                    let bit = c * 8 + low;
                    let contrib = if bit < d { per_bit[bit] } else { 0 };
                    table[base + v] = table[base + (v & (v - 1))] ^ contrib;
                }
            }
        }
        SegmentTables { chunks, table }
    }

    #[inline]
    fn segment(&self, i: usize, state: u64) -> u32 {
        let base = i * self.chunks * 256;
        let mut k = 0;
        for c in 0..self.chunks {
            k ^= self.table[base + c * 256 + ((state >> (8 * c)) & 0xff) as usize];
        }
        k
    }
}

#[derive(Clone, Copy, Debug)]
struct Ranked {
    score: f64,
    tie: u64,
    state: u64,
}

impl PartialEq for Ranked {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Ranked {
    /// Greater is better: higher score, then smaller tie key.
    fn cmp(&self, o: &Self) -> Ordering {
        self.score
            .total_cmp(&o.score)
            .then_with(|| o.tie.cmp(&self.tie))
            .then_with(|| o.state.cmp(&self.state))
    }
}

struct TopK {
    cap: usize,
    heap: BinaryHeap<Reverse<Ranked>>,
}

impl TopK {
    fn new(cap: usize) -> Self {
        TopK {
            cap,
            heap: BinaryHeap::with_capacity(cap + 1),
        }
    }

    fn push(mut self, r: Ranked) -> Self {
        if self.heap.len() < self.cap {
            self.heap.push(Reverse(r));
        } else if let Some(Reverse(worst)) = self.heap.peek() {
            if r > *worst {
                self.heap.pop();
                self.heap.push(Reverse(r));
            }
        }
        self
    }

    fn merge(self, other: TopK) -> Self {
        other.heap.into_iter().fold(self, |acc, Reverse(r)| acc.push(r))
    }

    fn into_sorted(self) -> Vec<Ranked> {
        let mut v: Vec<Ranked> = self.heap.into_iter().map(|Reverse(r)| r).collect();
        v.sort_by(|a, b| b.cmp(a));
        v
    }
}

fn search_window(soft: &SoftInfo, lfsr: &LfsrSpec, params: &AttackParams) -> Vec<Ranked> {
    let m = soft.key_bits();
    let n = soft.len();
    let tables = SegmentTables::new(lfsr, soft.start(), n, m);
    let states = (1u64 << lfsr.degree()) - 1;
    let seed = params.seed;
    (1..=states)
        .into_par_iter()
        .fold(
            || TopK::new(params.max_candidates),
            |top, state| {
                let score: f64 = (0..n).map(|i| soft.log_posterior(i, tables.segment(i, state))).sum();
                top.push(Ranked {
                    score,
                    tie: mix(state ^ seed),
                    state,
                })
            },
        )
        .reduce(|| TopK::new(params.max_candidates), TopK::merge)
        .into_sorted()
}

/// Enumerate all `2^degree - 1` nonzero states and rank them by likelihood.
///
/// Equal scores are ordered by a keyed hash of the state, so a channel that
/// carries no information yields a uniformly random guess.
pub fn exhaustive_likelihood_attack(soft: &SoftInfo, lfsr: &LfsrSpec, params: &AttackParams) -> Result<AttackResult> {
    let t0 = Instant::now();
    params.validate()?;
    let d = lfsr.degree();
    let cap = params.max_states.min(MAX_EXHAUSTIVE_STATES);
    let states = if d >= 64 { u64::MAX } else { (1u64 << d) - 1 };
    if d > 26 || states > cap {
        return Err(Error::WorkCap { requested: states, cap });
    }
    let n = params.qumodes.min(soft.len());
    let soft = soft.window(0..n);
    let windows: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(params.window)
        .map(|a| a..(a + params.window).min(n))
        .collect();
    let mut work = WorkCounters::default();
    let mut pool: Vec<Ranked> = Vec::new();
    for w in &windows {
        pool.extend(search_window(&soft.window(w.clone()), lfsr, params));
        work.states += states;
    }
    let mut ranked: Vec<Ranked> = if windows.len() > 1 {
        pool.sort_by_key(|r| r.state);
        pool.dedup_by_key(|r| r.state);
        pool.into_iter()
            .map(|r| Ranked {
                score: score_seed(&soft, &seed_spec(lfsr, r.state)),
                ..r
            })
            .collect()
    } else {
        pool
    };
    ranked.sort_by(|a, b| b.cmp(a));
    ranked.truncate(params.max_candidates);
    let candidates = ranked
        .into_iter()
        .map(|r| Candidate {
            seed: BitVector::from_u64(d, r.state).expect("state fits the register"),
            score: r.score,
        })
        .collect();
    Ok(AttackResult::new(candidates, work, true, t0.elapsed(), params.clone()))
}

fn seed_spec(lfsr: &LfsrSpec, state: u64) -> LfsrSpec {
    lfsr.with_seed(BitVector::from_u64(lfsr.degree(), state).unwrap())
        .expect("nonzero state")
}
