//! Fast correlation attack: iterative decoding of the register output over
//! low-weight parity checks, then a linear solve on the most reliable bits.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use crate::attacks::{mix, score_seed, AttackParams, AttackResult, Candidate, SoftInfo, WorkCounters};
use crate::error::{config, Result};
use crate::gf2::{BitVector, Gf2Solver};
use crate::keystream::{word_linear_forms, LfsrSpec, LinearForms};

const LLR_CLAMP: f64 = 50.0;
const TANH_CLAMP: f64 = 1.0 - 1e-15;

/// A relation `XOR_{e in exponents} s_{t+e} = 0` holding for every `t`:
/// the exponents of a multiple of the characteristic polynomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParityCheck {
    pub exponents: Vec<usize>,
}

impl ParityCheck {
    fn new(mut exponents: Vec<usize>) -> Self {
        exponents.sort_unstable();
        let lo = exponents[0];
        exponents.iter_mut().for_each(|e| *e -= lo);
        ParityCheck { exponents }
    }

    pub fn span(&self) -> usize {
        *self.exponents.last().unwrap()
    }

    pub fn weight(&self) -> usize {
        self.exponents.len()
    }

    /// Placements inside a sequence of `len` bits.
    pub fn instances(&self, len: usize) -> usize {
        len.saturating_sub(self.span())
    }
}

/// Residues `x^i mod f` for `f = x^n + sum_{mask} x^i`.
enum Residues {
    Word { n: usize, mask: u64, r: u64 },
    Wide { n: usize, mask: Vec<u64>, r: Vec<u64> },
}

impl Residues {
    fn new(feedback: &BitVector) -> Self {
        let n = feedback.len();
        if n <= 64 {
            Residues::Word {
                n,
                mask: feedback.as_u64().unwrap(),
                r: 1,
            }
        } else {
            let mut r = vec![0u64; n.div_ceil(64)];
            r[0] = 1;
            Residues::Wide {
                n,
                mask: feedback.words().to_vec(),
                r,
            }
        }
    }

    /// Multiply the current residue by x.
    fn advance(&mut self) {
        match self {
            Residues::Word { n, mask, r } => {
                let top = *r >> (*n - 1) & 1 == 1;
                *r = if *n == 64 { *r << 1 } else { (*r << 1) & ((1u64 << *n) - 1) };
                if top {
                    *r ^= *mask;
                }
            }
            Residues::Wide { n, mask, r } => {
                let top = r[(*n - 1) / 64] >> ((*n - 1) % 64) & 1 == 1;
                let mut carry = 0;
                for w in r.iter_mut() {
                    let next = *w >> 63;
                    *w = *w << 1 | carry;
                    carry = next;
                }
                let rem = *n % 64;
                if rem != 0 {
                    *r.last_mut().unwrap() &= (1u64 << rem) - 1;
                }
                if top {
                    r.iter_mut().zip(mask.iter()).for_each(|(a, b)| *a ^= b);
                }
            }
        }
    }

    fn key(&self) -> Vec<u64> {
        match self {
            Residues::Word { r, .. } => vec![*r],
            Residues::Wide { r, .. } => r.clone(),
        }
    }
}

fn xor(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// Parity checks for a register with `feedback`, usable on `len` output
/// bits: the recurrence itself, its squarings, and weight-3 (optionally
/// weight-4) multiples of degree at most `params.max_multiple_degree`.
/// Returns the checks, shortest span first, and the number of residues
/// examined.
pub fn find_parity_checks(feedback: &BitVector, len: usize, params: &AttackParams) -> Result<(Vec<ParityCheck>, u64)> {
    let n = feedback.len();
    let mut base: Vec<usize> = feedback.iter_ones().collect();
    base.push(n);
    let base = ParityCheck::new(base);
    if base.span() >= len {
        return config(format!(
            "no parity check fits: the recurrence spans {} bits but only {len} are observed",
            base.span() + 1
        ));
    }
    let mut found: BTreeSet<ParityCheck> = BTreeSet::new();
    let mut sq = base.clone();
    while sq.span() < len {
        found.insert(sq.clone());
        sq = ParityCheck {
            exponents: sq.exponents.iter().map(|e| e * 2).collect(),
        };
    }

    let bound = params.max_multiple_degree.min(len - 1);
    let mut work = 0u64;
    if params.check_weight >= 3 && bound > n {
        let mut res = Residues::new(feedback);
        let one = res.key();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut all: Vec<Vec<u64>> = Vec::new();
        for j in 0..=bound {
            let r = res.key();
            work += 1;
            if j > 0 {
                if let Some(&i) = seen.get(&xor(&r, &one)) {
                    if i > 0 {
                        found.insert(ParityCheck::new(vec![0, i, j]));
                    }
                }
            }
            if params.check_weight >= 4 && j <= 2048 {
                all.push(r.clone());
            }
            seen.entry(r).or_insert(j);
            res.advance();
        }
        if params.check_weight >= 4 {
            // x^a + x^b + x^c = 1 mod f with a < b < c
            let lim = all.len();
            for a in 1..lim {
                for b in a + 1..lim {
                    let target = xor(&xor(&all[a], &all[b]), &one);
                    work += 1;
                    if let Some(&c) = seen.get(&target) {
                        if c > b {
                            found.insert(ParityCheck::new(vec![0, a, b, c]));
                        }
                    }
                }
            }
        }
    }
    let mut checks: Vec<ParityCheck> = found.into_iter().collect();
    checks.sort_by_key(|c| (c.span(), c.weight()));
    checks.truncate(params.max_checks.max(1));
    Ok((checks, work))
}

/// `prod tanh(L/2)` over each placement of each check: the expected value of
/// `(-1)^{parity}` under the soft bits. Near +1 where the sequence obeys the
/// check with confidence.
pub fn soft_parities(llrs: &[f64], checks: &[ParityCheck]) -> Vec<f64> {
    let t: Vec<f64> = llrs.iter().map(|&l| (l.clamp(-LLR_CLAMP, LLR_CLAMP) / 2.0).tanh()).collect();
    let mut out = Vec::new();
    for c in checks {
        for s in 0..c.instances(llrs.len()) {
            out.push(c.exponents.iter().map(|&e| t[s + e]).product());
        }
    }
    out
}

/// Like [`soft_parities`] but over placements that share no bit, taken
/// greedily in check order, so the values are independent whenever the
/// bits are.
pub fn disjoint_soft_parities(llrs: &[f64], checks: &[ParityCheck]) -> Vec<f64> {
    let t: Vec<f64> = llrs.iter().map(|&l| (l.clamp(-LLR_CLAMP, LLR_CLAMP) / 2.0).tanh()).collect();
    let mut used = vec![false; llrs.len()];
    let mut out = Vec::new();
    for c in checks {
        for s in 0..c.instances(llrs.len()) {
            if c.exponents.iter().any(|&e| used[s + e]) {
                continue;
            }
            c.exponents.iter().for_each(|&e| used[s + e] = true);
            out.push(c.exponents.iter().map(|&e| t[s + e]).product());
        }
    }
    out
}

/// Sum-product decoding over the placements of `checks`.
struct Decoder<'a> {
    prior: &'a [f64],
    /// Flattened member positions, `weight` per placement.
    members: Vec<usize>,
    offsets: Vec<usize>,
    messages: Vec<f64>,
    total: Vec<f64>,
}

impl<'a> Decoder<'a> {
    fn new(prior: &'a [f64], checks: &[ParityCheck]) -> Self {
        let len = prior.len();
        let mut members = Vec::new();
        let mut offsets = vec![0];
        for c in checks {
            for s in 0..c.instances(len) {
                members.extend(c.exponents.iter().map(|&e| s + e));
                offsets.push(members.len());
            }
        }
        Decoder {
            prior,
            messages: vec![0.0; members.len()],
            members,
            offsets,
            total: prior.iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect(),
        }
    }

    fn placements(&self) -> usize {
        self.offsets.len() - 1
    }

    fn hard(&self, t: usize, seed: u64) -> bool {
        let l = self.total[t];
        if l == 0.0 {
            mix(t as u64 ^ seed.rotate_left(17)) & 1 == 1
        } else {
            l < 0.0
        }
    }

    fn failed_checks(&self, seed: u64) -> usize {
        (0..self.placements())
            .filter(|&p| {
                self.members[self.offsets[p]..self.offsets[p + 1]]
                    .iter()
                    .fold(false, |acc, &u| acc ^ self.hard(u, seed))
            })
            .count()
    }

    /// One flooding round; returns how many hard decisions flipped.
    fn round(&mut self, seed: u64) -> usize {
        let mut next: Vec<f64> = self.prior.iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect();
        let mut tanhs: Vec<f64> = Vec::with_capacity(8);
        for p in 0..self.placements() {
            let (a, b) = (self.offsets[p], self.offsets[p + 1]);
            tanhs.clear();
            for e in a..b {
                let q = self.total[self.members[e]] - self.messages[e];
                tanhs.push((q.clamp(-LLR_CLAMP, LLR_CLAMP) / 2.0).tanh());
            }
            for (k, e) in (a..b).enumerate() {
                let prod: f64 = tanhs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, v)| v)
                    .product();
                let r = 2.0 * prod.clamp(-TANH_CLAMP, TANH_CLAMP).atanh();
                self.messages[e] = r;
                next[self.members[e]] += r;
            }
        }
        let flips = (0..next.len())
            .filter(|&t| {
                let before = self.hard(t, seed);
                let now = if next[t] == 0.0 { before } else { next[t] < 0.0 };
                before != now
            })
            .count();
        self.total = next.into_iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect();
        flips
    }
}

/// Solve for the seed from the most reliable bits, plus the solutions with
/// one of the weakest basis equations flipped.
fn extract(lfsr: &LfsrSpec, start_bit: usize, reliab: &[f64], hard: &[bool], seed: u64, perturb: usize) -> Vec<BitVector> {
    let d = lfsr.degree();
    let mut order: Vec<usize> = (0..reliab.len()).collect();
    order.sort_by(|&a, &b| {
        reliab[b]
            .abs()
            .total_cmp(&reliab[a].abs())
            .then_with(|| mix(a as u64 ^ seed).cmp(&mix(b as u64 ^ seed)))
    });

    // forms for the chosen bits, in confidence order
    let mut take = (2 * d + 64).min(order.len());
    loop {
        let chosen = &order[..take];
        let forms = forms_at(lfsr, start_bit, chosen);
        let mut solver = Gf2Solver::new(d);
        let mut basis = Vec::new();
        for (idx, (f, &t)) in forms.iter().zip(chosen).enumerate() {
            if solver.add(f.clone(), hard[t]) {
                basis.push(idx);
                if solver.is_full_rank() {
                    break;
                }
            }
        }
        if !solver.is_full_rank() {
            if take == order.len() {
                return Vec::new();
            }
            take = (take * 2).min(order.len());
            continue;
        }
        let mut out = vec![solver.solve().expect("full rank system solves")];
        let weakest = basis.iter().rev().take(perturb).copied().collect::<Vec<_>>();
        for &flip in &weakest {
            let mut s = Gf2Solver::new(d);
            for &idx in &basis {
                s.add(forms[idx].clone(), hard[chosen[idx]] ^ (idx == flip));
            }
            if let Some(v) = s.solve() {
                out.push(v);
            }
        }
        return out;
    }
}

/// Linear forms of output bits `start_bit + t` for each `t` in `which`.
fn forms_at(lfsr: &LfsrSpec, start_bit: usize, which: &[usize]) -> Vec<BitVector> {
    let d = lfsr.degree();
    let last = which.iter().max().map_or(0, |&m| m + start_bit + 1);
    if d <= 64 {
        let words = word_linear_forms(lfsr, last);
        return which
            .iter()
            .map(|&t| BitVector::from_u64(d, words[start_bit + t]).unwrap())
            .collect();
    }
    let mut index: HashMap<usize, Vec<usize>> = HashMap::new();
    for (slot, &t) in which.iter().enumerate() {
        index.entry(start_bit + t).or_default().push(slot);
    }
    let mut out = vec![BitVector::zeros(d); which.len()];
    for (pos, f) in LinearForms::new(lfsr).take(last).enumerate() {
        if let Some(slots) = index.get(&pos) {
            for &s in slots {
                out[s] = f.clone();
            }
        }
    }
    out
}

/// Iterative soft bit-flipping correlation attack on a single register.
///
/// Needs the running key to be the raw register output (no keyed mapper).
pub fn fca_bit_flip(soft: &SoftInfo, lfsr: &LfsrSpec, params: &AttackParams) -> Result<AttackResult> {
    let t0 = Instant::now();
    params.validate()?;
    let m = soft.key_bits() as usize;
    let n = params.qumodes.min(soft.len());
    let soft = soft.window(0..n);
    let llrs = soft.bit_llrs();
    let len = llrs.len();
    let start_bit = soft.start() as usize * m;
    let (checks, search_work) = find_parity_checks(lfsr.feedback(), len, params)?;
    let mut dec = Decoder::new(&llrs, &checks);
    let placements = dec.placements() as u64;
    let perturb = if lfsr.degree() <= 64 { lfsr.degree().min(16) } else { 0 };

    let mut work = WorkCounters {
        states: 0,
        parity_checks: search_work + placements,
        rounds: 0,
    };
    let hard_now = |dec: &Decoder| (0..len).map(|t| dec.hard(t, params.seed)).collect::<Vec<bool>>();
    let mut pool: Vec<BitVector> = extract(lfsr, start_bit, &dec.total, &hard_now(&dec), params.seed, perturb);
    let mut failed = dec.failed_checks(params.seed);
    for _ in 0..params.rounds {
        if failed == 0 {
            break;
        }
        dec.round(params.seed);
        work.rounds += 1;
        work.parity_checks += placements;
        failed = dec.failed_checks(params.seed);
    }
    let converged = failed == 0;
    if work.rounds > 0 {
        pool.extend(extract(lfsr, start_bit, &dec.total, &hard_now(&dec), params.seed, perturb));
    }

    pool.retain(|s| !s.is_zero());
    pool.sort_by(|a, b| a.words().cmp(b.words()));
    pool.dedup();
    work.states = pool.len() as u64;
    let mut candidates: Vec<Candidate> = pool
        .into_iter()
        .map(|seed| {
            let score = score_seed(&soft, &lfsr.with_seed(seed.clone()).expect("nonzero seed"));
            Candidate { seed, score }
        })
        .collect();
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.seed.words().cmp(b.seed.words())));
    candidates.truncate(params.max_candidates);
    Ok(AttackResult::new(candidates, work, converged, t0.elapsed(), params.clone()))
}
