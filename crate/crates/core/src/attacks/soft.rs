//! Per-qumode posteriors over the running-key segment.

use std::f64::consts::PI;

use crate::attacks::AttackScenario;
use crate::channel::PhaseNoise;
use crate::constellation::{wrap_signed, ConstellationSpec, PhaseAngle};
use crate::dsr::{density_at_offset, DensityMethod, DsrPolicy};
use crate::endpoints::Observations;
use crate::error::{domain, Result};

/// Probabilities are floored here before taking logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-30;

/// A posterior over `[0, M)`: `floor` for every index not listed.
#[derive(Clone, Debug, PartialEq)]
struct Row {
    floor: f64,
    /// Sorted by index.
    entries: Vec<(u32, f64)>,
}

impl Row {
    fn get(&self, k: u32) -> f64 {
        match self.entries.binary_search_by_key(&k, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => self.floor,
        }
    }
}

/// Posterior probability vectors over k' for a run of consecutive qumodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftInfo {
    bases: u32,
    bits: u32,
    start: u64,
    rows: Vec<Row>,
}

impl SoftInfo {
    /// Build from likelihood vectors (normalized here).
    pub fn from_likelihoods(bases: u32, start: u64, rows: &[Vec<f64>]) -> Result<Self> {
        if !bases.is_power_of_two() || bases < 2 {
            return domain(format!("M must be a power of two >= 2, got {bases}"));
        }
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != bases as usize {
                return domain(format!("likelihood row has {} entries, expected {bases}", r.len()));
            }
            out.push(compress(r.iter().enumerate().map(|(k, &v)| (k as u32, v)), bases));
        }
        Ok(SoftInfo {
            bases,
            bits: bases.trailing_zeros(),
            start,
            rows: out,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn bases(&self) -> u32 {
        self.bases
    }

    pub fn key_bits(&self) -> u32 {
        self.bits
    }

    /// Qumode counter of the first row.
    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn posterior(&self, i: usize, k: u32) -> f64 {
        self.rows[i].get(k)
    }

    pub fn posterior_vector(&self, i: usize) -> Vec<f64> {
        (0..self.bases).map(|k| self.rows[i].get(k)).collect()
    }

    pub fn log_posterior(&self, i: usize, k: u32) -> f64 {
        self.rows[i].get(k).max(PROBABILITY_FLOOR).ln()
    }

    /// Whether every row is exactly uniform.
    pub fn is_uninformative(&self) -> bool {
        self.rows.iter().all(|r| r.entries.is_empty())
    }

    /// Rows `range`, keeping the absolute qumode counter.
    pub fn window(&self, range: std::ops::Range<usize>) -> SoftInfo {
        SoftInfo {
            bases: self.bases,
            bits: self.bits,
            start: self.start + range.start as u64,
            rows: self.rows[range].to_vec(),
        }
    }

    /// Per-bit log-likelihood ratios `ln P(bit = 0) / P(bit = 1)` in
    /// keystream order: qumode `i` contributes entries `i*m .. (i+1)*m`,
    /// most significant bit first.
    pub fn bit_llrs(&self) -> Vec<f64> {
        let m = self.bits as usize;
        let mut out = Vec::with_capacity(self.rows.len() * m);
        let half = (self.bases / 2) as f64;
        for row in &self.rows {
            for j in 0..m {
                let shift = m - 1 - j;
                let (mut p0, mut p1) = (0.0, 0.0);
                let (mut n0, mut n1) = (0usize, 0usize);
                for &(k, p) in &row.entries {
                    if k >> shift & 1 == 0 {
                        p0 += p;
                        n0 += 1;
                    } else {
                        p1 += p;
                        n1 += 1;
                    }
                }
                p0 += row.floor * (half - n0 as f64);
                p1 += row.floor * (half - n1 as f64);
                out.push(p0.max(PROBABILITY_FLOOR).ln() - p1.max(PROBABILITY_FLOOR).ln());
            }
        }
        out
    }
}

fn compress(values: impl Iterator<Item = (u32, f64)>, bases: u32) -> Row {
    let mut entries: Vec<(u32, f64)> = values.filter(|e| e.1 > 0.0).collect();
    let total: f64 = entries.iter().map(|e| e.1).sum();
    if total <= 0.0 || !total.is_finite() {
        return uniform(bases);
    }
    entries.iter_mut().for_each(|e| e.1 /= total);
    entries.sort_by_key(|e| e.0);
    if entries.len() == bases as usize {
        let (lo, hi) = entries
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.1), hi.max(e.1)));
        if hi - lo <= 1e-12 * hi {
            return uniform(bases);
        }
    }
    Row { floor: 0.0, entries }
}

fn uniform(bases: u32) -> Row {
    Row {
        floor: 1.0 / bases as f64,
        entries: Vec::new(),
    }
}

/// Half-width of the output density around a signal point.
fn output_half_width(model: &dyn PhaseNoise, policy: DsrPolicy) -> f64 {
    let spread = match policy {
        DsrPolicy::Off => 0.0,
        DsrPolicy::DiscreteWedges(w) => PI / 2.0 - PI / (2.0 * w as f64),
        DsrPolicy::ContinuousHalfCircle => PI / 2.0,
    };
    model.support_half_width() + spread
}

/// Bayes inversion of the output densities with a uniform prior on k'.
///
/// Ciphertext only: `posterior(k') ∝ p(theta | k')`. Known plaintext:
/// `posterior(k') ∝ p(theta | x, k')`.
pub fn running_key_posteriors(
    obs: &Observations,
    scenario: &AttackScenario,
    spec: &ConstellationSpec,
    model: &dyn PhaseNoise,
    policy: DsrPolicy,
) -> Result<SoftInfo> {
    if let AttackScenario::Kpa(x) = scenario {
        if x.len() != obs.len() {
            return domain(format!(
                "known plaintext has {} bits for {} observations",
                x.len(),
                obs.len()
            ));
        }
    }
    let m = spec.bases();
    let points = spec.points();
    let spacing = spec.spacing();
    let half = output_half_width(model, policy);
    let reach = ((half / spacing).ceil() as i64 + 1).min(points as i64);
    let full = 2 * reach + 1 >= points as i64;

    let mut rows = Vec::with_capacity(obs.len());
    let mut g: Vec<(u32, f64)> = Vec::new();
    for (i, o) in obs.points.iter().enumerate() {
        let theta = o.theta;
        g.clear();
        let mut eval = |l: u32| {
            let tl = PhaseAngle::new(spacing * l as f64);
            let d = density_at_offset(wrap_signed(theta.radians() - tl.radians()), policy, model, DensityMethod::Auto);
            (l, d)
        };
        if full {
            g.extend((0..points).map(&mut eval));
        } else {
            let c = (theta.radians() / spacing).round() as i64;
            g.extend((c - reach..=c + reach).map(|l| eval(l.rem_euclid(points as i64) as u32)));
        }
        // a point-mass kernel yields infinite densities: keep the indicator
        if g.iter().any(|e| e.1.is_infinite()) {
            g.iter_mut().for_each(|e| e.1 = if e.1.is_infinite() { 1.0 } else { 0.0 });
        }
        let like = g.iter().filter_map(|&(l, d)| {
            let (k, b) = (l % m, l / m);
            match scenario {
                AttackScenario::Cta => Some((k, 0.5 * d)),
                AttackScenario::Kpa(xs) => {
                    // the point of (x, k) has b = x XOR (k mod 2)
                    (b == (xs[i] as u32 ^ (k & 1))).then_some((k, d))
                }
            }
        });
        let mut merged: Vec<(u32, f64)> = like.collect();
        merged.sort_by_key(|e| e.0);
        merged.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        rows.push(compress(merged.into_iter(), m));
    }
    Ok(SoftInfo {
        bases: m,
        bits: spec.key_bits(),
        start: obs.start,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{NoiseModel, Observation};
    use crate::constellation::{signal_phase, BasisIndex};
    use crate::dsr::marginal_output_density_with;
    use crate::dsr::conditional_output_density_with;
    use crate::rng::stream;
    use rand::Rng;

    fn obs(thetas: &[f64]) -> Observations {
        Observations {
            start: 0,
            points: thetas.iter().map(|&t| Observation::phase(PhaseAngle::new(t))).collect(),
        }
    }

    #[test]
    fn noiseless_bare_cipher_exposes_the_basis() {
        let spec = ConstellationSpec::new(16, 100.0).unwrap();
        for k in 0..16 {
            for x in [false, true] {
                let t = signal_phase(x, BasisIndex(k), &spec).unwrap();
                let o = obs(&[t.radians()]);
                let s = running_key_posteriors(&o, &AttackScenario::Cta, &spec, &NoiseModel::Noiseless, DsrPolicy::Off).unwrap();
                assert_eq!(s.posterior(0, k), 1.0);
                assert_eq!(s.posterior_vector(0).iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn continuous_dsr_noiseless_posterior_is_uniform() {
        let spec = ConstellationSpec::new(16, 100.0).unwrap();
        let mut rng = stream(3, &[]);
        let thetas: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let s = running_key_posteriors(
            &obs(&thetas),
            &AttackScenario::Cta,
            &spec,
            &NoiseModel::Noiseless,
            DsrPolicy::ContinuousHalfCircle,
        )
        .unwrap();
        assert!(s.is_uninformative());
        for i in 0..s.len() {
            for k in 0..16 {
                assert_eq!(s.posterior(i, k), 1.0 / 16.0);
            }
        }
        assert!(s.bit_llrs().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn two_basis_wedge_hand_computation() {
        // M = 2: points at 0, pi/2, pi, 3pi/2 carrying bases 0, 1, 0, 1.
        // A wedge of half-width pi/2 around an observation at pi/4 + 0.1
        // covers the points at 0 and pi/2 only: p(theta | k) = 1/(2 pi)
        // for both bases.
        let spec = ConstellationSpec::new(2, 1.0).unwrap();
        let w = NoiseModel::wedge(std::f64::consts::FRAC_PI_2).unwrap();
        let s = running_key_posteriors(&obs(&[std::f64::consts::FRAC_PI_4 + 0.1]), &AttackScenario::Cta, &spec, &w, DsrPolicy::Off).unwrap();
        assert!(s.is_uninformative());
        // at 1.7 the wedge covers pi/2 (k=1) and pi (k=0)
        let s = running_key_posteriors(&obs(&[1.7]), &AttackScenario::Cta, &spec, &w, DsrPolicy::Off).unwrap();
        assert!((s.posterior(0, 0) - 0.5).abs() < 1e-15);
        // a narrower wedge at 0.05 only covers the point at 0
        let w = NoiseModel::wedge(0.3).unwrap();
        let s = running_key_posteriors(&obs(&[0.05]), &AttackScenario::Cta, &spec, &w, DsrPolicy::Off).unwrap();
        assert_eq!(s.posterior(0, 0), 1.0);
    }

    #[test]
    fn posterior_matches_direct_bayes_inversion() {
        let models = [
            NoiseModel::wedge(0.4).unwrap(),
            NoiseModel::gaussian(0.25).unwrap(),
            NoiseModel::heterodyne(12.0).unwrap(),
        ];
        let policies = [DsrPolicy::Off, DsrPolicy::DiscreteWedges(3), DsrPolicy::ContinuousHalfCircle];
        for m in [2u32, 4, 8] {
            let spec = ConstellationSpec::new(m, 12.0).unwrap();
            for model in &models {
                for &pol in &policies {
                    let thetas: Vec<f64> = (0..24).map(|i| 0.013 + i as f64 * 0.2617).collect();
                    let xs: Vec<bool> = (0..24).map(|i| i % 3 == 1).collect();
                    let o = obs(&thetas);
                    for scenario in [AttackScenario::Cta, AttackScenario::Kpa(xs.clone())] {
                        let s = running_key_posteriors(&o, &scenario, &spec, model, pol).unwrap();
                        for (i, &t) in thetas.iter().enumerate() {
                            let th = PhaseAngle::new(t);
                            let like: Vec<f64> = (0..m)
                                .map(|k| match &scenario {
                                    AttackScenario::Cta => marginal_output_density_with(th, BasisIndex(k), pol, model, &spec, DensityMethod::Quadrature).unwrap(),
                                    AttackScenario::Kpa(x) => conditional_output_density_with(th, x[i], BasisIndex(k), pol, model, &spec, DensityMethod::Quadrature).unwrap(),
                                })
                                .collect();
                            let total: f64 = like.iter().sum();
                            for k in 0..m {
                                let want = if total > 0.0 { like[k as usize] / total } else { 1.0 / m as f64 };
                                assert!(
                                    (s.posterior(i, k) - want).abs() < 1e-8,
                                    "M={m} {model:?} {pol:?} {} i={i} k={k}: {} vs {want}",
                                    scenario.kind(),
                                    s.posterior(i, k)
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rows_normalize_and_llrs_are_finite() {
        let spec = ConstellationSpec::new(1024, 1.5e4).unwrap();
        let mut rng = stream(8, &[]);
        let thetas: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        for model in [NoiseModel::wedge(8.165e-3).unwrap(), NoiseModel::heterodyne(1.5e4).unwrap()] {
            let s = running_key_posteriors(&obs(&thetas), &AttackScenario::Cta, &spec, &model, DsrPolicy::Off).unwrap();
            for i in 0..s.len() {
                let sum: f64 = s.posterior_vector(i).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
            assert!(s.bit_llrs().iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn kpa_length_mismatch_rejected() {
        let spec = ConstellationSpec::new(4, 10.0).unwrap();
        let r = running_key_posteriors(&obs(&[0.1, 0.2]), &AttackScenario::Kpa(vec![true]), &spec, &NoiseModel::Noiseless, DsrPolicy::Off);
        assert!(r.is_err());
    }

    #[test]
    fn bit_llrs_marginalize_the_posterior() {
        let like = vec![vec![0.1, 0.2, 0.3, 0.4]];
        let s = SoftInfo::from_likelihoods(4, 0, &like).unwrap();
        let l = s.bit_llrs();
        // MSB: P(0) = 0.1 + 0.2, LSB: P(0) = 0.1 + 0.3
        assert!((l[0] - (0.3f64 / 0.7).ln()).abs() < 1e-12);
        assert!((l[1] - (0.4f64 / 0.6).ln()).abs() < 1e-12);
    }
}
