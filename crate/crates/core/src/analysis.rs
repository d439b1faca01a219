//! Key-channel leakage: information rates, histogram estimators, uniformity
//! certificates and the fixed-Gamma scaling ladder.
//!
//! All rates are for the uniform key input forced by the cipher, not the
//! input-optimized channel capacity. The two coincide when the rate is zero.

use std::f64::consts::{LN_2, PI, TAU};

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::attacks::{intercept, AttackScenario, SoftInfo};
use crate::channel::{sample_observation, NoiseModel, PhaseNoise};
use crate::constellation::{gamma, point_index_unchecked, signal_phase_unchecked, BasisIndex, ConstellationSpec, PhaseAngle};
use crate::dsr::{output_mass_at_offset, randomize_phase, DsrPolicy};
use crate::endpoints::{measure_ber_seeded, SessionConfig};
use crate::error::{domain, Result};
use crate::keystream::{EncSpec, LfsrSpec};
use crate::rng::{label, stream};
use crate::stats::{chi_square_gof, chi_square_homogeneity, chi_square_sf, TestOutcome};

/// Fewest samples the estimators accept.
pub const MIN_SAMPLES: usize = 10_000;
/// Jackknife folds.
pub const FOLDS: usize = 10;
/// Upper bound on the default histogram size.
pub const MAX_DEFAULT_BINS: u32 = 4096;
/// Samples drawn per rayon shard by the samplers.
const SHARD: usize = 1 << 16;

/// Estimated information between the running-key segment and Eve's phase.
#[derive(Clone, Debug, PartialEq)]
pub struct LeakageEstimate {
    /// Bits per qumode, Miller-Madow corrected.
    pub mi: f64,
    /// Jackknife standard error.
    pub std_error: f64,
    pub bins: u32,
    pub samples: usize,
    /// G-test of zero leakage.
    pub p_value: f64,
    /// Some cell expected fewer than 5 counts.
    pub undersampled: bool,
    /// `joint` or `covariant`, see the estimator functions.
    pub method: &'static str,
}

impl LeakageEstimate {
    /// Within three standard errors of zero and not rejected by the G-test.
    pub fn consistent_with_zero(&self, alpha: f64) -> bool {
        self.mi.abs() <= 3.0 * self.std_error.max(f64::MIN_POSITIVE) && self.p_value >= alpha
    }
}

/// `4M` capped at [`MAX_DEFAULT_BINS`], never below `2M`.
pub fn default_bins(bases: u32) -> u32 {
    (4 * bases).min(MAX_DEFAULT_BINS).max(2 * bases)
}

/// Histogram cell of `theta` among `bins` equal sectors centred on
/// multiples of `2pi / bins`.
#[inline]
pub fn sector_of(theta: PhaseAngle, bins: u32) -> u32 {
    let t = theta.radians() * bins as f64 / TAU + 0.5;
    (t.floor() as u64 % bins as u64) as u32
}

/// Plug-in entropy (nats) of a sample of categorical cells, with the
/// Miller-Madow term, overall and with each jackknife fold left out.
struct FoldedEntropy {
    full: f64,
    plugin: f64,
    leave_out: Vec<f64>,
    /// Occupied cells.
    live: usize,
}

fn c_ln_c(c: u64) -> f64 {
    if c == 0 {
        0.0
    } else {
        c as f64 * (c as f64).ln()
    }
}

fn mm_entropy(sum_clnc: f64, n: u64, live: usize) -> f64 {
    let n = n as f64;
    n.ln() - sum_clnc / n + (live.saturating_sub(1)) as f64 / (2.0 * n)
}

impl FoldedEntropy {
    fn new(cells: &[u32], ncells: usize) -> Self {
        let mut counts = vec![0u64; ncells];
        for &c in cells {
            counts[c as usize] += 1;
        }
        let n = cells.len() as u64;
        let total: f64 = counts.iter().map(|&c| c_ln_c(c)).sum();
        let live = counts.iter().filter(|&&c| c > 0).count();
        let full = mm_entropy(total, n, live);
        let plugin = mm_entropy(total, n, 1);
        let leave_out = (0..FOLDS)
            .map(|f| {
                let mut fold: Vec<u32> = cells.iter().skip(f).step_by(FOLDS).copied().collect();
                fold.sort_unstable();
                let (mut sum, mut alive) = (total, live);
                for run in fold.chunk_by(|a, b| a == b) {
                    let c = counts[run[0] as usize];
                    let d = run.len() as u64;
                    sum += c_ln_c(c - d) - c_ln_c(c);
                    if c == d {
                        alive -= 1;
                    }
                }
                mm_entropy(sum, n - fold.len() as u64, alive)
            })
            .collect();
        FoldedEntropy { full, plugin, leave_out, live }
    }
}

/// Jackknife standard error of a statistic from its leave-one-fold-out
/// values.
fn jackknife_se(values: &[f64]) -> f64 {
    let g = values.len() as f64;
    let mean = values.iter().sum::<f64>() / g;
    ((g - 1.0) / g * values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
}

fn check_samples(n: usize, keys: u32, bins: u32) -> Result<()> {
    if n < MIN_SAMPLES {
        return domain(format!("{n} samples; at least {MIN_SAMPLES} are needed"));
    }
    if keys == 0 || bins == 0 || bins % (2 * keys) != 0 {
        return domain(format!("bins = {bins} must be a positive multiple of 2M = {}", 2 * keys));
    }
    Ok(())
}

/// Plug-in estimate of `I(k'; theta)` from the joint histogram of `keys`
/// key values by `bins` phase sectors.
///
/// Makes no assumption about the channel. The joint table has
/// `keys * bins` cells, so it needs far more samples than cells.
pub fn estimate_mutual_information(samples: &[(u32, PhaseAngle)], keys: u32, bins: u32) -> Result<LeakageEstimate> {
    check_samples(samples.len(), keys, bins)?;
    if let Some(&(k, _)) = samples.iter().find(|(k, _)| *k >= keys) {
        return domain(format!("key value {k} outside 0..{keys}"));
    }
    let key: Vec<u32> = samples.iter().map(|s| s.0).collect();
    let sec: Vec<u32> = samples.iter().map(|s| sector_of(s.1, bins)).collect();
    let joint: Vec<u32> = key.iter().zip(&sec).map(|(&k, &b)| k * bins + b).collect();
    let hk = FoldedEntropy::new(&key, keys as usize);
    let hb = FoldedEntropy::new(&sec, bins as usize);
    let hj = FoldedEntropy::new(&joint, (keys * bins) as usize);
    let mi = |a: f64, b: f64, j: f64| (a + b - j) / LN_2;
    let leave: Vec<f64> = (0..FOLDS)
        .map(|f| mi(hk.leave_out[f], hb.leave_out[f], hj.leave_out[f]))
        .collect();

    let n = samples.len() as u64;
    // G = 2 n I_plugin in nats
    let g_stat = 2.0 * n as f64 * (hk.plugin + hb.plugin - hj.plugin).max(0.0);
    let dof = ((hk.live.max(1) - 1) * (hb.live.max(1) - 1)) as f64;
    Ok(LeakageEstimate {
        mi: mi(hk.full, hb.full, hj.full),
        std_error: jackknife_se(&leave),
        bins,
        samples: samples.len(),
        p_value: chi_square_sf(g_stat, dof),
        undersampled: (n as f64) / (keys as f64 * bins as f64) < 5.0,
        method: "joint",
    })
}

fn counts_table(cells: &[u32], ncells: usize) -> Vec<u64> {
    let mut t = vec![0u64; ncells];
    for &c in cells {
        t[c as usize] += 1;
    }
    t
}

/// Estimate of `I(k'; theta)` for a rotation-covariant key channel with
/// uniform `k'`, where `p(theta | k')` depends only on the offset from
/// basis point `k'`. Then `I = H(theta) - H(theta - k' pi / M)`, two
/// one-dimensional histograms of `bins` sectors each, which stays usable at
/// constellation sizes where the joint table cannot be filled.
///
/// The p-value tests that the offset distribution is periodic with the
/// point spacing, which is equivalent to zero leakage.
pub fn estimate_key_leakage(samples: &[(u32, PhaseAngle)], spec: &ConstellationSpec, bins: u32) -> Result<LeakageEstimate> {
    let m = spec.bases();
    check_samples(samples.len(), m, bins)?;
    let per_basis = bins / (2 * m);
    let sec: Vec<u32> = samples.iter().map(|s| sector_of(s.1, bins)).collect();
    let mut off = Vec::with_capacity(samples.len());
    for (&(k, _), &b) in samples.iter().zip(&sec) {
        if k >= m {
            return domain(format!("key value {k} outside 0..{m}"));
        }
        off.push((b + bins - (k % m) * per_basis) % bins);
    }
    let ht = FoldedEntropy::new(&sec, bins as usize);
    let hd = FoldedEntropy::new(&off, bins as usize);
    let leave: Vec<f64> = (0..FOLDS).map(|f| (ht.leave_out[f] - hd.leave_out[f]) / LN_2).collect();

    // offsets d and d + per_basis are equally likely under zero leakage
    let counts = counts_table(&off, bins as usize);
    let rows = 2 * m as usize;
    let cols = per_basis as usize;
    let mut g = 0.0;
    for c in 0..cols {
        let col: u64 = (0..rows).map(|r| counts[r * cols + c]).sum();
        let e = col as f64 / rows as f64;
        for r in 0..rows {
            let o = counts[r * cols + c] as f64;
            if o > 0.0 {
                g += 2.0 * o * (o / e).ln();
            }
        }
    }
    let dof = (cols * (rows - 1)) as f64;
    Ok(LeakageEstimate {
        mi: (ht.full - hd.full) / LN_2,
        std_error: jackknife_se(&leave),
        bins,
        samples: samples.len(),
        p_value: chi_square_sf(g, dof),
        undersampled: (samples.len() as f64) / (bins as f64) < 5.0,
        method: "covariant",
    })
}

/// Leakage read off exact posteriors: `m - E[H(k' | theta)]` bits for a
/// uniform prior on `k'`.
pub fn posterior_leakage(soft: &SoftInfo) -> f64 {
    if soft.is_empty() {
        return 0.0;
    }
    let h: f64 = (0..soft.len())
        .map(|i| {
            soft.posterior_vector(i)
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.log2())
                .sum::<f64>()
        })
        .sum();
    soft.key_bits() as f64 - h / soft.len() as f64
}

/// Probability of each of `sectors` sectors, as an offset from the
/// transmitted signal point: entry `j` covers `[j w - w/2, j w + w/2)`.
pub fn offset_kernel(model: &dyn PhaseNoise, policy: DsrPolicy, sectors: u32) -> Vec<f64> {
    let w = TAU / sectors as f64;
    (0..sectors)
        .map(|j| {
            let c = crate::constellation::wrap_signed(j as f64 * w);
            output_mass_at_offset(c - 0.5 * w, c + 0.5 * w, policy, model)
        })
        .collect()
}

fn check_sectors(spec: &ConstellationSpec, sectors: u32) -> Result<()> {
    if sectors == 0 || sectors % (2 * spec.bases()) != 0 {
        return domain(format!("sectors = {sectors} must be a positive multiple of 2M = {}", 2 * spec.bases()));
    }
    Ok(())
}

/// `P(sector | k')` computed point by point, one row per basis. With known
/// plaintext `x`, rows condition on it; otherwise `x` is averaged.
pub fn transition_matrix(
    spec: &ConstellationSpec,
    model: &dyn PhaseNoise,
    policy: DsrPolicy,
    known: Option<bool>,
    sectors: u32,
) -> Result<Vec<Vec<f64>>> {
    check_sectors(spec, sectors)?;
    let w = TAU / sectors as f64;
    let xs: Vec<bool> = match known {
        Some(x) => vec![x],
        None => vec![false, true],
    };
    Ok((0..spec.bases())
        .map(|k| {
            (0..sectors)
                .map(|j| {
                    let centre = PhaseAngle::new(j as f64 * w);
                    xs.iter()
                        .map(|&x| {
                            let c = centre.diff(signal_phase_unchecked(x, BasisIndex(k), spec));
                            output_mass_at_offset(c - 0.5 * w, c + 0.5 * w, policy, model)
                        })
                        .sum::<f64>()
                        / xs.len() as f64
                })
                .collect()
        })
        .collect())
}

/// `I(input; output)` in bits for a uniform input over the rows of a
/// transition matrix, in the divergence form.
pub fn uniform_input_information(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let cols = rows[0].len();
    let r = rows.len() as f64;
    let q: Vec<f64> = (0..cols).map(|j| rows.iter().map(|row| row[j]).sum::<f64>() / r).collect();
    let mut total = 0.0;
    for row in rows {
        let s: f64 = row.iter().sum();
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                total += p / s * (p / s / (q[j] / q.iter().sum::<f64>())).log2();
            }
        }
    }
    (total / r).max(0.0)
}

/// Largest difference between any two rows of a transition matrix.
pub fn row_spread(rows: &[Vec<f64>]) -> f64 {
    let Some(first) = rows.first() else { return 0.0 };
    rows.iter()
        .flat_map(|row| row.iter().zip(first).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Uniform-input information rate of the key channel at `sectors`
/// resolution, using the rotation symmetry: every row is a shift of one
/// offset kernel by the signal points of its basis.
pub fn information_rate(
    spec: &ConstellationSpec,
    model: &dyn PhaseNoise,
    policy: DsrPolicy,
    scenario: &AttackScenario,
    sectors: u32,
) -> Result<f64> {
    check_sectors(spec, sectors)?;
    let h = offset_kernel(model, policy, sectors);
    let step = (sectors / (2 * spec.bases())) as usize;
    let n = sectors as usize;
    let shifted = |shifts: &[usize]| -> Vec<f64> {
        (0..n)
            .map(|j| shifts.iter().map(|&s| h[(j + n - s % n) % n]).sum::<f64>() / shifts.len() as f64)
            .collect()
    };
    let sets: Vec<Vec<Vec<usize>>> = match scenario {
        AttackScenario::Cta => vec![(0..spec.bases())
            .map(|k| vec![k as usize * step, (k + spec.bases()) as usize * step])
            .collect()],
        AttackScenario::Kpa(_) => [false, true]
            .iter()
            .map(|&x| {
                (0..spec.bases())
                    .map(|k| vec![point_index_unchecked(x, BasisIndex(k), spec).0 as usize * step])
                    .collect()
            })
            .collect(),
    };
    let mut rate = 0.0;
    for rows_of in &sets {
        let mut q = vec![0.0; n];
        for s in rows_of {
            let r = shifted(s);
            q.iter_mut().zip(&r).for_each(|(a, b)| *a += b);
        }
        let mut total = 0.0;
        for s in rows_of {
            let r = shifted(s);
            for j in 0..n {
                if r[j] > 0.0 {
                    total += r[j] * (r[j] * rows_of.len() as f64 / q[j]).log2();
                }
            }
        }
        rate += (total / rows_of.len() as f64).max(0.0);
    }
    Ok(rate / sets.len() as f64)
}

/// [`information_rate`] at `8M` sectors.
pub fn capacity_per_qumode(spec: &ConstellationSpec, model: &dyn PhaseNoise, policy: DsrPolicy, scenario: &AttackScenario) -> Result<f64> {
    information_rate(spec, model, policy, scenario, 8 * spec.bases())
}

/// `n` independent draws of a uniform key segment, a uniform data bit and
/// the resulting phase. Sharded so the output does not depend on the
/// thread count.
pub fn sample_key_channel(
    spec: &ConstellationSpec,
    model: &NoiseModel,
    policy: DsrPolicy,
    n: usize,
    seed: u64,
) -> Vec<(u32, PhaseAngle)> {
    let shards = n.div_ceil(SHARD);
    (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = stream(seed, &[label::SHARD, s as u64]);
            let len = SHARD.min(n - s * SHARD);
            (0..len)
                .map(|_| {
                    let k = BasisIndex(rng.random_range(0..spec.bases()));
                    let x: bool = rng.random();
                    (k.0, draw(x, k, spec, model, policy, &mut rng))
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn draw(x: bool, k: BasisIndex, spec: &ConstellationSpec, model: &NoiseModel, policy: DsrPolicy, rng: &mut dyn RngCore) -> PhaseAngle {
    let r = randomize_phase(signal_phase_unchecked(x, k, spec), policy, rng);
    sample_observation(r, model, rng).theta
}

/// Outcome of [`uniformity_certificate`].
#[derive(Clone, Debug)]
pub struct UniformityReport {
    /// Goodness of fit of each basis's phase histogram to uniform.
    pub per_key: Vec<TestOutcome>,
    /// Homogeneity of the histograms across bases.
    pub pooled: TestOutcome,
    pub bins: u32,
    pub samples_per_key: usize,
    /// Per-test level after Bonferroni correction.
    pub alpha: f64,
    pub pass: bool,
    /// Exact total-variation distance of the sector distribution of basis 0
    /// from uniform, and the largest relative sector deviation.
    pub total_variation: f64,
    pub max_relative_deviation: f64,
}

/// Overall level of [`uniformity_certificate`].
pub const CERTIFICATE_ALPHA: f64 = 1e-3;

/// Test that the output phase is uniform on the circle for every `k'`
/// when data bits are uniform.
pub fn uniformity_certificate(
    policy: DsrPolicy,
    model: &NoiseModel,
    spec: &ConstellationSpec,
    n: usize,
    seed: u64,
) -> Result<UniformityReport> {
    if n == 0 {
        return domain("need at least one sample per key");
    }
    let m = spec.bases();
    let bins = default_bins(m);
    let tables: Vec<Vec<u64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[label::SHARD, k as u64]);
            let mut h = vec![0u64; bins as usize];
            for _ in 0..n {
                let x: bool = rng.random();
                h[sector_of(draw(x, BasisIndex(k), spec, model, policy, &mut rng), bins) as usize] += 1;
            }
            h
        })
        .collect();
    let uniform = vec![1.0; bins as usize];
    let per_key: Vec<TestOutcome> = tables.iter().map(|h| chi_square_gof(h, &uniform)).collect();
    let flat: Vec<u64> = tables.concat();
    let pooled = chi_square_homogeneity(&flat, m as usize, bins as usize);
    let alpha = CERTIFICATE_ALPHA / (m as f64 + 1.0);
    let pass = per_key.iter().chain(std::iter::once(&pooled)).all(|t| !t.significant(alpha));

    let row = &transition_matrix(spec, model, policy, None, bins)?[0];
    let u = 1.0 / bins as f64;
    let total_variation = 0.5 * row.iter().map(|p| (p - u).abs()).sum::<f64>();
    let max_relative_deviation = row.iter().map(|p| (p / u - 1.0).abs()).fold(0.0, f64::max);
    Ok(UniformityReport {
        per_key,
        pooled,
        bins,
        samples_per_key: n,
        alpha,
        pass,
        total_variation,
        max_relative_deviation,
    })
}

/// Largest spread across bases of `p(theta | k')` on a grid of `grid`
/// phases.
pub fn key_dependence(
    spec: &ConstellationSpec,
    model: &dyn PhaseNoise,
    policy: DsrPolicy,
    grid: usize,
    method: crate::dsr::DensityMethod,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in 0..grid {
        // offset the grid so it avoids the constellation points
        let theta = PhaseAngle::new((g as f64 + 0.37) * TAU / grid as f64);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..spec.bases() {
            let p = crate::dsr::marginal_output_density_with(theta, BasisIndex(k), policy, model, spec, method)?;
            lo = lo.min(p);
            hi = hi.max(p);
        }
        worst = worst.max(hi - lo);
    }
    Ok(worst)
}

/// One rung of the scaling ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub photons: f64,
    pub bases: u32,
    /// The requested Gamma, identical on every row.
    pub gamma_target: f64,
    /// Gamma of the power-of-two constellation actually used.
    pub gamma: f64,
    pub policy: DsrPolicy,
    pub qumodes: u64,
    pub errors: u64,
    pub ber: f64,
    pub leakage: LeakageEstimate,
}

/// Power of two nearest to `pi * gamma * sqrt(S)` on a log scale.
pub fn bases_for_gamma(gamma: f64, photons: f64) -> u32 {
    let target = PI * gamma * photons.sqrt();
    let e = target.log2().round().clamp(0.0, 20.0) as u32;
    1 << e
}

/// Run the session at each signal level with `M` chosen to hold Gamma
/// fixed. Bob measures heterodyne; Eve's copy goes through a wedge whose
/// half-width is tiled exactly by the discrete randomization,
/// `pi / (2W)`, so her key channel is the one the wedge model describes.
///
/// `policy` is a config kind (`off`, `continuous`, `discrete`); a discrete
/// policy takes its wedge count from each rung's signal level.
pub fn gamma_scaling_experiment(
    gamma_target: f64,
    photons: &[f64],
    policy: &str,
    n: u64,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if !(gamma_target > 0.0) {
        return domain("Gamma must be positive");
    }
    let mut ladder = photons.to_vec();
    ladder.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(ladder.len());
    for (i, &s) in ladder.iter().enumerate() {
        let m = bases_for_gamma(gamma_target, s);
        let spec = ConstellationSpec::new(m, s)?;
        let dsr = DsrPolicy::from_kind(policy, None, &spec)?;
        let lfsr = LfsrSpec::from_u64(31, 0x9, 1 + stream(seed, &[label::KEYS, i as u64]).random_range(0..(1u64 << 31) - 1))?;
        let cfg = SessionConfig::new(spec, EncSpec::Lfsr(lfsr))?
            .with_policy(dsr)
            .with_seed(crate::rng::derive_seed(seed, &[label::TRIAL, i as u64]));
        let bob = measure_ber_seeded(&cfg, n, false)?;
        let eve = match dsr {
            DsrPolicy::DiscreteWedges(w) => NoiseModel::wedge(PI / (2.0 * w as f64))?,
            _ => NoiseModel::wedge(crate::channel::wedge_sigma(s))?,
        };
        let icp = intercept(&cfg, &eve, n as usize)?;
        let pairs: Vec<(u32, PhaseAngle)> = icp
            .bases
            .iter()
            .zip(&icp.observations.points)
            .map(|(k, o)| (k.0, o.theta))
            .collect();
        let leakage = estimate_key_leakage(&pairs, &spec, default_bins(m))?;
        rows.push(ScalingRow {
            photons: s,
            bases: m,
            gamma_target,
            gamma: gamma(&spec),
            policy: dsr,
            qumodes: bob.n,
            errors: bob.errors,
            ber: bob.ber,
            leakage,
        });
    }
    Ok(rows)
}
