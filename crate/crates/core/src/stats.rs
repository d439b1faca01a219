//! Hypothesis tests used by the certification and acceptance paths.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

/// Outcome of a test: statistic, degrees of freedom (when meaningful) and
/// p-value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof).map(|d| d.sf(statistic)).unwrap_or(f64::NAN)
}

/// Pearson goodness of fit of `observed` counts against probabilities
/// `expected` (normalized internally). Cells with zero expectation must be
/// empty; they contribute no degree of freedom.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> TestOutcome {
    assert_eq!(observed.len(), expected.len());
    let n: u64 = observed.iter().sum();
    let total: f64 = expected.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(expected) {
        let e = n as f64 * p / total;
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else if o > 0 {
            stat = f64::INFINITY;
        }
    }
    let dof = cells.saturating_sub(1) as f64;
    TestOutcome {
        statistic: stat,
        dof,
        p_value: if stat.is_infinite() { 0.0 } else { chi_square_sf(stat, dof) },
    }
}

/// Chi-square test of homogeneity for a rows x cols contiguity table given
/// row-major. Empty rows and columns are dropped.
pub fn chi_square_homogeneity(table: &[u64], rows: usize, cols: usize) -> TestOutcome {
    assert_eq!(table.len(), rows * cols);
    let row_sums: Vec<u64> = (0..rows).map(|r| table[r * cols..(r + 1) * cols].iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|c| (0..rows).map(|r| table[r * cols + c]).sum()).collect();
    let n: u64 = row_sums.iter().sum();
    let mut stat = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            if row_sums[r] == 0 || col_sums[c] == 0 {
                continue;
            }
            let e = row_sums[r] as f64 * col_sums[c] as f64 / n as f64;
            stat += (table[r * cols + c] as f64 - e).powi(2) / e;
        }
    }
    let live_r = row_sums.iter().filter(|&&s| s > 0).count();
    let live_c = col_sums.iter().filter(|&&s| s > 0).count();
    let dof = (live_r.saturating_sub(1) * live_c.saturating_sub(1)) as f64;
    TestOutcome {
        statistic: stat,
        dof,
        p_value: chi_square_sf(stat, dof),
    }
}

/// Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value with the usual
/// small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestOutcome {
    assert!(!a.is_empty() && !b.is_empty());
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    TestOutcome {
        statistic: d,
        dof: ne,
        p_value: kolmogorov_q(lambda),
    }
}

/// One-sided binomial test: P(X >= successes) for X ~ Bin(trials, p).
pub fn binomial_upper_tail(successes: u64, trials: u64, p: f64) -> f64 {
    if successes == 0 {
        return 1.0;
    }
    let d = Binomial::new(p, trials).expect("valid binomial parameters");
    // sf(k) = P(X > k)
    d.sf(successes - 1)
}

/// Shannon entropy in bits of a binary distribution.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}
