//! Globally adaptive Gauss-Kronrod (7, 15) integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (i, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let pair = f(c - h * x) + f(c + h * x);
        kronrod += w * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Integration limits and budget.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub absolute: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            absolute: 1e-11,
            max_segments: 4000,
        }
    }
}

/// Integrate `f` over the union of `[points[i], points[i+1]]`. Breakpoints
/// should sit on discontinuities and bracket sharp peaks at roughly their
/// width; a peak narrower than the surrounding segment can be missed
/// entirely by the first 15-point rule.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let mut err = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let s = gk15(&f, w[0], w[1]);
            err += s.error;
            heap.push(s);
        }
    }
    while err > tol.absolute {
        if heap.len() >= tol.max_segments {
            let (lo, hi) = (points[0], *points.last().unwrap());
            return Err(Error::Quadrature {
                lo,
                hi,
                error: err,
                evaluations: heap.len() * 15,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        let (a, b) = (gk15(&f, worst.lo, mid), gk15(&f, mid, worst.hi));
        err += a.error + b.error - worst.error;
        heap.push(a);
        heap.push(b);
        if !(mid > worst.lo && mid < worst.hi) {
            // interval collapsed to machine precision
            break;
        }
    }
    // resum to shed cancellation accumulated in the running total
    Ok(heap.iter().map(|s| s.value).sum())
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64> {
    integrate_with_breaks(f, &[lo, hi], tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, Tolerance::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 9.0 + 3.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_and_discontinuous_integrands() {
        let s = 1e-3;
        let g = |x: f64| (-(x * x) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        let v = integrate_with_breaks(g, &[-PI, -12.0 * s, -5.0 * s, 0.0, 5.0 * s, 12.0 * s, PI], Tolerance::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
        let step = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let v = integrate_with_breaks(step, &[0.0, 0.3, 1.0], Tolerance::default()).unwrap();
        assert!((v - 0.3).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_reports_diagnostics() {
        let tol = Tolerance {
            absolute: 1e-15,
            max_segments: 3,
        };
        let err = integrate(|x: f64| (1.0 / x.max(1e-300)).sin(), 1e-6, 1.0, tol).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
