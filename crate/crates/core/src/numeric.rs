//! Small one-dimensional numerical helpers: composite Simpson quadrature with
//! panel doubling, golden-section maximization, log-sum-exp and grids.

use crate::error::{Error, Result};

/// Settings for [`simpson_doubling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    /// Panels used by the first estimate (rounded up to an even count).
    pub initial_panels: usize,
    /// Stop when successive estimates differ by less than this, relative.
    pub rel_tol: f64,
    /// Largest panel count attempted before giving up.
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            initial_panels: 4096,
            rel_tol: 1e-10,
            max_panels: 1 << 24,
        }
    }
}

/// Composite Simpson rule on `[a, b]`, doubling the panel count until two
/// successive estimates agree to `rel_tol`. Previously evaluated nodes are
/// reused, so each doubling costs one new evaluation per new panel.
pub fn simpson_doubling<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, q: &Quadrature) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut n = q.initial_panels.max(2);
    n += n % 2;
    let mut h = (b - a) / n as f64;
    // Split the running sums by node parity so they can be re-weighted.
    let ends = f(a) + f(b);
    let mut odd: f64 = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
    let mut even: f64 = (1..n / 2).map(|i| f(a + (2 * i) as f64 * h)).sum();
    let mut prev = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
    if !prev.is_finite() {
        return Err(Error::Numerical("quadrature integrand is not finite".into()));
    }
    while n < q.max_panels {
        n *= 2;
        h /= 2.0;
        even += odd;
        odd = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
        let cur = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        if !cur.is_finite() {
            return Err(Error::Numerical("quadrature integrand is not finite".into()));
        }
        if (cur - prev).abs() <= q.rel_tol * cur.abs() + f64::MIN_POSITIVE {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Convergence {
        what: "composite Simpson quadrature".into(),
        iterations: n,
        residual: prev,
        hint: "; the integrand is probably close to a singularity".into(),
    })
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        if (hi - lo).abs() <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `log Σ exp(x_i)`, computed with max subtraction. `-inf` for empty input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` log-spaced points from `a` to `b` (both positive).
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}
