//! Small numerical helpers shared across modules: standard normal functions,
//! empirical quantiles, a panelled Gauss-Legendre integrator and a
//! one-sample Kolmogorov-Smirnov test against the uniform distribution.

use libm::erfc;
use statrs::function::erf::erfc_inv;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate for large positive `x`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile. Returns ±∞ at the endpoints.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // One Newton step on the tail-appropriate side tightens erfc_inv.
    let step = if x <= 0.0 {
        (norm_cdf(x) - p) / norm_pdf(x)
    } else {
        ((1.0 - p) - norm_sf(x)) / norm_pdf(x)
    };
    if step.is_finite() {
        x - step
    } else {
        x
    }
}

/// Mills ratio `(1 - Φ(x)) / φ(x)` for `x >= 0`.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 6.0 {
        return norm_sf(x) / norm_pdf(x);
    }
    // Continued fraction, evaluated backwards.
    let mut acc = x;
    for k in (1..=60).rev() {
        acc = x + k as f64 / acc;
    }
    1.0 / acc
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Linear-interpolation quantile (type 7) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sort_f64(values: &mut [f64]) {
    values.sort_by(|a, b| a.total_cmp(b));
}

const GL_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Integrates `f` over `[lo, hi]` with roughly `panels` three-point
/// Gauss-Legendre panels. Points in `breaks` always fall on panel edges, so
/// jumps of the integrand located there are never evaluated.
pub fn integrate_panels(lo: f64, hi: f64, breaks: &[f64], panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut edges: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    edges.push(lo);
    edges.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    edges.push(hi);
    sort_f64(&mut edges);
    edges.dedup();
    let width = hi - lo;
    let mut total = 0.0;
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let count = (((b - a) / width) * panels as f64).ceil().max(1.0) as usize;
        let h = (b - a) / count as f64;
        for i in 0..count {
            let left = a + i as f64 * h;
            let mid = left + 0.5 * h;
            let mut panel = 0.0;
            for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                panel += weight * f(mid + 0.5 * h * node);
            }
            total += 0.5 * h * panel;
        }
    }
    total
}

/// Kolmogorov distribution survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut sum = 0.0;
        for j in 1..=20 {
            let k = (2 * j - 1) as f64;
            sum += (-k * k * pi2 / (8.0 * x * x)).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * x * x).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test of `samples` against U(0, 1).
pub fn ks_uniform(samples: &[f64]) -> KsResult {
    let mut sorted = samples.to_vec();
    sort_f64(&mut sorted);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let u = u.clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - u).max(u - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    }
}
