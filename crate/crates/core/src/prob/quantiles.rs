//! Nonparametric predictive distributions: quantile sets with exponential
//! tails, and finite discrete distributions.

use crate::error::{Error, Result};
use crate::stats::sort_f64;

/// `ρ e^ρ / (e^ρ - 1)`, the tail slope at the pinned quantile relative to
/// the linear (ρ = 0) tail.
fn tail_slope_factor(rho: f64) -> f64 {
    if rho.abs() < 1e-8 {
        1.0 + 0.5 * rho
    } else {
        rho / -(-rho).exp_m1()
    }
}

/// `(e^{ρu} - 1) / (e^ρ - 1)` on `u ∈ [0, 1]`.
fn tail_shape(rho: f64, u: f64) -> f64 {
    if rho.abs() < 1e-8 {
        u
    } else {
        (rho * u).exp_m1() / rho.exp_m1()
    }
}

/// Inverse of [`tail_shape`] in `u`.
fn tail_shape_inverse(rho: f64, p: f64) -> f64 {
    if rho.abs() < 1e-8 {
        p
    } else {
        ((p * rho.exp_m1()).ln_1p() / rho).clamp(0.0, 1.0)
    }
}

const MAX_TAIL_SHAPE: f64 = 700.0;

/// Solves `tail_slope_factor(ρ) = target` by bisection.
fn fit_tail_shape(target: f64) -> f64 {
    if !target.is_finite() || target >= MAX_TAIL_SHAPE {
        return MAX_TAIL_SHAPE;
    }
    if target <= 0.0 {
        return -MAX_TAIL_SHAPE;
    }
    let (mut lo, mut hi) = (-MAX_TAIL_SHAPE, MAX_TAIL_SHAPE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail_slope_factor(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Quantiles at fixed levels, linearly interpolated inside and closed by
/// exponential tails so that `cdf(0) = 0` and `cdf(1) = 1`. A quantile that
/// sits exactly on 0 or 1 turns the corresponding tail into a point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSet {
    levels: Vec<f64>,
    values: Vec<f64>,
    lower_shape: f64,
    upper_shape: f64,
}

impl QuantileSet {
    /// Clips `values` to `[0, 1]`, rearranges them into nondecreasing order
    /// and fits both tails to the outermost interior slopes.
    pub fn new(levels: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptySample);
        }
        if levels.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: levels.len(),
                got: values.len(),
            });
        }
        for w in levels.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidArgument(
                    "quantile levels must be strictly increasing".into(),
                ));
            }
        }
        if levels[0] <= 0.0 || levels[levels.len() - 1] >= 1.0 {
            return Err(Error::InvalidArgument("quantile levels must lie in (0, 1)".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("quantile values must be finite".into()));
        }
        let mut values: Vec<f64> = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        rearrange(&mut values);
        let (lower_shape, upper_shape) = fit_tails(&levels, &values);
        Ok(Self {
            levels,
            values,
            lower_shape,
            upper_shape,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dimensionless decay shapes of the lower and upper tails.
    pub fn tail_shapes(&self) -> (f64, f64) {
        (self.lower_shape, self.upper_shape)
    }

    fn first(&self) -> (f64, f64) {
        (self.levels[0], self.values[0])
    }

    fn last(&self) -> (f64, f64) {
        let l = self.levels.len() - 1;
        (self.levels[l], self.values[l])
    }

    pub fn mass_at_zero(&self) -> f64 {
        let (a1, q1) = self.first();
        if q1 > 0.0 {
            return 0.0;
        }
        // Largest level whose quantile is still zero.
        let mut mass = a1;
        for (a, q) in self.levels.iter().zip(&self.values) {
            if *q > 0.0 {
                break;
            }
            mass = *a;
        }
        mass
    }

    pub fn mass_at_one(&self) -> f64 {
        let (al, ql) = self.last();
        if ql < 1.0 {
            return 0.0;
        }
        let mut mass = 1.0 - al;
        for (a, q) in self.levels.iter().zip(&self.values).rev() {
            if *q < 1.0 {
                break;
            }
            mass = 1.0 - a;
        }
        mass
    }

    fn lower_tail(&self, y: f64) -> f64 {
        let (a1, q1) = self.first();
        a1 * tail_shape(self.lower_shape, y / q1)
    }

    fn upper_tail(&self, y: f64) -> f64 {
        let (al, ql) = self.last();
        1.0 - (1.0 - al) * tail_shape(self.upper_shape, (1.0 - y) / (1.0 - ql))
    }

    fn interpolate(&self, i: usize, y: f64) -> f64 {
        let (q0, q1) = (self.values[i], self.values[i + 1]);
        let (a0, a1) = (self.levels[i], self.levels[i + 1]);
        a0 + (a1 - a0) * (y - q0) / (q1 - q0)
    }

    /// `P(Y <= y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        let (_, q1) = self.first();
        let (_, ql) = self.last();
        if y < q1 {
            return self.lower_tail(y);
        }
        if y >= ql {
            return self.upper_tail(y);
        }
        // Largest i with q_i <= y; i < l - 1 because y < q_l.
        let i = self.values.partition_point(|q| *q <= y) - 1;
        self.interpolate(i, y)
    }

    /// `P(Y < y)`.
    pub fn cdf_left(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y > 1.0 {
            return 1.0;
        }
        let (_, q1) = self.first();
        let (_, ql) = self.last();
        if y <= q1 {
            return self.lower_tail(y);
        }
        if y > ql {
            return self.upper_tail(y);
        }
        if y == 1.0 {
            return 1.0 - self.mass_at_one();
        }
        // Largest i with q_i < y; q_{i+1} >= y.
        let i = self.values.partition_point(|q| *q < y) - 1;
        self.interpolate(i, y)
    }

    /// `inf { y : cdf(y) >= alpha }`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let alpha = alpha.clamp(0.0, 1.0);
        let (a1, q1) = self.first();
        let (al, ql) = self.last();
        if alpha <= a1 {
            if q1 == 0.0 || alpha == 0.0 {
                return 0.0;
            }
            return q1 * tail_shape_inverse(self.lower_shape, alpha / a1);
        }
        if alpha >= al {
            if alpha == al {
                return ql;
            }
            if ql == 1.0 {
                return 1.0;
            }
            let u = tail_shape_inverse(self.upper_shape, (1.0 - alpha) / (1.0 - al));
            return 1.0 - u * (1.0 - ql);
        }
        let i = self.levels.partition_point(|a| *a <= alpha) - 1;
        let (a0, a1) = (self.levels[i], self.levels[i + 1]);
        let (q0, q1) = (self.values[i], self.values[i + 1]);
        q0 + (alpha - a0) / (a1 - a0) * (q1 - q0)
    }

    /// Kinks and atoms of the CDF.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.values.clone();
        b.dedup();
        b
    }
}

/// Sorts quantile values into nondecreasing order. Idempotent.
pub fn rearrange(values: &mut [f64]) {
    sort_f64(values);
}

fn fit_tails(levels: &[f64], values: &[f64]) -> (f64, f64) {
    let l = levels.len();
    if l < 2 {
        return (0.0, 0.0);
    }
    let lower = {
        let (a1, q1) = (levels[0], values[0]);
        let gap = values[1] - q1;
        if q1 <= 0.0 {
            0.0
        } else if gap <= 0.0 {
            MAX_TAIL_SHAPE
        } else {
            let slope = (levels[1] - a1) / gap;
            fit_tail_shape(slope * q1 / a1)
        }
    };
    let upper = {
        let (al, ql) = (levels[l - 1], values[l - 1]);
        let gap = ql - values[l - 2];
        if ql >= 1.0 {
            0.0
        } else if gap <= 0.0 {
            MAX_TAIL_SHAPE
        } else {
            let slope = (al - levels[l - 2]) / gap;
            fit_tail_shape(slope * (1.0 - ql) / (1.0 - al))
        }
    };
    (lower, upper)
}

/// Finite distribution over atoms in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    /// Atoms are sorted and merged; probabilities must be nonnegative and sum
    /// to one within 1e-9.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySample);
        }
        for &(v, p) in &atoms {
            if !(0.0..=1.0).contains(&v) || !(p >= 0.0) {
                return Err(Error::InvalidArgument(format!("invalid atom ({v}, {p})")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("atom probabilities sum to {total}")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::new(vec![(value, 1.0)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y >= 1.0 {
            return 1.0;
        }
        self.atoms
            .iter()
            .take_while(|a| a.0 <= y)
            .map(|a| a.1)
            .sum::<f64>()
            .min(1.0)
    }

    pub fn cdf_left(&self, y: f64) -> f64 {
        if y > 1.0 {
            return 1.0;
        }
        self.atoms
            .iter()
            .take_while(|a| a.0 < y)
            .map(|a| a.1)
            .sum::<f64>()
            .min(1.0)
    }

    pub fn quantile(&self, alpha: f64) -> f64 {
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if acc >= alpha - 1e-12 {
                return v;
            }
        }
        self.atoms[self.atoms.len() - 1].0
    }

    pub fn mass_at(&self, y: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == y).map(|a| a.1).sum()
    }
}
