use crate::error::{Error, Result};
use crate::stats::integrate_panels;

use super::parametric::ParametricDensity;
use super::quantiles::{DiscreteDistribution, QuantileSet};

/// Representation behind a [`PredictiveCdf`].
#[derive(Debug, Clone, PartialEq)]
pub enum CdfRepr {
    Parametric(ParametricDensity),
    Quantiles(QuantileSet),
    Discrete(DiscreteDistribution),
}

/// Predictive distribution of normalized power for one site and lead time.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveCdf {
    pub site: usize,
    pub lead: usize,
    pub repr: CdfRepr,
}

impl PredictiveCdf {
    pub fn new(site: usize, lead: usize, repr: CdfRepr) -> Self {
        Self { site, lead, repr }
    }

    pub fn parametric(site: usize, lead: usize, density: ParametricDensity) -> Self {
        Self::new(site, lead, CdfRepr::Parametric(density))
    }

    pub fn quantiles(site: usize, lead: usize, set: QuantileSet) -> Self {
        Self::new(site, lead, CdfRepr::Quantiles(set))
    }

    /// `P(Y <= y)`, total on the real line.
    pub fn cdf(&self, y: f64) -> f64 {
        match &self.repr {
            CdfRepr::Parametric(d) => d.cdf(y),
            CdfRepr::Quantiles(q) => q.cdf(y),
            CdfRepr::Discrete(d) => d.cdf(y),
        }
    }

    /// `P(Y < y)`.
    pub fn cdf_left(&self, y: f64) -> f64 {
        match &self.repr {
            CdfRepr::Parametric(d) => d.cdf_left(y),
            CdfRepr::Quantiles(q) => q.cdf_left(y),
            CdfRepr::Discrete(d) => d.cdf_left(y),
        }
    }

    /// Generalized inverse `inf { y : cdf(y) >= alpha }`, total on `[0, 1]`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        match &self.repr {
            CdfRepr::Parametric(d) => d.quantile(alpha),
            CdfRepr::Quantiles(q) => q.quantile(alpha),
            CdfRepr::Discrete(d) => d.quantile(alpha),
        }
    }

    /// Checked evaluation for `y ∈ [0, 1]`.
    pub fn eval(&self, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfRange {
                name: "y",
                value: y,
                expected: "[0, 1]",
            });
        }
        Ok(self.cdf(y))
    }

    /// Checked inverse for `alpha ∈ (0, 1)`.
    pub fn inverse(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: alpha,
                expected: "(0, 1)",
            });
        }
        Ok(self.quantile(alpha))
    }

    pub fn mass_at_zero(&self) -> f64 {
        match &self.repr {
            CdfRepr::Parametric(d) => d.mass_at_zero(),
            CdfRepr::Quantiles(q) => q.mass_at_zero(),
            CdfRepr::Discrete(d) => d.mass_at(0.0),
        }
    }

    pub fn mass_at_one(&self) -> f64 {
        match &self.repr {
            CdfRepr::Parametric(d) => d.mass_at_one(),
            CdfRepr::Quantiles(q) => q.mass_at_one(),
            CdfRepr::Discrete(d) => d.mass_at(1.0),
        }
    }

    /// Points where the CDF jumps or has a kink; quadrature panels should
    /// end on them.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.repr {
            CdfRepr::Parametric(_) => Vec::new(),
            CdfRepr::Quantiles(q) => q.breakpoints(),
            CdfRepr::Discrete(d) => d.atoms().iter().map(|a| a.0).collect(),
        }
    }

    /// `E[Y] = ∫_0^1 (1 - F(y)) dy`.
    pub fn mean(&self) -> f64 {
        match &self.repr {
            CdfRepr::Parametric(d) => d.mean(),
            CdfRepr::Discrete(d) => d.atoms().iter().map(|(v, p)| v * p).sum(),
            CdfRepr::Quantiles(_) => integrate_panels(0.0, 1.0, &self.breakpoints(), 2000, |y| 1.0 - self.cdf(y)),
        }
    }
}

/// Free-function form of [`PredictiveCdf::eval`].
pub fn cdf_eval(f: &PredictiveCdf, y: f64) -> Result<f64> {
    f.eval(y)
}

/// Free-function form of [`PredictiveCdf::inverse`].
pub fn cdf_inverse(f: &PredictiveCdf, alpha: f64) -> Result<f64> {
    f.inverse(alpha)
}
