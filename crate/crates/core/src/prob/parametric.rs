//! Parametric predictive densities on `[0, 1]`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::stats::{integrate_panels, mills_ratio, norm_cdf, norm_pdf, norm_quantile, norm_sf};

/// Density families available for parametric predictive densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    TruncatedGaussian,
    CensoredGaussian,
    GeneralizedLogitNormal,
    Beta,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::TruncatedGaussian => "truncated-gaussian",
            Family::CensoredGaussian => "censored-gaussian",
            Family::GeneralizedLogitNormal => "generalized-logit-normal",
            Family::Beta => "beta",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "truncated-gaussian" => Family::TruncatedGaussian,
            "censored-gaussian" => Family::CensoredGaussian,
            "generalized-logit-normal" => Family::GeneralizedLogitNormal,
            "beta" => Family::Beta,
            _ => return None,
        })
    }
}

/// Shape parameters tried when profiling the generalized logit-normal `nu`.
pub const GLN_SHAPE_GRID: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParametricDensity {
    /// Gaussian `N(mu, sigma^2)` renormalized on `[0, 1]`.
    TruncatedGaussian {
        mu: f64,
        sigma: f64,
    },
    /// Gaussian with the mass outside `[0, 1]` piled on the bounds.
    CensoredGaussian {
        mu: f64,
        sigma: f64,
    },
    /// `log(y^nu / (1 - y^nu)) ~ N(mu, sigma^2)`. Values below `censor` are
    /// reported as 0 and values above `1 - censor` as 1.
    GeneralizedLogitNormal {
        mu: f64,
        sigma: f64,
        nu: f64,
        censor: f64,
    },
    Beta {
        a: f64,
        b: f64,
    },
}

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "sigma",
            value: sigma,
            expected: "> 0",
        })
    }
}

impl ParametricDensity {
    pub fn truncated_gaussian(mu: f64, sigma: f64) -> Result<Self> {
        check_scale(sigma)?;
        Ok(Self::TruncatedGaussian { mu, sigma })
    }

    pub fn censored_gaussian(mu: f64, sigma: f64) -> Result<Self> {
        check_scale(sigma)?;
        Ok(Self::CensoredGaussian { mu, sigma })
    }

    pub fn generalized_logit_normal(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        Self::censored_logit_normal(mu, sigma, nu, 0.0)
    }

    pub fn censored_logit_normal(mu: f64, sigma: f64, nu: f64, censor: f64) -> Result<Self> {
        check_scale(sigma)?;
        if !(nu > 0.0) {
            return Err(Error::OutOfRange {
                name: "nu",
                value: nu,
                expected: "> 0",
            });
        }
        if !(0.0..0.5).contains(&censor) {
            return Err(Error::OutOfRange {
                name: "censor",
                value: censor,
                expected: "[0, 0.5)",
            });
        }
        Ok(Self::GeneralizedLogitNormal { mu, sigma, nu, censor })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta parameters must be positive, got ({a}, {b})"
            )));
        }
        Ok(Self::Beta { a, b })
    }

    /// Beta density with the given mean and variance.
    pub fn beta_from_moments(mean: f64, variance: f64) -> Result<Self> {
        if !(mean > 0.0 && mean < 1.0) || !(variance > 0.0) || variance >= mean * (1.0 - mean) {
            return Err(Error::InfeasibleVariance { mean, variance });
        }
        let k = mean * (1.0 - mean) / variance - 1.0;
        Self::beta(mean * k, (1.0 - mean) * k)
    }

    pub fn family(&self) -> Family {
        match self {
            Self::TruncatedGaussian { .. } => Family::TruncatedGaussian,
            Self::CensoredGaussian { .. } => Family::CensoredGaussian,
            Self::GeneralizedLogitNormal { .. } => Family::GeneralizedLogitNormal,
            Self::Beta { .. } => Family::Beta,
        }
    }

    /// Probability of exactly zero.
    pub fn mass_at_zero(&self) -> f64 {
        match *self {
            Self::CensoredGaussian { mu, sigma } => norm_cdf(-mu / sigma),
            Self::GeneralizedLogitNormal { censor, .. } if censor > 0.0 => self.gln_raw_cdf(censor),
            _ => 0.0,
        }
    }

    /// Probability of exactly one.
    pub fn mass_at_one(&self) -> f64 {
        match *self {
            Self::CensoredGaussian { mu, sigma } => norm_sf((1.0 - mu) / sigma),
            Self::GeneralizedLogitNormal { censor, .. } if censor > 0.0 => 1.0 - self.gln_raw_cdf(1.0 - censor),
            _ => 0.0,
        }
    }

    /// `P(Y <= y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        match *self {
            Self::TruncatedGaussian { mu, sigma } => truncated_cdf(mu, sigma, y),
            Self::CensoredGaussian { mu, sigma } => norm_cdf((y - mu) / sigma),
            Self::GeneralizedLogitNormal { censor, .. } => {
                if y < censor {
                    self.gln_raw_cdf(censor)
                } else if y >= 1.0 - censor && censor > 0.0 {
                    self.gln_raw_cdf(1.0 - censor)
                } else {
                    self.gln_raw_cdf(y)
                }
            }
            Self::Beta { a, b } => beta_reg(a, b, y),
        }
    }

    /// `P(Y < y)`; differs from [`cdf`](Self::cdf) only at atoms.
    pub fn cdf_left(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y > 1.0 {
            return 1.0;
        }
        if y == 1.0 {
            return 1.0 - self.mass_at_one();
        }
        match *self {
            Self::GeneralizedLogitNormal { censor, .. } if censor > 0.0 && y <= censor => self.gln_raw_cdf(censor),
            _ => self.cdf(y),
        }
    }

    /// Density of the continuous part on `(0, 1)`.
    pub fn pdf(&self, y: f64) -> f64 {
        if y <= 0.0 || y >= 1.0 {
            return 0.0;
        }
        match *self {
            Self::TruncatedGaussian { mu, sigma } => {
                norm_pdf((y - mu) / sigma) / (sigma * truncated_normalizer(mu, sigma))
            }
            Self::CensoredGaussian { mu, sigma } => norm_pdf((y - mu) / sigma) / sigma,
            Self::GeneralizedLogitNormal { mu, sigma, nu, censor } => {
                if y < censor || y > 1.0 - censor {
                    return 0.0;
                }
                let yn = y.powf(nu);
                let x = (yn / (1.0 - yn)).ln();
                norm_pdf((x - mu) / sigma) / sigma * nu / (y * (1.0 - yn))
            }
            Self::Beta { a, b } => {
                let ln_b = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
                ((a - 1.0) * y.ln() + (b - 1.0) * (1.0 - y).ln() - ln_b).exp()
            }
        }
    }

    /// `inf { y : P(Y <= y) >= alpha }` for `alpha` in `[0, 1]`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let alpha = alpha.clamp(0.0, 1.0);
        match *self {
            Self::TruncatedGaussian { mu, sigma } => truncated_quantile(mu, sigma, alpha),
            Self::CensoredGaussian { mu, sigma } => (mu + sigma * norm_quantile(alpha)).clamp(0.0, 1.0),
            Self::GeneralizedLogitNormal { mu, sigma, nu, censor } => {
                let x = mu + sigma * norm_quantile(alpha);
                let y = logistic(x).powf(1.0 / nu);
                if y < censor {
                    0.0
                } else if censor > 0.0 && y > 1.0 - censor {
                    1.0
                } else {
                    y
                }
            }
            Self::Beta { .. } => bisect_quantile(|y| self.cdf(y), alpha),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::TruncatedGaussian { mu, sigma } => truncated_mean(mu, sigma),
            Self::CensoredGaussian { mu, sigma } => censored_mean(mu, sigma),
            Self::Beta { a, b } => a / (a + b),
            Self::GeneralizedLogitNormal { .. } => integrate_panels(0.0, 1.0, &[], 4000, |y| 1.0 - self.cdf(y)),
        }
    }

    pub fn variance(&self) -> f64 {
        if let Self::Beta { a, b } = *self {
            return a * b / ((a + b) * (a + b) * (a + b + 1.0));
        }
        // E[Y^2] = ∫ 2y (1 - F(y)) dy on [0, 1].
        let m2 = integrate_panels(0.0, 1.0, &[], 4000, |y| 2.0 * y * (1.0 - self.cdf(y)));
        let m = self.mean();
        (m2 - m * m).max(0.0)
    }

    fn gln_raw_cdf(&self, y: f64) -> f64 {
        let Self::GeneralizedLogitNormal { mu, sigma, nu, .. } = *self else {
            unreachable!()
        };
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        norm_cdf((gln_transform(y, nu) - mu) / sigma)
    }
}

/// `log(y^nu / (1 - y^nu))`.
pub fn gln_transform(y: f64, nu: f64) -> f64 {
    let yn = y.powf(nu);
    (yn / (1.0 - yn)).ln()
}

fn gln_transform_derivative(y: f64, nu: f64) -> f64 {
    nu / (y * (1.0 - y.powf(nu)))
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Bisection for the smallest `y` with `cdf(y) >= alpha`, to 1e-12 in `y`.
pub(crate) fn bisect_quantile(cdf: impl Fn(f64) -> f64, alpha: f64) -> f64 {
    if cdf(0.0) >= alpha {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) >= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

// Truncated Gaussian helpers. For `mu < 0` probabilities are expressed through
// Mills ratios so that masses far in the upper tail keep relative precision;
// `mu > 1` is handled by reflection.

fn truncated_normalizer(mu: f64, sigma: f64) -> f64 {
    norm_cdf((1.0 - mu) / sigma) - norm_cdf(-mu / sigma)
}

fn truncated_cdf(mu: f64, sigma: f64, y: f64) -> f64 {
    if mu > 1.0 {
        return 1.0 - truncated_cdf_left_tail(1.0 - mu, sigma, 1.0 - y);
    }
    if mu < 0.0 {
        return truncated_cdf_left_tail(mu, sigma, y);
    }
    let lo = norm_cdf(-mu / sigma);
    ((norm_cdf((y - mu) / sigma) - lo) / truncated_normalizer(mu, sigma)).clamp(0.0, 1.0)
}

/// CDF for `mu < 0`, where all of `[0, 1]` lies in the upper Gaussian tail.
fn truncated_cdf_left_tail(mu: f64, sigma: f64, y: f64) -> f64 {
    let a = -mu / sigma;
    let z = (y - mu) / sigma;
    let b = (1.0 - mu) / sigma;
    let ez = (0.5 * (a * a - z * z)).exp();
    let eb = (0.5 * (a * a - b * b)).exp();
    let ma = mills_ratio(a);
    ((ma - mills_ratio(z) * ez) / (ma - mills_ratio(b) * eb)).clamp(0.0, 1.0)
}

fn truncated_mean(mu: f64, sigma: f64) -> f64 {
    if mu > 1.0 {
        return 1.0 - truncated_mean(1.0 - mu, sigma);
    }
    if mu < 0.0 {
        let a = -mu / sigma;
        let b = (1.0 - mu) / sigma;
        let d = (0.5 * (a * a - b * b)).exp();
        let ratio = (1.0 - d) / (mills_ratio(a) - mills_ratio(b) * d);
        return (mu + sigma * ratio).clamp(0.0, 1.0);
    }
    let a = -mu / sigma;
    let b = (1.0 - mu) / sigma;
    (mu + sigma * (norm_pdf(a) - norm_pdf(b)) / truncated_normalizer(mu, sigma)).clamp(0.0, 1.0)
}

fn truncated_quantile(mu: f64, sigma: f64, alpha: f64) -> f64 {
    if (0.0..=1.0).contains(&mu) {
        let lo = norm_cdf(-mu / sigma);
        let z = truncated_normalizer(mu, sigma);
        if z > 1e-10 {
            return (mu + sigma * norm_quantile(lo + alpha * z)).clamp(0.0, 1.0);
        }
    }
    bisect_quantile(|y| truncated_cdf(mu, sigma, y), alpha)
}

fn censored_mean(mu: f64, sigma: f64) -> f64 {
    let a = -mu / sigma;
    let b = (1.0 - mu) / sigma;
    let inner = mu * (norm_cdf(b) - norm_cdf(a)) + sigma * (norm_pdf(a) - norm_pdf(b));
    (inner + norm_sf(b)).clamp(0.0, 1.0)
}

/// Builds a density whose scale follows the tracked variance and whose
/// location is set so that the mean equals `point` (for the generalized
/// logit-normal, the median on the transformed scale).
pub fn make_parametric(point: f64, variance: f64, family: Family) -> Result<ParametricDensity> {
    if !(0.0..=1.0).contains(&point) {
        return Err(Error::OutOfRange {
            name: "point forecast",
            value: point,
            expected: "[0, 1]",
        });
    }
    if !(variance > 0.0) {
        return Err(Error::OutOfRange {
            name: "variance",
            value: variance,
            expected: "> 0",
        });
    }
    let sigma = variance.sqrt();
    match family {
        Family::Beta => ParametricDensity::beta_from_moments(point, variance),
        Family::CensoredGaussian => {
            let mu = solve_location(point, |mu| censored_mean(mu, sigma));
            ParametricDensity::censored_gaussian(mu, sigma)
        }
        Family::TruncatedGaussian => {
            let target = point.clamp(1e-6, 1.0 - 1e-6);
            let mu = solve_location(target, |mu| truncated_mean(mu, sigma));
            ParametricDensity::truncated_gaussian(mu, sigma)
        }
        Family::GeneralizedLogitNormal => make_gln(point, variance, 1.0),
    }
}

/// Largest transformed-scale spread produced by [`make_gln`]. Beyond this the
/// delta method has long stopped being meaningful and the density is
/// already piled up against both bounds.
pub const GLN_MAX_SIGMA: f64 = 4.0;

/// Generalized logit-normal with shape `nu`, median at `point` and the
/// transformed-scale spread given by the delta method.
pub fn make_gln(point: f64, variance: f64, nu: f64) -> Result<ParametricDensity> {
    let y = point.clamp(1e-3, 1.0 - 1e-3);
    let mu = gln_transform(y, nu);
    let sigma = (variance.sqrt() * gln_transform_derivative(y, nu)).min(GLN_MAX_SIGMA);
    ParametricDensity::generalized_logit_normal(mu, sigma, nu)
}

/// Profile-likelihood choice of the GLN shape over [`GLN_SHAPE_GRID`], from
/// `(point, variance, observation)` triples. Boundary observations are
/// skipped.
pub fn select_gln_shape(records: &[(f64, f64, f64)]) -> Result<f64> {
    let mut best = None;
    for &nu in GLN_SHAPE_GRID.iter() {
        let mut ll = 0.0;
        let mut used = 0usize;
        for &(point, var, y) in records {
            if y <= 0.0 || y >= 1.0 {
                continue;
            }
            let d = make_gln(point, var, nu)?;
            ll += d.pdf(y).max(1e-300).ln();
            used += 1;
        }
        if used == 0 {
            return Err(Error::EmptySample);
        }
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((nu, ll));
        }
    }
    Ok(best.unwrap().0)
}

/// Monotone bisection on the location parameter.
fn solve_location(target: f64, mean_of: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 2.0);
    for _ in 0..80 {
        if mean_of(lo) <= target {
            break;
        }
        lo = 2.0 * lo - 1.0;
    }
    for _ in 0..80 {
        if mean_of(hi) >= target {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}
