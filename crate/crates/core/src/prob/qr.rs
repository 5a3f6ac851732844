//! Linear quantile regression with exponential forgetting, solved by
//! majorize-minimize reweighted least squares on a smoothed check loss.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, NormalEquations};

use super::quantiles::QuantileSet;

/// Minimum number of training rows.
pub const MIN_QR_ROWS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrOptions {
    /// Residuals smaller than this are treated as this size when reweighting.
    pub smoothing: f64,
    /// Stop once no coefficient moves by more than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Forgetting factor: row `i` of `n` gets weight `λ^(n-1-i)`.
    pub forgetting: f64,
}

impl Default for QrOptions {
    fn default() -> Self {
        Self {
            smoothing: 1e-4,
            tolerance: 1e-8,
            max_iterations: 200,
            forgetting: 1.0,
        }
    }
}

/// Check loss `u (α - 1{u < 0})`.
pub fn check_loss(u: f64, alpha: f64) -> f64 {
    if u < 0.0 {
        u * (alpha - 1.0)
    } else {
        u * alpha
    }
}

/// Fitted linear model for a single level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    pub alpha: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Linear quantile models at a set of levels sharing one feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRegression {
    pub fits: Vec<LevelFit>,
}

impl QuantileRegression {
    pub fn levels(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.alpha).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.fits.iter().all(|f| f.converged)
    }

    /// Raw per-level predictions, possibly crossing.
    pub fn predict_raw(&self, x: &[f64]) -> Vec<f64> {
        self.fits.iter().map(|f| dot(&f.coefficients, x)).collect()
    }

    /// Clipped and rearranged quantile set for features `x`.
    pub fn predict(&self, x: &[f64]) -> Result<QuantileSet> {
        QuantileSet::new(self.levels(), self.predict_raw(x))
    }
}

/// Weighted check loss of `coefficients` on the data.
pub fn weighted_check_loss(features: &[Vec<f64>], y: &[f64], alpha: f64, forgetting: f64, coefficients: &[f64]) -> f64 {
    let n = y.len();
    features
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (x, &t))| forgetting.powi((n - 1 - i) as i32) * check_loss(t - dot(coefficients, x), alpha))
        .sum()
}

/// Fits one linear quantile model per level. Rows are in time order, oldest
/// first. Levels are fitted in parallel.
pub fn fit_adaptive_qr(
    features: &[Vec<f64>],
    y: &[f64],
    levels: &[f64],
    options: &QrOptions,
) -> Result<QuantileRegression> {
    if features.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: y.len(),
        });
    }
    if y.len() < MIN_QR_ROWS {
        return Err(Error::InsufficientSample {
            needed: MIN_QR_ROWS,
            got: y.len(),
        });
    }
    if levels.is_empty() || levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(Error::InvalidArgument("quantile levels must lie in (0, 1)".into()));
    }
    if !(options.forgetting > 0.0 && options.forgetting <= 1.0) {
        return Err(Error::OutOfRange {
            name: "quantile forgetting factor",
            value: options.forgetting,
            expected: "(0, 1]",
        });
    }
    let p = features[0].len();
    if features.iter().any(|x| x.len() != p) {
        return Err(Error::InvalidArgument("ragged feature rows".into()));
    }
    let n = y.len();
    let weights: Vec<f64> = (0..n).map(|i| options.forgetting.powi((n - 1 - i) as i32)).collect();

    let mut start = NormalEquations::new(p);
    for ((x, &t), &w) in features.iter().zip(y).zip(&weights) {
        start.add(x, t, w);
    }
    let start = start.solve()?;

    let fits = levels
        .par_iter()
        .map(|&alpha| fit_level(features, y, &weights, alpha, start.clone(), options))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileRegression { fits })
}

fn fit_level(
    features: &[Vec<f64>],
    y: &[f64],
    weights: &[f64],
    alpha: f64,
    mut beta: Vec<f64>,
    options: &QrOptions,
) -> Result<LevelFit> {
    let p = beta.len();
    let tilt = 2.0 * alpha - 1.0;
    for iteration in 1..=options.max_iterations {
        // Majorizer of |r| at the current residual r0: r²/(2 m) + m/2 with
        // m = max(|r0|, ε). The linear tilt (α - 1/2) r folds into a shifted
        // working response.
        let mut ne = NormalEquations::new(p);
        for ((x, &t), &c) in features.iter().zip(y).zip(weights) {
            let m = (t - dot(&beta, x)).abs().max(options.smoothing);
            ne.add(x, t + tilt * m, c / (2.0 * m));
        }
        let next = ne.solve()?;
        let change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next;
        if change < options.tolerance {
            return Ok(LevelFit {
                alpha,
                coefficients: beta,
                iterations: iteration,
                converged: true,
            });
        }
    }
    Ok(LevelFit {
        alpha,
        coefficients: beta,
        iterations: options.max_iterations,
        converged: false,
    })
}
