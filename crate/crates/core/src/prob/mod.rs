//! Predictive marginal distributions per site and lead time.

pub mod cdf;
pub mod dressing;
pub mod io;
pub mod parametric;
pub mod qr;
pub mod quantiles;
pub mod variance;

pub use cdf::{cdf_eval, cdf_inverse, CdfRepr, PredictiveCdf};
pub use dressing::{dress_point_forecast, Dressed, DressingOptions, ErrorClimatology};
pub use parametric::{make_gln, make_parametric, select_gln_shape, Family, ParametricDensity};
pub use qr::{check_loss, fit_adaptive_qr, QrOptions, QuantileRegression};
pub use quantiles::{rearrange, DiscreteDistribution, QuantileSet};
pub use variance::VarianceTracker;

/// Default quantile levels: 0.05 to 0.95 in steps of 0.05.
pub fn default_levels() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}
