//! Point forecasting: linear autoregressions with optional regime switching
//! and off-site lags, conditional-parametric variants, and their recursive
//! and quantile counterparts.

use chrono::{DateTime, Duration, Utc};

use crate::data::Observations;

pub mod cp;
pub mod document;
pub mod forecaster;
pub mod linear;
pub mod nwp;
pub mod quantile;
pub mod recursive;

pub use cp::{CovariateGrid, CparModel, CparSpec, CparxModel, CparxSpec, Kernel, LogisticCurve};
pub use document::{load_forecaster, save_forecaster};
pub use forecaster::{HorizonMode, ModelFamily, PointForecaster, PointModel};
pub use linear::{fit_linear, LinearModel, LinearSpec, OffsiteTerm, RegimeCovariate, RegimeFit, RegimeRule};
pub use nwp::{NwpSource, NwpTable, PerfectNwp};
pub use quantile::{predict_quantile_point, QuantileArModel};
pub use recursive::{fit_recursive, RecursiveFit};

/// Everything a model may read: the target panel, optional exogenous
/// covariates on the same time axis, and optional NWP forecasts.
#[derive(Clone, Copy)]
pub struct Inputs<'a> {
    pub target: &'a dyn Observations,
    pub covariates: Option<&'a dyn Observations>,
    pub nwp: Option<&'a dyn NwpSource>,
    /// Timestamp of time index 0.
    pub start: DateTime<Utc>,
}

impl<'a> Inputs<'a> {
    pub fn new(target: &'a dyn Observations, start: DateTime<Utc>) -> Self {
        Self {
            target,
            covariates: None,
            nwp: None,
            start,
        }
    }

    pub fn with_covariates(mut self, covariates: &'a dyn Observations) -> Self {
        self.covariates = Some(covariates);
        self
    }

    pub fn with_nwp(mut self, nwp: &'a dyn NwpSource) -> Self {
        self.nwp = Some(nwp);
        self
    }

    pub fn timestamp(&self, time: usize) -> DateTime<Utc> {
        self.start + Duration::hours(time as i64)
    }

    /// `Y_{site, time}` with out-of-range times treated as missing.
    pub(crate) fn y(&self, time: isize, site: usize) -> Option<f64> {
        if time < 0 || time as usize >= self.target.len() {
            return None;
        }
        self.target.value(time as usize, site)
    }
}

pub(crate) fn clip_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Persistence: `ŷ_{t+k|t} = y_t` for every lead.
pub fn persistence(inputs: &Inputs, site: usize, origin: usize, leads: usize) -> Option<Vec<f64>> {
    let last = inputs.y(origin as isize, site)?;
    Some(vec![last; leads])
}
