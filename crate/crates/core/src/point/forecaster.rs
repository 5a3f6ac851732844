//! Multi-lead point forecasters built from single-horizon models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::cp::{CparModel, CparSpec, CparxModel, CparxSpec};
use super::linear::{fit_linear, LinearModel, LinearSpec};
use super::{clip_unit, Inputs};

/// How k-step forecasts are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizonMode {
    /// One-step model applied recursively.
    Iterated,
    /// A separate model per lead time.
    Direct,
}

/// Model structure; the horizon of the template is replaced per lead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Linear(LinearSpec),
    Cpar(CparSpec),
    Cparx(CparxSpec),
}

impl ModelFamily {
    pub fn site(&self) -> usize {
        match self {
            ModelFamily::Linear(s) => s.site,
            ModelFamily::Cpar(s) => s.site,
            ModelFamily::Cparx(s) => s.site,
        }
    }

    fn with_horizon(&self, horizon: usize) -> Self {
        match self {
            ModelFamily::Linear(s) => ModelFamily::Linear(s.with_horizon(horizon)),
            ModelFamily::Cpar(s) => ModelFamily::Cpar(CparSpec { horizon, ..s.clone() }),
            ModelFamily::Cparx(s) => ModelFamily::Cparx(CparxSpec { horizon, ..s.clone() }),
        }
    }
}

/// A fitted single-horizon model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointModel {
    Linear(LinearModel),
    Cpar(CparModel),
    Cparx(CparxModel),
}

impl PointModel {
    pub fn fit(family: &ModelFamily, inputs: &Inputs) -> Result<Self> {
        Ok(match family {
            ModelFamily::Linear(s) => PointModel::Linear(fit_linear(s, inputs)?),
            ModelFamily::Cpar(s) => PointModel::Cpar(CparModel::fit(s, inputs)?),
            ModelFamily::Cparx(s) => PointModel::Cparx(CparxModel::fit(s, inputs)?),
        })
    }

    /// Unclipped forecast of its own horizon from origin `t`.
    pub fn predict_at(&self, inputs: &Inputs, t: usize) -> Result<f64> {
        match self {
            PointModel::Linear(m) => m.predict_at(inputs, t),
            PointModel::Cpar(m) => m.predict_at(inputs, t),
            PointModel::Cparx(m) => m.predict_at(inputs, t),
        }
    }

    /// Residual standard deviation.
    pub fn sigma(&self) -> f64 {
        match self {
            PointModel::Linear(m) => {
                let n: usize = m.regimes.iter().map(|r| r.rows).sum();
                let ss: f64 = m.regimes.iter().map(|r| r.sigma * r.sigma * r.rows as f64).sum();
                (ss / n.max(1) as f64).sqrt()
            }
            PointModel::Cpar(m) => m.sigma,
            PointModel::Cparx(m) => m.sigma,
        }
    }

    pub fn in_sample_rmse(&self) -> f64 {
        match self {
            PointModel::Linear(m) => m.in_sample_rmse,
            PointModel::Cpar(m) => m.in_sample_rmse,
            PointModel::Cparx(m) => m.in_sample_rmse,
        }
    }
}

/// Point forecasts for leads `1..=leads()` at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointForecaster {
    pub mode: HorizonMode,
    pub leads: usize,
    /// One model in iterated mode, one per lead in direct mode.
    pub models: Vec<PointModel>,
}

impl PointForecaster {
    pub fn fit(family: &ModelFamily, mode: HorizonMode, leads: usize, inputs: &Inputs) -> Result<Self> {
        if leads == 0 {
            return Err(Error::InvalidArgument("need at least one lead".into()));
        }
        let models = match mode {
            HorizonMode::Iterated => match family {
                ModelFamily::Linear(_) => vec![PointModel::fit(&family.with_horizon(1), inputs)?],
                _ => {
                    return Err(Error::Unsupported(
                        "iterated mode is only available for linear models".into(),
                    ))
                }
            },
            HorizonMode::Direct => match family {
                ModelFamily::Cparx(spec) => {
                    // One speed-to-power curve per lead bucket.
                    let buckets = leads.div_ceil(spec.bucket_hours.max(1));
                    let curves = (0..buckets)
                        .into_par_iter()
                        .map(|b| {
                            let s = CparxSpec {
                                horizon: b * spec.bucket_hours + 1,
                                ..spec.clone()
                            };
                            CparxModel::fit_curve(&s, inputs)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (1..=leads)
                        .into_par_iter()
                        .map(|k| {
                            let s = CparxSpec {
                                horizon: k,
                                ..spec.clone()
                            };
                            let curve = curves[(k - 1) / spec.bucket_hours];
                            Ok(PointModel::Cparx(CparxModel::fit_with_curve(&s, inputs, curve)?))
                        })
                        .collect::<Result<Vec<_>>>()?
                }
                _ => (1..=leads)
                    .into_par_iter()
                    .map(|k| PointModel::fit(&family.with_horizon(k), inputs))
                    .collect::<Result<Vec<_>>>()?,
            },
        };
        Ok(Self { mode, leads, models })
    }

    pub fn site(&self) -> usize {
        match &self.models[0] {
            PointModel::Linear(m) => m.spec.site,
            PointModel::Cpar(m) => m.spec.site,
            PointModel::Cparx(m) => m.spec.site,
        }
    }

    /// Forecasts for leads `1..=leads()` issued at origin `t`, clipped to
    /// `[0, 1]`.
    pub fn predict(&self, inputs: &Inputs, origin: usize) -> Result<Vec<f64>> {
        let raw = match self.mode {
            HorizonMode::Iterated => match &self.models[0] {
                PointModel::Linear(m) => m.predict_iterated(inputs, origin, self.leads)?,
                _ => return Err(Error::Unsupported("iterated mode needs a linear model".into())),
            },
            HorizonMode::Direct => self
                .models
                .iter()
                .map(|m| m.predict_at(inputs, origin))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(raw.into_iter().map(clip_unit).collect())
    }

    /// Residual standard deviation per lead (constant in iterated mode).
    pub fn sigmas(&self) -> Vec<f64> {
        match self.mode {
            HorizonMode::Iterated => vec![self.models[0].sigma(); self.leads],
            HorizonMode::Direct => self.models.iter().map(PointModel::sigma).collect(),
        }
    }
}
