//! Quantile variants of the linear models: the same regressors fitted by
//! check loss, one model per lead.

use crate::error::{Error, Result};
use crate::prob::qr::{fit_adaptive_qr, QrOptions, QuantileRegression};
use crate::prob::QuantileSet;

use super::linear::LinearSpec;
use super::Inputs;

/// Direct-mode linear quantile models for leads `1..=leads`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileArModel {
    pub spec: LinearSpec,
    pub levels: Vec<f64>,
    /// One regression per lead.
    pub per_lead: Vec<QuantileRegression>,
}

impl QuantileArModel {
    /// Regime rules are ignored; the regressors are the intercept, own lags
    /// and off-site lags of `spec`.
    pub fn fit(spec: &LinearSpec, inputs: &Inputs, leads: usize, levels: &[f64], options: &QrOptions) -> Result<Self> {
        let base = LinearSpec {
            regime: None,
            ..spec.clone()
        };
        base.validate(inputs.target.n_sites())?;
        let per_lead = (1..=leads)
            .map(|k| {
                let rows = base.with_horizon(k).rows(inputs);
                let (x, y): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().map(|(_, _, x, y)| (x, y)).unzip();
                fit_adaptive_qr(&x, &y, levels, options)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: base,
            levels: levels.to_vec(),
            per_lead,
        })
    }

    /// Rearranged quantile sets per lead at origin `t`.
    pub fn predict(&self, inputs: &Inputs, origin: usize) -> Result<Vec<QuantileSet>> {
        let x = self.spec.regressors(inputs, origin).ok_or(Error::MissingCell {
            site: self.spec.site,
            time: origin,
        })?;
        self.per_lead.iter().map(|q| q.predict(&x)).collect()
    }
}

/// Per-lead forecasts of the `alpha` quantile, which must be one of the
/// fitted levels.
pub fn predict_quantile_point(model: &QuantileArModel, inputs: &Inputs, origin: usize, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            expected: "(0, 1)",
        });
    }
    let idx = model
        .levels
        .iter()
        .position(|a| (a - alpha).abs() < 1e-12)
        .ok_or_else(|| Error::InvalidArgument(format!("level {alpha} was not fitted")))?;
    Ok(model.predict(inputs, origin)?.iter().map(|q| q.values()[idx]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SiteSet;
    use crate::point::forecaster::{HorizonMode, ModelFamily, PointForecaster};
    use crate::sim::{simulate, SimConfig};

    #[test]
    fn median_tracks_conditional_mean_and_levels_order() {
        let mut cfg = SimConfig::homogeneous(SiteSet::uniform("s", 1, 1.0).unwrap(), 0.0, 6);
        // Mid-range speeds keep the power noise roughly symmetric.
        cfg.mean_speed = vec![10.0];
        cfg.speed_sd = 0.5;
        cfg.power_noise_sd = 0.05;
        let sim = simulate(&cfg, 20_000).unwrap();
        let inputs = Inputs::new(&sim.power, cfg.start);
        let spec = LinearSpec::ar(0, vec![1], 1);
        let leads = 3;
        let q = QuantileArModel::fit(&spec, &inputs, leads, &[0.25, 0.5, 0.75], &QrOptions::default()).unwrap();
        let mean = PointForecaster::fit(&ModelFamily::Linear(spec), HorizonMode::Direct, leads, &inputs).unwrap();
        let mut worst: f64 = 0.0;
        for origin in (1000..19_000).step_by(97) {
            let med = predict_quantile_point(&q, &inputs, origin, 0.5).unwrap();
            let lo = predict_quantile_point(&q, &inputs, origin, 0.25).unwrap();
            let hi = predict_quantile_point(&q, &inputs, origin, 0.75).unwrap();
            let m = mean.predict(&inputs, origin).unwrap();
            for k in 0..leads {
                worst = worst.max((med[k] - m[k]).abs());
                assert!(hi[k] >= lo[k]);
            }
        }
        assert!(worst < 0.02, "{worst}");
        assert!(predict_quantile_point(&q, &inputs, 5000, 0.0).is_err());
        assert!(predict_quantile_point(&q, &inputs, 5000, 0.4).is_err());
    }
}
