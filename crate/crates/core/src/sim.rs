//! Synthetic space-time wind generator.
//!
//! Latent wind speed per site is `mean + diurnal sine + AR(1) anomaly`, with
//! spatially correlated Gaussian innovations drawn through the Cholesky
//! factor of the configured correlation matrix. Speeds are floored at zero
//! and mapped to normalized power with a parametric power curve.

use chrono::{DateTime, Utc};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Panel, SiteSet, SpaceTimeSeries};
use crate::error::{Error, Result};
use crate::linalg::cholesky_with_jitter;

/// Piecewise power curve: zero below cut-in, power-law rise to nominal at
/// rated speed, flat until cut-off, zero at and above cut-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerCurveSpec {
    pub cut_in: f64,
    pub rated: f64,
    pub cut_off: f64,
    #[serde(default = "one")]
    pub nominal: f64,
    #[serde(default = "three")]
    pub ramp_shape: f64,
}

fn one() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

impl Default for PowerCurveSpec {
    /// Vestas V44 characteristics: 4, 16 and 25 m/s.
    fn default() -> Self {
        Self {
            cut_in: 4.0,
            rated: 16.0,
            cut_off: 25.0,
            nominal: 1.0,
            ramp_shape: 3.0,
        }
    }
}

impl PowerCurveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cut_in > 0.0 && self.cut_in < self.rated && self.rated < self.cut_off) {
            return Err(Error::InvalidArgument(
                "power curve needs 0 < cut_in < rated < cut_off".into(),
            ));
        }
        if !(self.nominal > 0.0 && self.nominal <= 1.0) || !(self.ramp_shape > 0.0) {
            return Err(Error::InvalidArgument(
                "power curve nominal must be in (0, 1] and ramp_shape positive".into(),
            ));
        }
        Ok(())
    }

    /// Normalized power at wind speed `v` (m/s).
    pub fn power(&self, v: f64) -> Result<f64> {
        if v < 0.0 || v.is_nan() {
            return Err(Error::OutOfRange {
                name: "wind speed",
                value: v,
                expected: ">= 0",
            });
        }
        Ok(self.power_unchecked(v))
    }

    pub(crate) fn power_unchecked(&self, v: f64) -> f64 {
        if v < self.cut_in || v >= self.cut_off {
            0.0
        } else if v >= self.rated {
            self.nominal
        } else {
            let x = (v - self.cut_in) / (self.rated - self.cut_in);
            self.nominal * x.powf(self.ramp_shape)
        }
    }
}

/// Optional two-regime switch on innovation volatility, keyed on whether the
/// previous hour's latent speed lies below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSwitch {
    pub threshold: f64,
    pub sd_below: f64,
    pub sd_above: f64,
}

/// Wind direction as a slowly varying AR(1) around a mean bearing (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    pub mean_deg: f64,
    pub sd_deg: f64,
    pub ar_coefficient: f64,
}

impl Default for DirectionSpec {
    fn default() -> Self {
        Self {
            mean_deg: 270.0,
            sd_deg: 60.0,
            ar_coefficient: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sites: SiteSet,
    /// Latent AR(1) coefficient per site.
    pub ar_coefficient: Vec<f64>,
    /// `m x m` correlation of the latent innovations.
    pub spatial_correlation: Vec<Vec<f64>>,
    pub diurnal_amplitude: f64,
    /// Hour of day at which the diurnal sine crosses zero upwards.
    pub diurnal_phase: f64,
    pub mean_speed: Vec<f64>,
    /// Innovation standard deviation of the latent anomaly (m/s).
    pub speed_sd: f64,
    pub seed: u64,
    pub regime: Option<RegimeSwitch>,
    pub curve: PowerCurveSpec,
    /// Heteroscedastic power scatter, scaled by `4 p (1 - p)`.
    pub power_noise_sd: f64,
    pub direction: DirectionSpec,
    pub start: DateTime<Utc>,
}

impl SimConfig {
    /// Homogeneous sites with exponentially decaying spatial correlation
    /// `rho^|i - j|`.
    pub fn homogeneous(sites: SiteSet, rho: f64, seed: u64) -> Self {
        let m = sites.len();
        let corr = (0..m)
            .map(|i| (0..m).map(|j| rho.powi((i as i32 - j as i32).abs())).collect())
            .collect();
        Self {
            ar_coefficient: vec![0.95; m],
            spatial_correlation: corr,
            diurnal_amplitude: 1.5,
            diurnal_phase: 9.0,
            mean_speed: vec![8.0; m],
            speed_sd: 1.2,
            seed,
            regime: None,
            curve: PowerCurveSpec::default(),
            power_noise_sd: 0.0,
            direction: DirectionSpec::default(),
            start: crate::data::parse_timestamp("2006-01-01T00:00:00Z").unwrap(),
            sites,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.sites.len();
        self.curve.validate()?;
        if self.ar_coefficient.len() != m || self.mean_speed.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.ar_coefficient.len().min(self.mean_speed.len()),
            });
        }
        if let Some(phi) = self.ar_coefficient.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::OutOfRange {
                name: "ar_coefficient",
                value: *phi,
                expected: "(0, 1)",
            });
        }
        if self.diurnal_amplitude < 0.0 || self.speed_sd < 0.0 || self.power_noise_sd < 0.0 {
            return Err(Error::InvalidArgument(
                "amplitudes and standard deviations must be >= 0".into(),
            ));
        }
        if let Some(r) = &self.regime {
            if r.sd_below < 0.0 || r.sd_above < 0.0 {
                return Err(Error::InvalidArgument("regime standard deviations must be >= 0".into()));
            }
        }
        let c = &self.spatial_correlation;
        if c.len() != m || c.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: c.len(),
            });
        }
        for i in 0..m {
            if (c[i][i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(
                    "spatial correlation needs a unit diagonal".into(),
                ));
            }
            for j in 0..i {
                if (c[i][j] - c[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("spatial correlation must be symmetric".into()));
                }
            }
        }
        Ok(())
    }

    fn correlation_matrix(&self) -> DMatrix<f64> {
        let m = self.sites.len();
        DMatrix::from_fn(m, m, |i, j| self.spatial_correlation[i][j])
    }
}

/// Output of [`simulate`]: power plus the latent fields used as oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub power: SpaceTimeSeries,
    pub speed: Panel,
    pub anomaly: Panel,
    pub direction: Panel,
}

pub fn diurnal_term(amplitude: f64, phase: f64, hour_of_day: f64) -> f64 {
    amplitude * (2.0 * std::f64::consts::PI * (hour_of_day - phase) / 24.0).sin()
}

/// Simulates `hours` hourly steps. Reproducible for a given seed.
pub fn simulate(config: &SimConfig, hours: usize) -> Result<SimOutput> {
    config.validate()?;
    if hours == 0 {
        return Err(Error::InvalidArgument("simulation needs hours >= 1".into()));
    }
    let m = config.sites.len();
    let (chol, _) = cholesky_with_jitter(&config.correlation_matrix())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let raw: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        (0..m).map(|i| (0..=i).map(|j| chol[(i, j)] * raw[j]).sum()).collect()
    };

    let start_hour = config.start.format("%H").to_string().parse::<f64>().unwrap_or(0.0);
    let dir = config.direction;
    let dir_innov = dir.sd_deg * (1.0 - dir.ar_coefficient * dir.ar_coefficient).sqrt();

    let init = draw(&mut rng);
    let mut anomaly: Vec<f64> = (0..m)
        .map(|s| {
            let phi = config.ar_coefficient[s];
            let sd = match &config.regime {
                Some(r) => 0.5 * (r.sd_below + r.sd_above),
                None => config.speed_sd,
            };
            sd / (1.0 - phi * phi).sqrt() * init[s]
        })
        .collect();
    let mut dir_anom: Vec<f64> = (0..m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            dir.sd_deg * z
        })
        .collect();
    let mut prev_speed: Vec<f64> = (0..m).map(|s| (config.mean_speed[s] + anomaly[s]).max(0.0)).collect();

    let mut speed_cols = vec![Vec::with_capacity(hours); m];
    let mut anom_cols = vec![Vec::with_capacity(hours); m];
    let mut dir_cols = vec![Vec::with_capacity(hours); m];
    let mut power_cols = vec![Vec::with_capacity(hours); m];
    for t in 0..hours {
        let eps = draw(&mut rng);
        let hod = (start_hour + t as f64) % 24.0;
        let diurnal = diurnal_term(config.diurnal_amplitude, config.diurnal_phase, hod);
        for s in 0..m {
            let sd = match &config.regime {
                Some(r) if prev_speed[s] < r.threshold => r.sd_below,
                Some(r) => r.sd_above,
                None => config.speed_sd,
            };
            anomaly[s] = config.ar_coefficient[s] * anomaly[s] + sd * eps[s];
            let v = (config.mean_speed[s] + diurnal + anomaly[s]).max(0.0);
            prev_speed[s] = v;
            let z: f64 = StandardNormal.sample(&mut rng);
            dir_anom[s] = dir.ar_coefficient * dir_anom[s] + dir_innov * z;
            let mut p = config.curve.power_unchecked(v);
            if config.power_noise_sd > 0.0 {
                let n: f64 = StandardNormal.sample(&mut rng);
                p = (p + config.power_noise_sd * 4.0 * p * (1.0 - p) * n).clamp(0.0, 1.0);
            }
            speed_cols[s].push(v);
            anom_cols[s].push(anomaly[s]);
            dir_cols[s].push((dir.mean_deg + dir_anom[s]).rem_euclid(360.0));
            power_cols[s].push(p.clamp(0.0, 1.0));
        }
    }
    let names = config.sites.ids().to_vec();
    Ok(SimOutput {
        power: SpaceTimeSeries::from_columns(config.sites.clone(), config.start, &power_cols)?,
        speed: Panel::from_columns(names.clone(), config.start, &speed_cols),
        anomaly: Panel::from_columns(names.clone(), config.start, &anom_cols),
        direction: Panel::from_columns(names, config.start, &dir_cols),
    })
}
