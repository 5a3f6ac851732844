//! File-based batch stages. Each stage reads what the earlier stages wrote
//! to the output directory (or the data files named in the config) and
//! writes its own CSV/TOML artifacts next to them.
//!
//! Forecasts are issued once a day at the gate hour over the hours that
//! follow `model.train_hours`; everything before that is used for fitting.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FamilyName, ProbMethod, RunConfig};
use crate::copula::{
    read_trajectories, sample_trajectories, to_latent, write_trajectories, LatentCovariance, MarginalSet, TrajectorySet,
};
use crate::data::{
    format_timestamp, load_panel, load_series, parse_timestamp, write_panel, write_series, Observations, Panel,
    SiteSet, SpaceTimeSeries, ValueScale,
};
use crate::decisions::{
    convolve_margin, optimal_bid, optimal_reserves, read_prices, settle, write_bids, write_prices,
    write_reserve_report, Bid, GridDensity, IssuedBid, MarketSpec, PriceSimConfig, PriceTable, ReserveProblem,
    ReserveReportRow,
};
use crate::error::{Error, Result};
use crate::point::{
    fit_recursive, load_forecaster, persistence, save_forecaster, CovariateGrid, CparSpec, CparxSpec, HorizonMode,
    Inputs, LinearSpec, ModelFamily, PerfectNwp, PointForecaster, PointModel, RegimeCovariate, RegimeRule,
};
use crate::prob::io::{read_quantile_forecasts, write_quantile_forecasts, IssuedForecast};
use crate::prob::{
    dress_point_forecast, fit_adaptive_qr, make_parametric, DressingOptions, ErrorClimatology, Family, PredictiveCdf,
    QrOptions, QuantileRegression, QuantileSet, VarianceTracker,
};
use crate::sim::{simulate, SimConfig};
use crate::verify::{
    block_bootstrap_se, conditioning_bin, crps, energy_score, pit_uniformity, pit_values, reliability, write_pit,
    write_reliability, write_scores, ScoreLine, ScoreReport, BOOTSTRAP_REPLICATES,
};

/// Artifact names inside the output directory.
pub mod files {
    pub const POWER: &str = "power.csv";
    pub const SPEED: &str = "speed.csv";
    pub const DIRECTION: &str = "direction.csv";
    pub const PRICES: &str = "prices.csv";
    pub const POINT_MODEL: &str = "point_model.toml";
    pub const PROB_MODEL: &str = "prob_model.toml";
    pub const DRESSING_ERRORS: &str = "dressing_errors.csv";
    pub const COVARIANCE_FIT: &str = "covariance_fit.txt";
    pub const POINT_FORECASTS: &str = "point_forecasts.csv";
    pub const FORECASTS: &str = "forecasts.csv";
    pub const FAN_CHART: &str = "fan_chart.csv";
    pub const TRAJECTORIES: &str = "trajectories.csv";
    pub const COVARIANCE: &str = "covariance.txt";
    pub const BIDS: &str = "bids.csv";
    pub const SETTLEMENT: &str = "settlement.csv";
    pub const RESERVE: &str = "reserve.csv";
    pub const SCORES: &str = "scores.csv";
    pub const RELIABILITY: &str = "reliability.csv";
    pub const PIT: &str = "pit.csv";
}

/// First origin used when building training samples; leaves room for lags.
const WARM_UP_HOURS: usize = 48;
/// Rows used to initialize recursive least squares.
const RLS_INITIAL_WINDOW: usize = 200;
/// Cells of a reserve grid density below this mass are dropped before
/// convolving.
const RESERVE_TRIM: f64 = 1e-12;
/// Central interval coverages written to the fan-chart file.
const FAN_COVERAGES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Simulate,
    Fit,
    Forecast,
    Trajectories,
    Trade,
    Reserve,
    Verify,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Simulate,
        Stage::Fit,
        Stage::Forecast,
        Stage::Trajectories,
        Stage::Trade,
        Stage::Reserve,
        Stage::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Fit => "fit",
            Stage::Forecast => "forecast",
            Stage::Trajectories => "trajectories",
            Stage::Trade => "trade",
            Stage::Reserve => "reserve",
            Stage::Verify => "verify",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Also write long-format central interval data for fan charts.
    pub emit_plots_data: bool,
}

pub fn run_stage(stage: Stage, cfg: &RunConfig, opts: &RunOptions) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    match stage {
        Stage::Simulate => stage_simulate(cfg),
        Stage::Fit => stage_fit(cfg),
        Stage::Forecast => stage_forecast(cfg, opts),
        Stage::Trajectories => stage_trajectories(cfg),
        Stage::Trade => stage_trade(cfg),
        Stage::Reserve => stage_reserve(cfg),
        Stage::Verify => stage_verify(cfg),
    }
}

/// Runs `from` and every later stage in order.
pub fn run_pipeline(cfg: &RunConfig, from: Stage, opts: &RunOptions) -> Result<()> {
    for stage in Stage::ALL.into_iter().filter(|s| *s >= from) {
        run_stage(stage, cfg, opts)?;
    }
    Ok(())
}

fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

fn out_file(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::io(
            &path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "stage input is missing; run the earlier stage first",
            ),
        ))
    }
}

// ---------------------------------------------------------------- inputs

/// Power, and the speed and direction fields when available.
#[derive(Debug, Clone)]
pub struct Observed {
    pub power: SpaceTimeSeries,
    pub speed: Option<Panel>,
    pub direction: Option<Panel>,
}

impl Observed {
    /// Configured data files take precedence over simulated ones in the
    /// output directory.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let sites = cfg.site_set()?;
        let power_path = match &cfg.data.power {
            Some(p) => p.clone(),
            None => require(out_file(cfg, files::POWER))?,
        };
        let power = load_series(power_path, &sites)?;
        let (speed, direction) = match (&cfg.data.speed, &cfg.data.direction) {
            (Some(s), Some(d)) => (Some(load_panel(s)?), Some(load_panel(d)?)),
            _ => {
                let (s, d) = (out_file(cfg, files::SPEED), out_file(cfg, files::DIRECTION));
                if cfg.data.power.is_none() && s.exists() && d.exists() {
                    (Some(load_panel(s)?), Some(load_panel(d)?))
                } else {
                    (None, None)
                }
            }
        };
        for panel in speed.iter().chain(direction.iter()) {
            if panel.names != sites.ids() {
                return Err(Error::InvalidArgument(format!(
                    "panel columns {:?} do not match the configured sites {:?}",
                    panel.names,
                    sites.ids()
                )));
            }
        }
        Ok(Self {
            power,
            speed,
            direction,
        })
    }

    pub fn nwp(&self) -> Result<Option<PerfectNwp>> {
        match (&self.speed, &self.direction) {
            (Some(s), Some(d)) => Ok(Some(PerfectNwp::new(s.clone(), d.clone())?)),
            _ => Ok(None),
        }
    }

    pub fn y(&self, t: usize, site: usize) -> Option<f64> {
        if t < self.power.len() {
            self.power.get(t, site)
        } else {
            None
        }
    }

    /// Site-major observed window `y[site * leads + lead - 1]` after
    /// origin `t`, or `None` if any cell is missing.
    pub fn window(&self, t: usize, leads: usize) -> Option<Vec<f64>> {
        let m = self.power.sites().len();
        let mut y = Vec::with_capacity(m * leads);
        for s in 0..m {
            for k in 1..=leads {
                y.push(self.y(t + k, s)?);
            }
        }
        Some(y)
    }
}

fn build_inputs<'a>(
    target: &'a SpaceTimeSeries,
    nwp: Option<&'a PerfectNwp>,
    direction: Option<&'a Panel>,
) -> Inputs<'a> {
    let mut inputs = Inputs::new(target, target.start());
    if let Some(n) = nwp {
        inputs = inputs.with_nwp(n);
    }
    if let Some(d) = direction {
        inputs = inputs.with_covariates(d);
    }
    inputs
}

/// Gate-hour origins `t` in `[from, to)` whose whole window lies inside the
/// series.
fn gate_origins(series: &SpaceTimeSeries, spec: &MarketSpec, from: usize, to: usize, leads: usize) -> Vec<usize> {
    let end = to.min(series.len().saturating_sub(leads));
    (from..end).filter(|&t| spec.is_gate(series.timestamp(t))).collect()
}

fn test_origins(cfg: &RunConfig, obs: &Observed) -> Result<Vec<usize>> {
    let origins = gate_origins(
        &obs.power,
        &cfg.market.spec(),
        cfg.model.train_hours,
        usize::MAX,
        cfg.model.horizon,
    );
    if origins.is_empty() {
        return Err(Error::InsufficientSample {
            needed: cfg.model.train_hours + cfg.model.horizon + 24,
            got: obs.power.len(),
        });
    }
    Ok(origins)
}

// ----------------------------------------------------------- simulate

fn sim_config(cfg: &RunConfig, sites: &SiteSet) -> Result<SimConfig> {
    let s = &cfg.simulation;
    let m = sites.len();
    let mut sc = SimConfig::homogeneous(sites.clone(), s.rho, cfg.seed);
    sc.ar_coefficient = vec![s.ar_coefficient; m];
    sc.mean_speed = vec![s.mean_speed; m];
    sc.diurnal_amplitude = s.diurnal_amplitude;
    sc.speed_sd = s.speed_sd;
    sc.power_noise_sd = s.power_noise_sd;
    sc.start = parse_timestamp(&s.start).ok_or_else(|| Error::Config(format!("bad simulation.start '{}'", s.start)))?;
    Ok(sc)
}

/// Writes synthetic power, speed and direction unless a power file is
/// configured, and synthetic prices unless a price file is configured.
fn stage_simulate(cfg: &RunConfig) -> Result<()> {
    let sites = cfg.site_set()?;
    let (start, hours) = match &cfg.data.power {
        None => {
            let sc = sim_config(cfg, &sites)?;
            let sim = simulate(&sc, cfg.simulation.hours)?;
            write_series(out_file(cfg, files::POWER), &sim.power, ValueScale::Capacity)?;
            write_panel(out_file(cfg, files::SPEED), &sim.speed)?;
            write_panel(out_file(cfg, files::DIRECTION), &sim.direction)?;
            (sc.start, cfg.simulation.hours)
        }
        Some(path) => {
            let power = load_series(path, &sites)?;
            (power.start(), power.len())
        }
    };
    if cfg.data.prices.is_none() {
        let spec = cfg.market.spec();
        let from = start - Duration::hours(48);
        let span = hours + 96;
        let table = PriceTable::simulate(from, span, &PriceSimConfig::default(), sub_seed(cfg.seed, 1))?;
        let origins: Vec<DateTime<Utc>> = (0..span)
            .map(|h| from + Duration::hours(h as i64))
            .filter(|t| spec.is_gate(*t))
            .collect();
        let off = spec.gate_closure_offset;
        write_prices(
            out_file(cfg, files::PRICES),
            &table.rows_for(&origins, off + 1..=off + 24),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------- fit

fn family_for(cfg: &RunConfig, site: usize) -> Result<ModelFamily> {
    let m = &cfg.model;
    let grid = CovariateGrid {
        nodes: m.grid_nodes,
        ..CovariateGrid::direction()
    };
    Ok(match m.family {
        FamilyName::Ar => ModelFamily::Linear(LinearSpec::ar(site, m.lags.clone(), 1)),
        FamilyName::Tar => ModelFamily::Linear(LinearSpec::tar(
            site,
            m.lags.clone(),
            1,
            RegimeRule::new(RegimeCovariate::OwnLag(1), m.thresholds.clone())?,
        )),
        FamilyName::Cpar => ModelFamily::Cpar(CparSpec {
            bandwidth: m.bandwidth,
            ..CparSpec::new(site, m.lags.clone(), 1, site, grid)
        }),
        FamilyName::Cparx => ModelFamily::Cparx(CparxSpec {
            grid,
            bandwidth: m.bandwidth,
            ..CparxSpec::new(site, 1)
        }),
    })
}

fn check_family_inputs(cfg: &RunConfig, obs: &Observed) -> Result<()> {
    let needs = match cfg.model.family {
        FamilyName::Cparx => "speed and direction",
        FamilyName::Cpar => "direction",
        _ => return Ok(()),
    };
    if obs.direction.is_none() || (cfg.model.family == FamilyName::Cparx && obs.speed.is_none()) {
        return Err(Error::InvalidArgument(format!(
            "the {:?} family needs {needs} data",
            cfg.model.family
        )));
    }
    Ok(())
}

fn fit_point(cfg: &RunConfig, site: usize, inputs: &Inputs) -> Result<PointForecaster> {
    let family = family_for(cfg, site)?;
    let (mode, leads, lambda) = (cfg.model.mode, cfg.model.horizon, cfg.model.forgetting);
    if lambda >= 1.0 {
        return PointForecaster::fit(&family, mode, leads, inputs);
    }
    let ModelFamily::Linear(spec) = family else {
        return Err(Error::Config(
            "model.forgetting below 1 needs the ar or tar family".into(),
        ));
    };
    let fit_one = |k: usize| -> Result<PointModel> {
        Ok(PointModel::Linear(
            fit_recursive(&spec.with_horizon(k), inputs, lambda, RLS_INITIAL_WINDOW)?.model,
        ))
    };
    let models = match mode {
        HorizonMode::Iterated => vec![fit_one(1)?],
        HorizonMode::Direct => (1..=leads).into_par_iter().map(fit_one).collect::<Result<Vec<_>>>()?,
    };
    Ok(PointForecaster { mode, leads, models })
}

/// Point forecasts `[site][lead - 1]` issued at one origin.
#[derive(Debug, Clone, PartialEq)]
struct IssuedPoints {
    t: usize,
    points: Vec<Vec<f64>>,
}

fn predict_all(forecasters: &[PointForecaster], inputs: &Inputs, t: usize) -> Result<Option<Vec<Vec<f64>>>> {
    let mut out = Vec::with_capacity(forecasters.len());
    for f in forecasters {
        match f.predict(inputs, t) {
            Ok(v) => out.push(v),
            Err(Error::MissingCell { .. } | Error::MissingNwp { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(out))
}

/// Forecasts at each origin; origins with missing inputs are skipped.
fn issue_points(forecasters: &[PointForecaster], inputs: &Inputs, origins: &[usize]) -> Result<Vec<IssuedPoints>> {
    let issued = origins
        .par_iter()
        .map(|&t| Ok(predict_all(forecasters, inputs, t)?.map(|points| IssuedPoints { t, points })))
        .collect::<Result<Vec<_>>>()?;
    Ok(issued.into_iter().flatten().collect())
}

/// Candidate knots of the piecewise-linear basis in the point forecast.
const QR_KNOTS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
/// Training forecasts needed on each side of a knot for it to be used.
const QR_MIN_SIDE: usize = 30;
/// Coefficient tolerance for the pipeline's quantile regressions.
const QR_TOLERANCE: f64 = 1e-6;

/// `[1, ŷ, (ŷ - κ)+ ...]`: lets every quantile bend with the forecast level.
fn qr_features(point: f64, knots: &[f64]) -> Vec<f64> {
    let mut x = vec![1.0, point];
    x.extend(knots.iter().map(|k| (point - k).max(0.0)));
    x
}

/// Candidate knots with enough training forecasts on both sides; a knot
/// beyond the data would give an all-zero or collinear hinge column.
fn qr_knots(points: &[f64]) -> Vec<f64> {
    QR_KNOTS
        .iter()
        .copied()
        .filter(|&k| {
            let above = points.iter().filter(|&&p| p > k).count();
            above >= QR_MIN_SIDE && points.len() - above >= QR_MIN_SIDE
        })
        .collect()
}

/// One lead's quantile regression and the knots of its basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QrLead {
    knots: Vec<f64>,
    regression: QuantileRegression,
}

impl QrLead {
    fn predict(&self, point: f64) -> Result<QuantileSet> {
        self.regression.predict(&qr_features(point, &self.knots))
    }
}

const PROB_FORMAT: &str = "windcast-prob-model";
const PROB_VERSION: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
enum ProbModel {
    /// One regression per lead on a piecewise-linear basis in `ŷ`, pooled
    /// over sites.
    QuantileRegression { per_lead: Vec<QrLead> },
    /// Tracked error variance per `site * leads + lead - 1`.
    Parametric {
        family: String,
        lambda: f64,
        variances: Vec<f64>,
    },
    /// Errors live in the dressing error file.
    Dressing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbDocument {
    format: String,
    version: u32,
    levels: Vec<f64>,
    leads: usize,
    model: ProbModel,
}

/// Margin kept between a Beta mean and the bounds of [0, 1].
const BETA_MEAN_MARGIN: f64 = 1e-3;
/// Largest Beta variance as a fraction of `mean (1 - mean)`.
const BETA_VARIANCE_CAP: f64 = 0.9;

/// A Beta needs `0 < mean < 1` and `variance < mean (1 - mean)`; clipped
/// point forecasts sit on the bounds, and the tracked variance is shared
/// across levels.
fn feasible_beta(point: f64, variance: f64) -> (f64, f64) {
    let mean = point.clamp(BETA_MEAN_MARGIN, 1.0 - BETA_MEAN_MARGIN);
    (mean, variance.min(BETA_VARIANCE_CAP * mean * (1.0 - mean)))
}

/// Turns point forecasts into predictive distributions.
enum ProbState {
    Qr {
        per_lead: Vec<QrLead>,
    },
    Parametric {
        family: Family,
        tracker: VarianceTracker,
        leads: usize,
    },
    Dressing {
        levels: Vec<f64>,
        climatology: ErrorClimatology,
    },
}

impl ProbState {
    fn marginal(&self, site: usize, lead: usize, point: f64) -> Result<PredictiveCdf> {
        match self {
            ProbState::Qr { per_lead, .. } => {
                Ok(PredictiveCdf::quantiles(site, lead, per_lead[lead - 1].predict(point)?))
            }
            ProbState::Parametric { family, tracker, leads } => {
                let v = tracker.variance(site * leads + lead - 1);
                let (point, v) = match family {
                    Family::Beta => feasible_beta(point, v),
                    _ => (point, v),
                };
                Ok(PredictiveCdf::parametric(
                    site,
                    lead,
                    make_parametric(point, v, *family)?,
                ))
            }
            ProbState::Dressing { levels, climatology } => {
                let d = dress_point_forecast(point, lead, climatology, levels)?;
                Ok(PredictiveCdf::quantiles(site, lead, d.quantiles))
            }
        }
    }

    fn observe(&mut self, site: usize, lead: usize, point: f64, y: f64) {
        if let ProbState::Parametric { tracker, leads, .. } = self {
            tracker.update(site * *leads + lead - 1, y - point);
        }
    }

    fn marginals(&self, points: &[Vec<f64>]) -> Result<MarginalSet> {
        let leads = points.first().map_or(0, Vec::len);
        let mut set = MarginalSet::new(points.len(), leads);
        for (s, row) in points.iter().enumerate() {
            for (i, &p) in row.iter().enumerate() {
                set.insert(self.marginal(s, i + 1, p)?)?;
            }
        }
        Ok(set)
    }

    fn fit(cfg: &RunConfig, records: &[IssuedPoints], obs: &Observed) -> Result<(Self, ProbModel)> {
        let p = &cfg.probabilistic;
        let (m, leads) = (obs.power.sites().len(), cfg.model.horizon);
        let samples = |k: usize| {
            records.iter().flat_map(move |r| {
                (0..r.points.len()).filter_map(move |s| obs.y(r.t + k, s).map(|y| (s, r.points[s][k - 1], y)))
            })
        };
        match p.method {
            ProbMethod::QuantileRegression => {
                let options = QrOptions {
                    forgetting: p.forgetting,
                    tolerance: QR_TOLERANCE,
                    ..QrOptions::default()
                };
                let per_lead = (1..=leads)
                    .into_par_iter()
                    .map(|k| {
                        let (points, y): (Vec<f64>, Vec<f64>) = samples(k).map(|(_, pt, y)| (pt, y)).unzip();
                        let knots = qr_knots(&points);
                        let x: Vec<Vec<f64>> = points.iter().map(|&pt| qr_features(pt, &knots)).collect();
                        let regression = fit_adaptive_qr(&x, &y, &p.levels, &options)?;
                        Ok(QrLead { knots, regression })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let model = ProbModel::QuantileRegression {
                    per_lead: per_lead.clone(),
                };
                Ok((ProbState::Qr { per_lead }, model))
            }
            ProbMethod::Parametric => {
                let mut initial = vec![0.0; m * leads];
                let mut counts = vec![0usize; m * leads];
                for k in 1..=leads {
                    for (s, pt, y) in samples(k) {
                        initial[s * leads + k - 1] += (y - pt) * (y - pt);
                        counts[s * leads + k - 1] += 1;
                    }
                }
                let mut tracker = VarianceTracker::new(p.variance_forgetting, m * leads, 0.0)?;
                for (i, (ss, n)) in initial.iter().zip(&counts).enumerate() {
                    tracker.set(i, if *n > 0 { ss / *n as f64 } else { 0.01 });
                }
                let mut state = ProbState::Parametric {
                    family: cfg.density_family()?,
                    tracker,
                    leads,
                };
                for r in records {
                    for (s, row) in r.points.iter().enumerate() {
                        for (i, &pt) in row.iter().enumerate() {
                            if let Some(y) = obs.y(r.t + i + 1, s) {
                                state.observe(s, i + 1, pt, y);
                            }
                        }
                    }
                }
                let ProbState::Parametric { tracker, .. } = &state else {
                    unreachable!()
                };
                let model = ProbModel::Parametric {
                    family: p.family.clone(),
                    lambda: p.variance_forgetting,
                    variances: (0..m * leads).map(|i| tracker.variance(i)).collect(),
                };
                Ok((state, model))
            }
            ProbMethod::Dressing => {
                let errors: Vec<(usize, f64, f64)> = (1..=leads)
                    .flat_map(|k| samples(k).map(move |(_, pt, y)| (k, pt, y)))
                    .collect();
                write_dressing_errors(&out_file(cfg, files::DRESSING_ERRORS), &errors)?;
                let climatology = ErrorClimatology::build(errors, DressingOptions::default())?;
                Ok((
                    ProbState::Dressing {
                        levels: p.levels.clone(),
                        climatology,
                    },
                    ProbModel::Dressing,
                ))
            }
        }
    }

    fn load(cfg: &RunConfig) -> Result<Self> {
        let path = require(out_file(cfg, files::PROB_MODEL))?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let doc: ProbDocument = toml::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if doc.format != PROB_FORMAT || doc.version != PROB_VERSION {
            return Err(Error::ModelFormat(format!(
                "unexpected document {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.leads != cfg.model.horizon {
            return Err(Error::ModelFormat(format!(
                "probabilistic model covers {} leads, config asks for {}",
                doc.leads, cfg.model.horizon
            )));
        }
        Ok(match doc.model {
            ProbModel::QuantileRegression { per_lead } => {
                if per_lead.len() != doc.leads {
                    return Err(Error::ModelFormat("one quantile regression per lead expected".into()));
                }
                ProbState::Qr { per_lead }
            }
            ProbModel::Parametric {
                family,
                lambda,
                variances,
            } => {
                let family =
                    Family::parse(&family).ok_or_else(|| Error::ModelFormat(format!("unknown family '{family}'")))?;
                let mut tracker = VarianceTracker::new(lambda, variances.len(), 0.0)?;
                for (i, v) in variances.iter().enumerate() {
                    tracker.set(i, *v);
                }
                ProbState::Parametric {
                    family,
                    tracker,
                    leads: doc.leads,
                }
            }
            ProbModel::Dressing => {
                let errors = read_dressing_errors(&require(out_file(cfg, files::DRESSING_ERRORS))?)?;
                ProbState::Dressing {
                    levels: doc.levels,
                    climatology: ErrorClimatology::build(errors, DressingOptions::default())?,
                }
            }
        })
    }
}

fn write_dressing_errors(path: &Path, errors: &[(usize, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lead_h", "point", "observed"])?;
    for (k, p, y) in errors {
        w.write_record([k.to_string(), p.to_string(), y.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_dressing_errors(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            Ok((field(&rec, 0, i + 2)?, field(&rec, 1, i + 2)?, field(&rec, 2, i + 2)?))
        })
        .collect()
}

fn field<T: FromStr>(rec: &csv::StringRecord, k: usize, row: usize) -> Result<T> {
    let v = rec.get(k).unwrap_or("");
    v.parse().map_err(|_| Error::MalformedValue {
        row,
        value: v.to_owned(),
    })
}

/// Fits the point and probabilistic models on the training hours, then
/// warms up the latent covariance over the daily training origins.
fn stage_fit(cfg: &RunConfig) -> Result<()> {
    let obs = Observed::load(cfg)?;
    check_family_inputs(cfg, &obs)?;
    let leads = cfg.model.horizon;
    let train_end = cfg.model.train_hours.min(obs.power.len());
    if train_end < WARM_UP_HOURS + leads + 100 {
        return Err(Error::InsufficientSample {
            needed: WARM_UP_HOURS + leads + 100,
            got: train_end,
        });
    }
    let train = Observed {
        power: obs.power.slice(0, train_end),
        speed: obs.speed.clone(),
        direction: obs.direction.clone(),
    };
    let nwp = train.nwp()?;
    let inputs = build_inputs(&train.power, nwp.as_ref(), train.direction.as_ref());

    let m = train.power.sites().len();
    let forecasters = (0..m).map(|s| fit_point(cfg, s, &inputs)).collect::<Result<Vec<_>>>()?;
    save_forecaster(out_file(cfg, files::POINT_MODEL), &forecasters)?;

    // Training origins share the hour of day of the issued forecasts.
    let spec = cfg.market.spec();
    let first = (WARM_UP_HOURS..train_end)
        .find(|&t| spec.is_gate(train.power.timestamp(t)))
        .unwrap_or(WARM_UP_HOURS);
    let origins: Vec<usize> = (first..train_end - leads)
        .step_by(cfg.probabilistic.stride_hours)
        .collect();
    let records = issue_points(&forecasters, &inputs, &origins)?;
    let (state, model) = ProbState::fit(cfg, &records, &train)?;
    let doc = ProbDocument {
        format: PROB_FORMAT.into(),
        version: PROB_VERSION,
        levels: cfg.probabilistic.levels.clone(),
        leads,
        model,
    };
    let path = out_file(cfg, files::PROB_MODEL);
    let text = toml::to_string(&doc).map_err(|e| Error::ModelFormat(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let gates = gate_origins(&train.power, &spec, WARM_UP_HOURS, train_end, leads);
    let mut cov = LatentCovariance::identity(m * leads, cfg.copula.lambda)?;
    for r in issue_points(&forecasters, &inputs, &gates)? {
        if let Some(y) = train.window(r.t, leads) {
            cov.update(&to_latent(&y, &state.marginals(&r.points)?)?)?;
        }
    }
    cov.save(out_file(cfg, files::COVARIANCE_FIT))
}

// ----------------------------------------------------------- forecast

pub const POINT_HEADER: [&str; 4] = ["origin", "site", "lead_h", "value"];

/// A point forecast for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRow {
    pub origin: DateTime<Utc>,
    pub site: usize,
    pub lead: usize,
    pub value: f64,
}

pub fn write_point_forecasts(path: impl AsRef<Path>, sites: &SiteSet, rows: &[PointRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(POINT_HEADER)?;
    for r in rows {
        w.write_record([
            format_timestamp(r.origin),
            sites.ids()[r.site].clone(),
            r.lead.to_string(),
            r.value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_point_forecasts(path: impl AsRef<Path>, sites: &SiteSet) -> Result<Vec<PointRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let row = i + 2;
            let stamp = rec.get(0).unwrap_or("");
            let id = rec.get(1).unwrap_or("");
            Ok(PointRow {
                origin: parse_timestamp(stamp).ok_or_else(|| Error::MalformedTimestamp {
                    row,
                    value: stamp.to_owned(),
                })?,
                site: sites.index_of(id).ok_or_else(|| Error::UnmappedZone(id.to_owned()))?,
                lead: field(&rec, 2, row)?,
                value: field(&rec, 3, row)?,
            })
        })
        .collect()
}

fn write_fan_chart(path: &Path, sites: &SiteSet, forecasts: &[IssuedForecast]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["origin", "site", "lead_h", "coverage", "lower", "upper"])?;
    for f in forecasts {
        let origin = format_timestamp(f.origin);
        for c in FAN_COVERAGES {
            w.write_record([
                origin.clone(),
                sites.ids()[f.cdf.site].clone(),
                f.cdf.lead.to_string(),
                c.to_string(),
                f.cdf.quantile(0.5 - c / 2.0).to_string(),
                f.cdf.quantile(0.5 + c / 2.0).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Issues point and probabilistic forecasts at every test origin. Tracked
/// variances only learn from errors whose target time has passed.
fn stage_forecast(cfg: &RunConfig, opts: &RunOptions) -> Result<()> {
    let obs = Observed::load(cfg)?;
    check_family_inputs(cfg, &obs)?;
    let sites = obs.power.sites().clone();
    let leads = cfg.model.horizon;
    let forecasters = load_forecaster(require(out_file(cfg, files::POINT_MODEL))?)?;
    if forecasters.len() != sites.len() || forecasters.iter().any(|f| f.leads != leads) {
        return Err(Error::ModelFormat(format!(
            "point model does not cover {} sites x {} leads",
            sites.len(),
            leads
        )));
    }
    let mut state = ProbState::load(cfg)?;
    let nwp = obs.nwp()?;
    let inputs = build_inputs(&obs.power, nwp.as_ref(), obs.direction.as_ref());
    let issued = issue_points(&forecasters, &inputs, &test_origins(cfg, &obs)?)?;

    let mut points = Vec::new();
    let mut forecasts = Vec::new();
    // (index into `issued`, leads already learned from)
    let mut pending: Vec<(usize, usize)> = Vec::new();
    for (i, rec) in issued.iter().enumerate() {
        for (j, learned) in pending.iter_mut() {
            let past = &issued[*j];
            while *learned < leads && past.t + *learned < rec.t {
                let k = *learned + 1;
                for (s, row) in past.points.iter().enumerate() {
                    if let Some(y) = obs.y(past.t + k, s) {
                        state.observe(s, k, row[k - 1], y);
                    }
                }
                *learned = k;
            }
        }
        pending.retain(|(_, learned)| *learned < leads);
        let origin = obs.power.timestamp(rec.t);
        for (s, row) in rec.points.iter().enumerate() {
            for (k0, &p) in row.iter().enumerate() {
                points.push(PointRow {
                    origin,
                    site: s,
                    lead: k0 + 1,
                    value: p,
                });
                forecasts.push(IssuedForecast {
                    origin,
                    cdf: state.marginal(s, k0 + 1, p)?,
                });
            }
        }
        pending.push((i, 0));
    }
    write_point_forecasts(out_file(cfg, files::POINT_FORECASTS), &sites, &points)?;
    write_quantile_forecasts(
        out_file(cfg, files::FORECASTS),
        &sites,
        &forecasts,
        &cfg.probabilistic.levels,
    )?;
    if opts.emit_plots_data {
        write_fan_chart(&out_file(cfg, files::FAN_CHART), &sites, &forecasts)?;
    }
    Ok(())
}

/// Marginals read back from the forecast file, grouped by origin.
fn load_marginals(cfg: &RunConfig, sites: &SiteSet) -> Result<BTreeMap<DateTime<Utc>, MarginalSet>> {
    let forecasts = read_quantile_forecasts(require(out_file(cfg, files::FORECASTS))?, sites)?;
    let mut out: BTreeMap<DateTime<Utc>, MarginalSet> = BTreeMap::new();
    for f in forecasts {
        out.entry(f.origin)
            .or_insert_with(|| MarginalSet::new(sites.len(), cfg.model.horizon))
            .insert(f.cdf)?;
    }
    Ok(out)
}

fn load_points(cfg: &RunConfig, sites: &SiteSet) -> Result<BTreeMap<(DateTime<Utc>, usize, usize), f64>> {
    Ok(
        read_point_forecasts(require(out_file(cfg, files::POINT_FORECASTS))?, sites)?
            .into_iter()
            .map(|r| ((r.origin, r.site, r.lead), r.value))
            .collect(),
    )
}

fn origin_index(obs: &Observed, origin: DateTime<Utc>) -> Result<usize> {
    obs.power.index_of(origin).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "forecast origin {} is outside the data",
            format_timestamp(origin)
        ))
    })
}

// ------------------------------------------------------- trajectories

/// Samples `J` space-time trajectories per origin. The covariance starts
/// from the training warm-up and learns from origin `o` once `o + horizon`
/// has been observed.
fn stage_trajectories(cfg: &RunConfig) -> Result<()> {
    let obs = Observed::load(cfg)?;
    let sites = obs.power.sites().clone();
    let leads = cfg.model.horizon;
    let marginals = load_marginals(cfg, &sites)?;
    let warm = LatentCovariance::load(require(out_file(cfg, files::COVARIANCE_FIT))?)?;
    if warm.dim() != sites.len() * leads {
        return Err(Error::DimensionMismatch {
            expected: sites.len() * leads,
            got: warm.dim(),
        });
    }
    let mut cov = LatentCovariance::from_matrix(warm.matrix().clone(), cfg.copula.lambda)?;

    let entries: Vec<(usize, &MarginalSet)> = marginals
        .iter()
        .map(|(o, set)| Ok((origin_index(&obs, *o)?, set)))
        .collect::<Result<_>>()?;
    let mut learned = 0;
    let learn = |cov: &mut LatentCovariance, learned: &mut usize, now: usize| -> Result<()> {
        while *learned < entries.len() && entries[*learned].0 + leads <= now {
            let (t, set) = entries[*learned];
            if let Some(y) = obs.window(t, leads) {
                cov.update(&to_latent(&y, set)?)?;
            }
            *learned += 1;
        }
        Ok(())
    };
    let mut sets = Vec::with_capacity(entries.len());
    for &(t, set) in &entries {
        learn(&mut cov, &mut learned, t)?;
        let mut traj = sample_trajectories(set, &cov, cfg.copula.trajectories, sub_seed(cfg.seed, 1000 + t as u64))?;
        traj.origin = Some(obs.power.timestamp(t));
        sets.push(traj);
    }
    learn(&mut cov, &mut learned, obs.power.len() - 1)?;
    write_trajectories(out_file(cfg, files::TRAJECTORIES), &sets, &sites)?;
    cov.save(out_file(cfg, files::COVARIANCE))
}

// -------------------------------------------------------------- trade

fn load_prices(cfg: &RunConfig) -> Result<PriceTable> {
    let path = match &cfg.data.prices {
        Some(p) => p.clone(),
        None => require(out_file(cfg, files::PRICES))?,
    };
    Ok(PriceTable::from_rows(read_prices(path)?))
}

/// Day-ahead offers for the trade site: the predictive quantile at
/// `π↓ / (π↓ + π↑)` from forecast unit costs. Settlement compares it with
/// offering the point forecast. Volumes are per unit of capacity.
fn stage_trade(cfg: &RunConfig) -> Result<()> {
    let obs = Observed::load(cfg)?;
    let sites = obs.power.sites().clone();
    let site = cfg.trade_site()?;
    let spec = cfg.market.spec();
    let marginals = load_marginals(cfg, &sites)?;
    let points = load_points(cfg, &sites)?;
    let prices = load_prices(cfg)?;

    let mut bids = Vec::new();
    let mut w = csv::Writer::from_path(out_file(cfg, files::SETTLEMENT))?;
    w.write_record([
        "origin",
        "lead_h",
        "strategy",
        "observed",
        "bid",
        "day_ahead",
        "balancing",
        "total",
        "imbalance",
    ])?;
    for (origin, set) in &marginals {
        let t = origin_index(&obs, *origin)?;
        for lead in spec.leads() {
            let f = set.get(set.index(site, lead))?;
            let costs = cfg.market.price_forecaster.forecast(&prices, *origin, lead)?;
            let bid = match optimal_bid(f, &costs) {
                Err(Error::Indifferent) => Bid {
                    alpha: 0.5,
                    value: f.inverse(0.5)?,
                },
                other => other?,
            };
            bids.push(IssuedBid {
                origin: *origin,
                lead,
                bid,
            });
            let delivery = *origin + Duration::hours(lead as i64);
            let (Some(y), Some(quote)) = (obs.y(t + lead, site), prices.get(delivery)) else {
                continue;
            };
            let point = points
                .get(&(*origin, site, lead))
                .copied()
                .ok_or(Error::MissingMarginal(lead))?;
            for (name, offer) in [("quantile", bid.value), ("point", point)] {
                let r = settle(y, offer, quote)?;
                w.write_record([
                    format_timestamp(*origin),
                    lead.to_string(),
                    name.to_owned(),
                    y.to_string(),
                    offer.to_string(),
                    r.day_ahead.to_string(),
                    r.balancing.to_string(),
                    r.total.to_string(),
                    r.imbalance.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(out_file(cfg, files::SETTLEMENT), e))?;
    write_bids(out_file(cfg, files::BIDS), &bids)
}

// ------------------------------------------------------------ reserve

/// Reserve levels per delivery hour from the margin density of load
/// error, outages and the trade site's wind forecast error, all in units
/// of that site's capacity.
fn stage_reserve(cfg: &RunConfig) -> Result<()> {
    let sites = cfg.site_set()?;
    let site = cfg.trade_site()?;
    let spec = cfg.market.spec();
    let r = &cfg.reserve;
    let marginals = load_marginals(cfg, &sites)?;
    let points = load_points(cfg, &sites)?;
    let load_error = GridDensity::gaussian(0.0, r.load_error_sd, r.step)?.trimmed(RESERVE_TRIM);
    let outage = GridDensity::two_point_outage(r.outage_probability, r.outage_size, r.step)?;

    let cells: Vec<(DateTime<Utc>, usize, &PredictiveCdf, f64)> = marginals
        .iter()
        .flat_map(|(o, set)| spec.leads().map(move |k| (*o, k, set)))
        .map(|(o, k, set)| {
            let point = points.get(&(o, site, k)).copied().ok_or(Error::MissingMarginal(k))?;
            Ok((o, k, set.get(set.index(site, k))?, point))
        })
        .collect::<Result<_>>()?;
    let rows = cells
        .par_iter()
        .map(|&(origin, lead, f, point)| {
            let problem = ReserveProblem {
                load_error: load_error.clone(),
                generation_loss: outage.clone(),
                wind_error: GridDensity::wind_error(f, point, r.step)?.trimmed(RESERVE_TRIM),
                up: r.up,
                down: r.down,
            };
            let margin = convolve_margin(&problem)?;
            Ok(ReserveReportRow {
                origin,
                lead,
                decision: optimal_reserves(&problem, &margin)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_reserve_report(out_file(cfg, files::RESERVE), &rows)
}

// ------------------------------------------------------------- verify

fn single_line(metric: &str, value: f64, n: usize) -> ScoreReport {
    ScoreReport {
        metric: metric.to_owned(),
        per_lead: Vec::new(),
        overall: ScoreLine {
            lead: None,
            value,
            se: f64::NAN,
            n,
        },
    }
}

/// `sqrt` of a mean-squared-error report; standard errors by the delta
/// method.
fn root_report(metric: &str, mse: &ScoreReport) -> ScoreReport {
    let root = |l: &ScoreLine| {
        let v = l.value.sqrt();
        ScoreLine {
            lead: l.lead,
            value: v,
            se: if v > 0.0 { l.se / (2.0 * v) } else { 0.0 },
            n: l.n,
        }
    };
    ScoreReport {
        metric: metric.to_owned(),
        per_lead: mse.per_lead.iter().map(root).collect(),
        overall: root(&mse.overall),
    }
}

/// Scores, reliability and PIT over all test origins whose windows are
/// fully observed. Per-lead series average over sites at each origin.
fn stage_verify(cfg: &RunConfig) -> Result<()> {
    let obs = Observed::load(cfg)?;
    let sites = obs.power.sites().clone();
    let (m, leads) = (sites.len(), cfg.model.horizon);
    let levels = &cfg.probabilistic.levels;
    let v = &cfg.verify;
    let marginals = load_marginals(cfg, &sites)?;
    let points = load_points(cfg, &sites)?;
    let trajectories: BTreeMap<DateTime<Utc>, TrajectorySet> =
        read_trajectories(require(out_file(cfg, files::TRAJECTORIES))?, &sites)?
            .into_iter()
            .filter_map(|s| s.origin.map(|o| (o, s)))
            .collect();

    let mut per_lead: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for name in ["crps", "mae", "bias", "mse", "mse_persistence"] {
        per_lead.insert(name, vec![Vec::new(); leads]);
    }
    let mut energy = Vec::new();
    let (mut cdfs, mut quantiles, mut ys, mut bins, mut cell_ids) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut stamps = Vec::new();

    let inputs = Inputs::new(&obs.power, obs.power.start());
    for (origin, set) in &marginals {
        let t = origin_index(&obs, *origin)?;
        let Some(y) = obs.window(t, leads) else { continue };
        stamps.push(t);
        let crps_cells = (0..m * leads)
            .into_par_iter()
            .map(|i| crps(set.get(i)?, y[i]))
            .collect::<Result<Vec<_>>>()?;
        for k in 1..=leads {
            let mut acc = [0.0; 5];
            for s in 0..m {
                let i = set.index(s, k);
                let point = points.get(&(*origin, s, k)).copied().ok_or(Error::MissingMarginal(i))?;
                let last = persistence(&inputs, s, t, 1).map_or(f64::NAN, |p| p[0]);
                let e = y[i] - point;
                acc[0] += crps_cells[i];
                acc[1] += e.abs();
                acc[2] += -e;
                acc[3] += e * e;
                acc[4] += (y[i] - last).powi(2);
                let f = set.get(i)?;
                quantiles.push(levels.iter().map(|a| f.quantile(*a)).collect::<Vec<_>>());
                bins.push(conditioning_bin(point, k, v.power_bins, v.lead_bucket_hours));
                cdfs.push(f.clone());
                ys.push(y[i]);
                cell_ids.push((sites.ids()[s].clone(), k));
            }
            for (name, a) in ["crps", "mae", "bias", "mse", "mse_persistence"].iter().zip(acc) {
                per_lead.get_mut(name).unwrap()[k - 1].push(a / m as f64);
            }
        }
        if let Some(traj) = trajectories.get(origin) {
            energy.push(energy_score(traj, &y)?);
        }
    }
    if stamps.is_empty() {
        return Err(Error::EmptySample);
    }

    // Series are indexed by origin; the block length is converted from hours.
    let spacing = stamps.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(24).max(1);
    let block = (v.block / spacing).max(1);
    let seed = sub_seed(cfg.seed, 2);
    let report = |name: &str| -> Result<ScoreReport> {
        let series: Vec<(usize, Vec<f64>)> = per_lead[name]
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (i + 1, s))
            .collect();
        ScoreReport::from_series(name, &series, block, seed)
    };
    let mut reports = vec![report("crps")?, report("mae")?, report("bias")?];
    reports.push(root_report("rmse", &report("mse")?));
    reports.push(root_report("rmse_persistence", &report("mse_persistence")?));
    if !energy.is_empty() {
        reports.push(ScoreReport {
            metric: "energy_score".into(),
            per_lead: Vec::new(),
            overall: ScoreLine {
                lead: None,
                value: energy.iter().sum::<f64>() / energy.len() as f64,
                se: block_bootstrap_se(&energy, block, BOOTSTRAP_REPLICATES, seed),
                n: energy.len(),
            },
        });
    }
    let pit = pit_values(&cdfs, &ys, sub_seed(cfg.seed, 3))?;
    let ks = pit_uniformity(&pit);
    reports.push(single_line("pit_ks_statistic", ks.statistic, pit.len()));
    reports.push(single_line("pit_ks_pvalue", ks.p_value, pit.len()));
    write_scores(out_file(cfg, files::SCORES), &reports)?;

    write_reliability(
        out_file(cfg, files::RELIABILITY),
        &reliability(levels, &quantiles, &ys, Some(&bins))?,
    )?;
    let rows: Vec<(String, usize, f64)> = cell_ids.into_iter().zip(pit).map(|((s, k), p)| (s, k, p)).collect();
    write_pit(out_file(cfg, files::PIT), &rows)
}
