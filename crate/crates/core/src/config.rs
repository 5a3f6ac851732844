//! Run configuration: a TOML document with one table per stage. Unknown keys
//! are rejected and every numeric setting is range-checked.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{parse_timestamp, SiteSet};
use crate::decisions::{MarketSpec, PriceForecaster, SideCost};
use crate::error::{Error, Result};
use crate::prob::Family;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub sites: SitesConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    /// External inputs; when `power` is set the simulator is not used.
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub probabilistic: ProbabilisticConfig,
    #[serde(default)]
    pub copula: CopulaConfig,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub reserve: ReserveConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    /// The reference synthetic run: five unit-capacity sites.
    fn default() -> Self {
        Self {
            seed: default_seed(),
            out: default_out(),
            sites: SitesConfig {
                ids: (1..=5).map(|i| format!("s{i}")).collect(),
                capacities: vec![1.0],
            },
            simulation: SimulationConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            probabilistic: ProbabilisticConfig::default(),
            copula: CopulaConfig::default(),
            market: MarketConfig::default(),
            reserve: ReserveConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("windcast-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SitesConfig {
    pub ids: Vec<String>,
    /// Nominal capacity per site (MW); one value applies to all sites.
    pub capacities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub hours: usize,
    pub start: String,
    /// Spatial correlation decays as `rho^|i - j|`.
    pub rho: f64,
    pub ar_coefficient: f64,
    pub diurnal_amplitude: f64,
    pub mean_speed: f64,
    pub speed_sd: f64,
    pub power_noise_sd: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            hours: 16_000,
            start: "2006-01-01T00:00:00Z".into(),
            rho: 0.6,
            ar_coefficient: 0.95,
            diurnal_amplitude: 1.5,
            mean_speed: 8.0,
            speed_sd: 1.2,
            power_noise_sd: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Raw power CSV `timestamp,<site>...`, normalized by the capacities.
    pub power: Option<PathBuf>,
    /// Panels of NWP-like wind speed and direction at delivery time, used as
    /// the forecast for every lead.
    pub speed: Option<PathBuf>,
    pub direction: Option<PathBuf>,
    /// Price file `origin,lead_h,pi_c,pi_b,pi_s`; simulated when absent.
    pub prices: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Ar,
    Tar,
    Cpar,
    Cparx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: FamilyName,
    pub mode: crate::point::HorizonMode,
    pub lags: Vec<usize>,
    /// Regime thresholds on the last observation (TAR only).
    pub thresholds: Vec<f64>,
    /// Longest lead time, in hours.
    pub horizon: usize,
    /// Hours at the start of the series used for fitting.
    pub train_hours: usize,
    /// Recursive-least-squares forgetting for linear families; 1 means
    /// batch least squares.
    pub forgetting: f64,
    pub grid_nodes: usize,
    pub bandwidth: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: FamilyName::Cparx,
            mode: crate::point::HorizonMode::Direct,
            lags: vec![1, 2],
            thresholds: vec![0.3],
            horizon: 43,
            train_hours: 12_000,
            forgetting: 1.0,
            grid_nodes: 8,
            bandwidth: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbMethod {
    QuantileRegression,
    Parametric,
    Dressing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbabilisticConfig {
    pub method: ProbMethod,
    pub levels: Vec<f64>,
    /// Forgetting of the quantile regression.
    pub forgetting: f64,
    /// Spacing of training origins for the quantile regression (hours).
    pub stride_hours: usize,
    /// Density family for the parametric method.
    pub family: String,
    /// Smoothing of the tracked error variance for the parametric method.
    pub variance_forgetting: f64,
}

impl Default for ProbabilisticConfig {
    fn default() -> Self {
        Self {
            method: ProbMethod::QuantileRegression,
            levels: crate::prob::default_levels(),
            forgetting: 1.0,
            stride_hours: 24,
            family: "censored-gaussian".into(),
            variance_forgetting: 0.97,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CopulaConfig {
    pub trajectories: usize,
    pub lambda: f64,
}

impl Default for CopulaConfig {
    fn default() -> Self {
        Self {
            trajectories: 12,
            lambda: crate::copula::DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    pub gate_closure_offset: usize,
    pub first_lead: usize,
    pub last_lead: usize,
    /// UTC hour of the daily gate closure; forecasts are issued then.
    pub gate_hour: u32,
    /// Site that trades; the first site when empty.
    pub site: String,
    pub price_forecaster: PriceForecaster,
}

impl Default for MarketConfig {
    fn default() -> Self {
        let spec = MarketSpec::default();
        Self {
            gate_closure_offset: spec.gate_closure_offset,
            first_lead: spec.first_lead,
            last_lead: spec.last_lead,
            gate_hour: spec.gate_hour,
            site: String::new(),
            price_forecaster: PriceForecaster::Persistence { days: 7 },
        }
    }
}

impl MarketConfig {
    pub fn spec(&self) -> MarketSpec {
        MarketSpec {
            gate_closure_offset: self.gate_closure_offset,
            first_lead: self.first_lead,
            last_lead: self.last_lead,
            gate_hour: self.gate_hour,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReserveConfig {
    pub step: f64,
    /// Synthetic Gaussian load-error preset (normalized units).
    pub load_error_sd: f64,
    /// Synthetic two-point outage preset.
    pub outage_probability: f64,
    pub outage_size: f64,
    pub up: SideCost,
    pub down: SideCost,
}

impl Default for ReserveConfig {
    fn default() -> Self {
        Self {
            step: crate::decisions::reserve::DEFAULT_STEP,
            load_error_sd: 0.03,
            outage_probability: 0.02,
            outage_size: 0.1,
            up: SideCost { short: 20.0, hold: 2.0 },
            down: SideCost { short: 10.0, hold: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub block: usize,
    pub power_bins: usize,
    pub lead_bucket_hours: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            block: crate::verify::DEFAULT_BLOCK,
            power_bins: 5,
            lead_bucket_hours: 6,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn in_range(name: &str, v: f64, lo: f64, hi: f64, lo_open: bool) -> Result<()> {
    let ok = if lo_open { v > lo } else { v >= lo } && v <= hi;
    if ok {
        Ok(())
    } else {
        let open = if lo_open { "(" } else { "[" };
        Err(config_err(format!("{name} = {v} outside {open}{lo}, {hi}]")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn site_set(&self) -> Result<SiteSet> {
        let ids = self.sites.ids.clone();
        let caps = match self.sites.capacities.len() {
            1 => vec![self.sites.capacities[0]; ids.len()],
            _ => self.sites.capacities.clone(),
        };
        SiteSet::new(ids, caps).map_err(|e| config_err(e.to_string()))
    }

    pub fn trade_site(&self) -> Result<usize> {
        if self.market.site.is_empty() {
            return Ok(0);
        }
        self.sites
            .ids
            .iter()
            .position(|s| *s == self.market.site)
            .ok_or_else(|| config_err(format!("market site '{}' is not configured", self.market.site)))
    }

    pub fn density_family(&self) -> Result<Family> {
        Family::parse(&self.probabilistic.family)
            .ok_or_else(|| config_err(format!("unknown density family '{}'", self.probabilistic.family)))
    }

    /// Range checks and existence of referenced files.
    pub fn validate(&self) -> Result<()> {
        self.site_set()?;
        let sim = &self.simulation;
        if parse_timestamp(&sim.start).is_none() {
            return Err(config_err(format!(
                "simulation.start '{}' is not a UTC timestamp",
                sim.start
            )));
        }
        in_range("simulation.rho", sim.rho, -1.0, 1.0, false)?;
        in_range("simulation.ar_coefficient", sim.ar_coefficient, 0.0, 0.999_999, true)?;
        in_range("simulation.diurnal_amplitude", sim.diurnal_amplitude, 0.0, 50.0, false)?;
        in_range("simulation.mean_speed", sim.mean_speed, 0.0, 40.0, true)?;
        in_range("simulation.speed_sd", sim.speed_sd, 0.0, 20.0, false)?;
        in_range("simulation.power_noise_sd", sim.power_noise_sd, 0.0, 0.5, false)?;

        let m = &self.model;
        if m.horizon == 0 || m.horizon > 168 {
            return Err(config_err(format!("model.horizon = {} outside [1, 168]", m.horizon)));
        }
        if m.lags.is_empty() || m.lags.contains(&0) {
            return Err(config_err("model.lags must be nonempty and start at 1"));
        }
        in_range("model.forgetting", m.forgetting, 0.9, 1.0, true)?;
        in_range("model.bandwidth", m.bandwidth, 0.0, 10.0, true)?;
        if m.grid_nodes < 2 {
            return Err(config_err("model.grid_nodes must be at least 2"));
        }
        if m.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("model.thresholds must be strictly increasing"));
        }

        let p = &self.probabilistic;
        if p.levels.is_empty() || p.levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(config_err("probabilistic.levels must lie in (0, 1)"));
        }
        if p.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("probabilistic.levels must be strictly increasing"));
        }
        in_range("probabilistic.forgetting", p.forgetting, 0.0, 1.0, true)?;
        in_range(
            "probabilistic.variance_forgetting",
            p.variance_forgetting,
            0.0,
            1.0,
            true,
        )?;
        if p.stride_hours == 0 {
            return Err(config_err("probabilistic.stride_hours must be positive"));
        }
        self.density_family()?;

        if self.copula.trajectories < 2 {
            return Err(config_err("copula.trajectories must be at least 2"));
        }
        in_range("copula.lambda", self.copula.lambda, 0.0, 1.0, true)?;

        self.market.spec().validate().map_err(|e| config_err(e.to_string()))?;
        if self.market.last_lead > m.horizon {
            return Err(config_err("market.last_lead exceeds model.horizon"));
        }
        if let PriceForecaster::Persistence { days: 0 } = self.market.price_forecaster {
            return Err(config_err("market.price_forecaster.days must be positive"));
        }
        self.trade_site()?;

        let r = &self.reserve;
        in_range("reserve.step", r.step, 0.0, 0.1, true)?;
        in_range("reserve.load_error_sd", r.load_error_sd, 0.0, 0.5, true)?;
        in_range("reserve.outage_probability", r.outage_probability, 0.0, 1.0, false)?;
        in_range("reserve.outage_size", r.outage_size, 0.0, 1.0, false)?;
        r.up.validate().map_err(|e| config_err(format!("reserve.up: {e}")))?;
        r.down
            .validate()
            .map_err(|e| config_err(format!("reserve.down: {e}")))?;

        let v = &self.verify;
        if v.block == 0 || v.power_bins == 0 || v.lead_bucket_hours == 0 {
            return Err(config_err("verify settings must be positive"));
        }

        for path in [
            &self.data.power,
            &self.data.speed,
            &self.data.direction,
            &self.data.prices,
        ]
        .into_iter()
        .flatten()
        {
            if !path.exists() {
                return Err(config_err(format!("referenced file {} does not exist", path.display())));
            }
        }
        if self.data.speed.is_some() != self.data.direction.is_some() {
            return Err(config_err("data.speed and data.direction must be given together"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [sites]
        ids = ["a", "b"]
        capacities = [10.0]
    "#;

    #[test]
    fn defaults_and_round_trip() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.model.horizon, 43);
        assert_eq!(cfg.market.first_lead, 13);
        assert_eq!(cfg.copula.trajectories, 12);
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        let unknown = format!("{MINIMAL}\n[model]\nlagz = [1]\n");
        assert!(matches!(RunConfig::from_toml(&unknown), Err(Error::Config(_))));
        let bad = format!("{MINIMAL}\n[copula]\nlambda = 1.5\n");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
        let cost = format!("{MINIMAL}\n[reserve.up]\nshort = 1.0\nhold = 2.0\n");
        assert!(matches!(RunConfig::from_toml(&cost), Err(Error::Config(_))));
        let missing = format!("{MINIMAL}\n[data]\nprices = \"/no/such/file.csv\"\n");
        assert!(matches!(RunConfig::from_toml(&missing), Err(Error::Config(_))));
        let lead = format!("{MINIMAL}\n[model]\nhorizon = 24\n");
        assert!(RunConfig::from_toml(&lead).is_err());
    }

    #[test]
    fn nested_settings_parse() {
        let text = format!(
            "{MINIMAL}\n[market]\nsite = \"b\"\nprice_forecaster = {{ kind = \"pass-through\" }}\n[probabilistic]\nmethod = \"parametric\"\nfamily = \"beta\"\n"
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.trade_site().unwrap(), 1);
        assert_eq!(cfg.market.price_forecaster, PriceForecaster::PassThrough);
        assert_eq!(cfg.density_family().unwrap(), Family::Beta);
    }
}
