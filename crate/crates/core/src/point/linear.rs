//! Linear autoregressions `Y_{s,t+k} = θ0 + Σ θ_i Y_{s,t-i+1} + noise`,
//! optionally switching coefficients by an observable threshold rule and
//! adding lagged values from other sites.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, NormalEquations};

use super::Inputs;

/// Observable variable driving the regime at the forecast origin `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeCovariate {
    /// `Y_{s,t-i+1}` of the target site.
    OwnLag(usize),
    /// `Y_{site,t-lag+1}` of another site.
    Site { site: usize, lag: usize },
    /// Column of the exogenous covariate panel at time `t`.
    Exogenous(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeRule {
    pub covariate: RegimeCovariate,
    /// Strictly increasing; regime `r` covers `[thresholds[r-1], thresholds[r])`.
    /// An empty list gives a single regime.
    pub thresholds: Vec<f64>,
}

impl RegimeRule {
    pub fn new(covariate: RegimeCovariate, thresholds: Vec<f64>) -> Result<Self> {
        let rule = Self { covariate, thresholds };
        rule.validate()?;
        Ok(rule)
    }

    fn validate(&self) -> Result<()> {
        if self.thresholds.iter().any(|t| !t.is_finite()) || self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "regime thresholds must be finite and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn regimes(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn regime_of(&self, value: f64) -> usize {
        self.thresholds.partition_point(|th| *th <= value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsiteTerm {
    pub site: usize,
    pub lags: Vec<usize>,
}

/// Structure of a single-horizon linear model. With `regime = None` and no
/// off-site terms this is a plain AR model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub site: usize,
    /// Lead `k` predicted from origin `t`.
    pub horizon: usize,
    pub lags: Vec<usize>,
    pub intercept: bool,
    pub regime: Option<RegimeRule>,
    pub offsite: Vec<OffsiteTerm>,
}

/// Off-site lags used when none are configured.
pub const DEFAULT_OFFSITE_LAGS: [usize; 2] = [1, 2];

fn check_lags(lags: &[usize]) -> Result<()> {
    if lags.is_empty() {
        return Err(Error::InvalidArgument("lag set must be nonempty".into()));
    }
    if lags.contains(&0) {
        return Err(Error::InvalidArgument("lags are positive integers".into()));
    }
    let mut sorted = lags.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != lags.len() {
        return Err(Error::InvalidArgument("lags must be distinct".into()));
    }
    Ok(())
}

impl LinearSpec {
    pub fn ar(site: usize, lags: Vec<usize>, horizon: usize) -> Self {
        Self {
            site,
            horizon,
            lags,
            intercept: true,
            regime: None,
            offsite: Vec::new(),
        }
    }

    pub fn tar(site: usize, lags: Vec<usize>, horizon: usize, rule: RegimeRule) -> Self {
        Self {
            regime: Some(rule),
            ..Self::ar(site, lags, horizon)
        }
    }

    pub fn rst(site: usize, lags: Vec<usize>, horizon: usize, rule: RegimeRule, offsite: Vec<OffsiteTerm>) -> Self {
        Self {
            regime: Some(rule),
            offsite,
            ..Self::ar(site, lags, horizon)
        }
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        if self.site >= n_sites {
            return Err(Error::InvalidArgument(format!("site {} not in data", self.site)));
        }
        check_lags(&self.lags)?;
        for term in &self.offsite {
            if term.site >= n_sites {
                return Err(Error::InvalidArgument(format!(
                    "off-site location {} not in data",
                    term.site
                )));
            }
            check_lags(&term.lags)?;
        }
        if let Some(rule) = &self.regime {
            rule.validate()?;
            match rule.covariate {
                RegimeCovariate::OwnLag(0) | RegimeCovariate::Site { lag: 0, .. } => {
                    return Err(Error::InvalidArgument("regime lag must be >= 1".into()))
                }
                RegimeCovariate::Site { site, .. } if site >= n_sites => {
                    return Err(Error::InvalidArgument(format!("regime site {site} not in data")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Parameters per regime.
    pub fn n_params(&self) -> usize {
        usize::from(self.intercept) + self.lags.len() + self.offsite.iter().map(|o| o.lags.len()).sum::<usize>()
    }

    pub fn n_regimes(&self) -> usize {
        self.regime.as_ref().map_or(1, RegimeRule::regimes)
    }

    /// Design row at origin `t`: `[1?, own lags..., off-site lags...]`.
    pub fn regressors(&self, inputs: &Inputs, t: usize) -> Option<Vec<f64>> {
        let t = t as isize;
        let mut x = Vec::with_capacity(self.n_params());
        if self.intercept {
            x.push(1.0);
        }
        for &i in &self.lags {
            x.push(inputs.y(t - i as isize + 1, self.site)?);
        }
        for term in &self.offsite {
            for &i in &term.lags {
                x.push(inputs.y(t - i as isize + 1, term.site)?);
            }
        }
        Some(x)
    }

    /// Regime at origin `t` (0 without a rule).
    pub fn regime_at(&self, inputs: &Inputs, t: usize) -> Option<usize> {
        let Some(rule) = &self.regime else {
            return Some(0);
        };
        let t = t as isize;
        let value = match rule.covariate {
            RegimeCovariate::OwnLag(i) => inputs.y(t - i as isize + 1, self.site)?,
            RegimeCovariate::Site { site, lag } => inputs.y(t - lag as isize + 1, site)?,
            RegimeCovariate::Exogenous(col) => {
                let cov = inputs.covariates?;
                if t < 0 || t as usize >= cov.len() {
                    return None;
                }
                cov.value(t as usize, col)?
            }
        };
        Some(rule.regime_of(value))
    }

    /// Aligned training rows `(t, regime, x, y_{t+k})`, oldest first.
    pub(crate) fn rows(&self, inputs: &Inputs) -> Vec<(usize, usize, Vec<f64>, f64)> {
        let n = inputs.target.len();
        let mut out = Vec::new();
        for t in 0..n.saturating_sub(self.horizon) {
            let Some(y) = inputs.y((t + self.horizon) as isize, self.site) else {
                continue;
            };
            let (Some(x), Some(r)) = (self.regressors(inputs, t), self.regime_at(inputs, t)) else {
                continue;
            };
            out.push((t, r, x, y));
        }
        out
    }
}

/// Coefficients of one regime, in design order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeFit {
    pub theta: Vec<f64>,
    pub sigma: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub spec: LinearSpec,
    pub regimes: Vec<RegimeFit>,
    pub in_sample_rmse: f64,
}

impl LinearModel {
    pub fn intercept(&self, regime: usize) -> f64 {
        if self.spec.intercept {
            self.regimes[regime].theta[0]
        } else {
            0.0
        }
    }

    /// Own-lag coefficients of `regime`, in the order of `spec.lags`.
    pub fn own_coefficients(&self, regime: usize) -> &[f64] {
        let start = usize::from(self.spec.intercept);
        &self.regimes[regime].theta[start..start + self.spec.lags.len()]
    }

    pub fn sigma(&self, regime: usize) -> f64 {
        self.regimes[regime].sigma
    }

    /// Unclipped conditional mean of `Y_{t+k}` given data up to origin `t`.
    pub fn predict_at(&self, inputs: &Inputs, t: usize) -> Result<f64> {
        let x = self.spec.regressors(inputs, t).ok_or(Error::MissingCell {
            site: self.spec.site,
            time: t,
        })?;
        let r = self.spec.regime_at(inputs, t).ok_or(Error::MissingCell {
            site: self.spec.site,
            time: t,
        })?;
        Ok(dot(&self.regimes[r].theta, &x))
    }

    /// Chains one-step predictions of a horizon-1 model out to `leads`.
    /// Future values enter at their predicted means. Off-site lags and
    /// off-site regime covariates that would reach past the origin are not
    /// available and yield [`Error::Unsupported`].
    pub fn predict_iterated(&self, inputs: &Inputs, origin: usize, leads: usize) -> Result<Vec<f64>> {
        if self.spec.horizon != 1 {
            return Err(Error::InvalidArgument(
                "iterated prediction needs a one-step model".into(),
            ));
        }
        let spec = &self.spec;
        let max_lag = spec.lags.iter().copied().max().unwrap_or(1);
        let missing = |time: isize| Error::MissingCell {
            site: spec.site,
            time: time.max(0) as usize,
        };
        // path[j] holds Y_{origin - max_lag + 1 + j}; extended with predictions.
        let mut path = Vec::with_capacity(max_lag + leads);
        for j in 0..max_lag {
            let time = origin as isize - max_lag as isize + 1 + j as isize;
            path.push(inputs.y(time, spec.site).ok_or_else(|| missing(time))?);
        }
        let own = |path: &[f64], step: usize, lag: usize| path[max_lag - 1 + step + 1 - lag];
        let mut out = Vec::with_capacity(leads);
        for step in 0..leads {
            // Predicting Y_{origin + step + 1} from a pseudo-origin origin + step.
            let t = (origin + step) as isize;
            let mut x = Vec::with_capacity(spec.n_params());
            if spec.intercept {
                x.push(1.0);
            }
            for &i in &spec.lags {
                x.push(own(&path, step, i));
            }
            for term in &spec.offsite {
                for &i in &term.lags {
                    let time = t - i as isize + 1;
                    if time > origin as isize {
                        return Err(Error::Unsupported(
                            "iterated prediction with off-site lags beyond the origin".into(),
                        ));
                    }
                    x.push(inputs.y(time, term.site).ok_or(Error::MissingCell {
                        site: term.site,
                        time: time.max(0) as usize,
                    })?);
                }
            }
            let r = match &spec.regime {
                None => 0,
                Some(rule) => match rule.covariate {
                    RegimeCovariate::OwnLag(i) => {
                        let value = if i > max_lag + step {
                            let time = t - i as isize + 1;
                            inputs.y(time, spec.site).ok_or_else(|| missing(time))?
                        } else {
                            own(&path, step, i)
                        };
                        rule.regime_of(value)
                    }
                    RegimeCovariate::Site { site, lag } => {
                        let time = t - lag as isize + 1;
                        if time > origin as isize {
                            return Err(Error::Unsupported(
                                "iterated prediction with an off-site regime covariate beyond the origin".into(),
                            ));
                        }
                        let value = inputs.y(time, site).ok_or(Error::MissingCell {
                            site,
                            time: time.max(0) as usize,
                        })?;
                        rule.regime_of(value)
                    }
                    // Exogenous covariates are only known up to the origin.
                    RegimeCovariate::Exogenous(_) => {
                        spec.regime_at(inputs, origin).ok_or_else(|| missing(origin as isize))?
                    }
                },
            };
            let y = dot(&self.regimes[r].theta, &x);
            path.push(y);
            out.push(y);
        }
        Ok(out)
    }
}

/// Ordinary least squares per regime.
pub fn fit_linear(spec: &LinearSpec, inputs: &Inputs) -> Result<LinearModel> {
    spec.validate(inputs.target.n_sites())?;
    let rows = spec.rows(inputs);
    let p = spec.n_params();
    let mut regimes = Vec::with_capacity(spec.n_regimes());
    let mut sse_total = 0.0;
    for r in 0..spec.n_regimes() {
        let mine: Vec<&(usize, usize, Vec<f64>, f64)> = rows.iter().filter(|row| row.1 == r).collect();
        if mine.len() < 10 * p {
            return Err(Error::TooFewRows {
                needed: 10 * p,
                got: mine.len(),
            });
        }
        let mut ne = NormalEquations::new(p);
        for (_, _, x, y) in &mine {
            ne.add(x, *y, 1.0);
        }
        let theta = ne.solve()?;
        let sse: f64 = mine.iter().map(|(_, _, x, y)| (y - dot(&theta, x)).powi(2)).sum();
        sse_total += sse;
        regimes.push(RegimeFit {
            sigma: (sse / (mine.len() - p) as f64).sqrt(),
            rows: mine.len(),
            theta,
        });
    }
    Ok(LinearModel {
        spec: spec.clone(),
        regimes,
        in_sample_rmse: (sse_total / rows.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_timestamp, Panel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn panel(columns: &[Vec<f64>]) -> Panel {
        let names = (0..columns.len()).map(|i| format!("s{i}")).collect();
        Panel::from_columns(names, parse_timestamp("2006-01-01T00:00:00Z").unwrap(), columns)
    }

    fn ar1(theta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = theta * y[t - 1] + noise.sample(&mut rng);
        }
        y
    }

    #[test]
    fn ols_recovers_ar1() {
        let data = panel(&[ar1(0.9, 10_000, 1)]);
        let inputs = Inputs::new(&data, data.start);
        let m = fit_linear(&LinearSpec::ar(0, vec![1], 1), &inputs).unwrap();
        let th = m.own_coefficients(0)[0];
        assert!((0.87..=0.93).contains(&th), "{th}");
        assert!((m.sigma(0) - 0.1).abs() < 0.005);
    }

    #[test]
    fn constant_series_is_rank_deficient() {
        let data = panel(&[vec![0.4; 500]]);
        let inputs = Inputs::new(&data, data.start);
        assert!(matches!(
            fit_linear(&LinearSpec::ar(0, vec![1, 2], 1), &inputs),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn too_few_rows() {
        let data = panel(&[ar1(0.5, 15, 2)]);
        let inputs = Inputs::new(&data, data.start);
        assert!(matches!(
            fit_linear(&LinearSpec::ar(0, vec![1], 1), &inputs),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn single_regime_tar_is_ar() {
        let data = panel(&[ar1(0.7, 3000, 3)]);
        let inputs = Inputs::new(&data, data.start);
        let ar = fit_linear(&LinearSpec::ar(0, vec![1, 2], 3), &inputs).unwrap();
        let rule = RegimeRule::new(RegimeCovariate::OwnLag(1), Vec::new()).unwrap();
        let tar = fit_linear(&LinearSpec::tar(0, vec![1, 2], 3, rule), &inputs).unwrap();
        assert_eq!(tar.regimes, ar.regimes);
    }

    #[test]
    fn rst_without_offsite_terms_is_tar() {
        let data = panel(&[ar1(0.7, 3000, 4), ar1(0.5, 3000, 5)]);
        let inputs = Inputs::new(&data, data.start);
        let rule = RegimeRule::new(RegimeCovariate::Site { site: 1, lag: 1 }, vec![0.0]).unwrap();
        let tar = fit_linear(&LinearSpec::tar(0, vec![1], 1, rule.clone()), &inputs).unwrap();
        let rst = fit_linear(&LinearSpec::rst(0, vec![1], 1, rule, Vec::new()), &inputs).unwrap();
        assert_eq!(tar.regimes, rst.regimes);
    }

    #[test]
    fn iterated_ar1_decays_geometrically() {
        let data = panel(&[vec![0.5; 10]]);
        let inputs = Inputs::new(&data, data.start);
        let model = LinearModel {
            spec: LinearSpec {
                intercept: false,
                ..LinearSpec::ar(0, vec![1], 1)
            },
            regimes: vec![RegimeFit {
                theta: vec![0.9],
                sigma: 0.1,
                rows: 0,
            }],
            in_sample_rmse: 0.0,
        };
        let f = model.predict_iterated(&inputs, 9, 5).unwrap();
        for (k, v) in f.iter().enumerate() {
            assert!((v - 0.5 * 0.9f64.powi(k as i32 + 1)).abs() < 1e-15);
        }
    }

    #[test]
    fn iterated_offsite_beyond_origin_is_unsupported() {
        let data = panel(&[ar1(0.7, 500, 6), ar1(0.5, 500, 7)]);
        let inputs = Inputs::new(&data, data.start);
        let rule = RegimeRule::new(RegimeCovariate::OwnLag(1), vec![0.0]).unwrap();
        let spec = LinearSpec::rst(
            0,
            vec![1],
            1,
            rule,
            vec![OffsiteTerm {
                site: 1,
                lags: vec![1, 2],
            }],
        );
        let m = fit_linear(&spec, &inputs).unwrap();
        assert!(m.predict_iterated(&inputs, 400, 1).is_ok());
        assert!(matches!(
            m.predict_iterated(&inputs, 400, 3),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn relabeling_sites_permutes_fits() {
        let a = ar1(0.7, 2000, 8);
        let b = ar1(0.4, 2000, 9);
        let data = panel(&[a.clone(), b.clone()]);
        let swapped = panel(&[b, a]);
        let rule = RegimeRule::new(RegimeCovariate::OwnLag(1), vec![0.0]).unwrap();
        let spec = LinearSpec::rst(
            0,
            vec![1, 2],
            2,
            rule.clone(),
            vec![OffsiteTerm { site: 1, lags: vec![1] }],
        );
        let spec_swapped = LinearSpec::rst(1, vec![1, 2], 2, rule, vec![OffsiteTerm { site: 0, lags: vec![1] }]);
        let m1 = fit_linear(&spec, &Inputs::new(&data, data.start)).unwrap();
        let m2 = fit_linear(&spec_swapped, &Inputs::new(&swapped, swapped.start)).unwrap();
        assert_eq!(m1.regimes, m2.regimes);
    }
}
