//! Forecast verification: point metrics, proper scores, reliability and
//! PIT, and the energy score of trajectory ensembles.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::copula::TrajectorySet;
use crate::error::{check_unit_closed, check_unit_open, Error, Result};
use crate::prob::{check_loss, PredictiveCdf};
use crate::stats::{integrate_panels, ks_uniform, mean, KsResult};

/// Default block length of the bootstrap, in hours.
pub const DEFAULT_BLOCK: usize = 24;
/// Bootstrap replicates behind each standard error.
pub const BOOTSTRAP_REPLICATES: usize = 200;
/// Minimum pairs per level for a reliability table.
pub const MIN_RELIABILITY_PAIRS: usize = 100;
const CRPS_PANELS: usize = 667;

fn matched(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    if a == 0 {
        return Err(Error::EmptySample);
    }
    Ok(())
}

/// Mean check loss of quantile forecasts `q` at level `alpha`.
pub fn pinball(q: &[f64], y: &[f64], alpha: f64) -> Result<f64> {
    check_unit_open("alpha", alpha)?;
    matched(q.len(), y.len())?;
    Ok(q.iter().zip(y).map(|(q, y)| check_loss(y - q, alpha)).sum::<f64>() / q.len() as f64)
}

/// `∫_0^1 (F(x) - 1{x >= y})^2 dx`.
pub fn crps(f: &PredictiveCdf, y: f64) -> Result<f64> {
    check_unit_closed("observation", y)?;
    let mut breaks = f.breakpoints();
    breaks.push(y);
    let below = integrate_panels(0.0, y, &breaks, CRPS_PANELS, |x| f.cdf(x).powi(2));
    let above = integrate_panels(y, 1.0, &breaks, CRPS_PANELS, |x| (1.0 - f.cdf(x)).powi(2));
    let v = below + above;
    if !v.is_finite() {
        return Err(Error::InvalidArgument("predictive CDF could not be evaluated".into()));
    }
    Ok(v)
}

/// Ensemble CRPS: `mean |x_j - y| - mean |x_i - x_j| / 2`.
pub fn sample_crps(ensemble: &[f64], y: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = ensemble.to_vec();
    crate::stats::sort_f64(&mut sorted);
    let n = sorted.len() as f64;
    let first = sorted.iter().map(|x| (x - y).abs()).sum::<f64>() / n;
    // Σ_{i,j} |x_i - x_j| from order statistics.
    let pairs: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| x * (2.0 * i as f64 + 1.0 - n))
        .sum::<f64>()
        * 2.0;
    Ok(first - pairs / (2.0 * n * n))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Ensemble energy score of trajectories against the observed window
/// (site-major, like the trajectories).
pub fn energy_score(trajectories: &TrajectorySet, y: &[f64]) -> Result<f64> {
    let j = trajectories.len();
    if j < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: j });
    }
    let dim = trajectories.sites * trajectories.leads;
    if y.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: y.len(),
        });
    }
    let paths = &trajectories.paths;
    let first = paths.iter().map(|p| euclid(p, y)).sum::<f64>() / j as f64;
    let mut spread = 0.0;
    for a in 0..j {
        for b in a + 1..j {
            spread += euclid(&paths[a], &paths[b]);
        }
    }
    // Each unordered pair appears twice in the double sum.
    Ok(first - spread / (j * j) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// Mean of `forecast - observation`.
    pub bias: f64,
    pub n: usize,
}

pub fn point_metrics(forecast: &[f64], y: &[f64]) -> Result<PointMetrics> {
    matched(forecast.len(), y.len())?;
    let e: Vec<f64> = forecast.iter().zip(y).map(|(f, y)| f - y).collect();
    Ok(PointMetrics {
        rmse: (e.iter().map(|e| e * e).sum::<f64>() / e.len() as f64).sqrt(),
        mae: e.iter().map(|e| e.abs()).sum::<f64>() / e.len() as f64,
        bias: mean(&e),
        n: e.len(),
    })
}

/// Randomized PIT: uniform between `F(y-)` and `F(y)`, so point masses do
/// not break uniformity.
pub fn pit(f: &PredictiveCdf, y: f64, rng: &mut impl Rng) -> f64 {
    let hi = f.cdf(y);
    let lo = f.cdf_left(y);
    if hi > lo {
        lo + rng.random::<f64>() * (hi - lo)
    } else {
        hi
    }
}

/// PIT values of matched forecasts and observations, reproducible for a
/// given seed.
pub fn pit_values(forecasts: &[PredictiveCdf], y: &[f64], seed: u64) -> Result<Vec<f64>> {
    matched(forecasts.len(), y.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(forecasts.iter().zip(y).map(|(f, y)| pit(f, *y, &mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityRow {
    pub alpha: f64,
    pub coverage: f64,
    pub count: usize,
    pub bin: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityTable {
    pub rows: Vec<ReliabilityRow>,
}

impl ReliabilityTable {
    pub fn coverage(&self, alpha: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.bin.is_none() && (r.alpha - alpha).abs() < 1e-12)
            .map(|r| r.coverage)
    }
}

fn coverage_rows(levels: &[f64], quantiles: &[&[f64]], y: &[f64], bin: Option<&str>) -> Vec<ReliabilityRow> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let hits = quantiles.iter().zip(y).filter(|(q, y)| **y <= q[i]).count();
            ReliabilityRow {
                alpha,
                coverage: hits as f64 / y.len() as f64,
                count: y.len(),
                bin: bin.map(str::to_owned),
            }
        })
        .collect()
}

/// Observed proportion of `y <= q_alpha` per level. `quantiles[t][i]` is
/// the forecast at `levels[i]` for observation `t`. With `bins`, rows for
/// every conditioning bin follow the overall rows.
pub fn reliability(
    levels: &[f64],
    quantiles: &[Vec<f64>],
    y: &[f64],
    bins: Option<&[String]>,
) -> Result<ReliabilityTable> {
    matched(quantiles.len(), y.len())?;
    if y.len() < MIN_RELIABILITY_PAIRS {
        return Err(Error::InsufficientSample {
            needed: MIN_RELIABILITY_PAIRS,
            got: y.len(),
        });
    }
    for q in quantiles {
        if q.len() != levels.len() {
            return Err(Error::DimensionMismatch {
                expected: levels.len(),
                got: q.len(),
            });
        }
    }
    let refs: Vec<&[f64]> = quantiles.iter().map(Vec::as_slice).collect();
    let mut rows = coverage_rows(levels, &refs, y, None);
    if let Some(bins) = bins {
        matched(bins.len(), y.len())?;
        let mut names: Vec<&String> = bins.iter().collect();
        names.sort();
        names.dedup();
        for name in names {
            let idx: Vec<usize> = (0..y.len()).filter(|&t| &bins[t] == name).collect();
            let q: Vec<&[f64]> = idx.iter().map(|&t| refs[t]).collect();
            let yy: Vec<f64> = idx.iter().map(|&t| y[t]).collect();
            rows.extend(coverage_rows(levels, &q, &yy, Some(name)));
        }
    }
    Ok(ReliabilityTable { rows })
}

/// Bin label from the forecast power level and lead time.
pub fn conditioning_bin(power: f64, lead: usize, power_bins: usize, lead_bucket_hours: usize) -> String {
    let b = ((power.clamp(0.0, 1.0) * power_bins as f64) as usize).min(power_bins - 1);
    let l = (lead - 1) / lead_bucket_hours.max(1);
    format!("p{b}-k{l}")
}

pub fn pit_uniformity(pit: &[f64]) -> KsResult {
    ks_uniform(pit)
}

/// Moving-block bootstrap standard error of the mean of a time-ordered
/// series.
pub fn block_bootstrap_se(values: &[f64], block: usize, replicates: usize, seed: u64) -> f64 {
    let n = values.len();
    if n < 2 || replicates == 0 {
        return 0.0;
    }
    let b = block.clamp(1, n);
    let starts = n - b + 1;
    let blocks = n.div_ceil(b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..replicates)
        .map(|_| {
            let mut sum = 0.0;
            let mut count = 0;
            for _ in 0..blocks {
                let s = rng.random_range(0..starts);
                for v in &values[s..s + b] {
                    if count < n {
                        sum += v;
                        count += 1;
                    }
                }
            }
            sum / count as f64
        })
        .collect();
    crate::stats::variance(&means).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreLine {
    /// `None` for the overall line.
    pub lead: Option<usize>,
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub metric: String,
    pub per_lead: Vec<ScoreLine>,
    pub overall: ScoreLine,
}

impl ScoreReport {
    /// Scores per lead, each a time-ordered series. The overall standard
    /// error bootstraps the cross-lead average at each time when all leads
    /// have the same length, and the concatenation otherwise.
    pub fn from_series(metric: &str, series: &[(usize, Vec<f64>)], block: usize, seed: u64) -> Result<Self> {
        if series.is_empty() || series.iter().any(|(_, v)| v.is_empty()) {
            return Err(Error::EmptySample);
        }
        let per_lead = series
            .iter()
            .map(|(lead, v)| ScoreLine {
                lead: Some(*lead),
                value: mean(v),
                se: block_bootstrap_se(v, block, BOOTSTRAP_REPLICATES, seed ^ *lead as u64),
                n: v.len(),
            })
            .collect();
        let all: Vec<f64> = series.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        let len = series[0].1.len();
        let se = if series.iter().all(|(_, v)| v.len() == len) {
            let avg: Vec<f64> = (0..len)
                .map(|t| series.iter().map(|(_, v)| v[t]).sum::<f64>() / series.len() as f64)
                .collect();
            block_bootstrap_se(&avg, block, BOOTSTRAP_REPLICATES, seed)
        } else {
            block_bootstrap_se(&all, block, BOOTSTRAP_REPLICATES, seed)
        };
        Ok(Self {
            metric: metric.to_owned(),
            per_lead,
            overall: ScoreLine {
                lead: None,
                value: mean(&all),
                se,
                n: all.len(),
            },
        })
    }
}

pub const SCORE_HEADER: [&str; 5] = ["metric", "lead_h", "value", "se", "n"];

/// Writes `metric,lead_h,value,se,n`; overall lines carry `lead_h = all`.
pub fn write_scores(path: impl AsRef<Path>, reports: &[ScoreReport]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SCORE_HEADER)?;
    for r in reports {
        for line in r.per_lead.iter().chain(std::iter::once(&r.overall)) {
            w.write_record([
                r.metric.clone(),
                line.lead.map_or_else(|| "all".to_owned(), |k| k.to_string()),
                line.value.to_string(),
                line.se.to_string(),
                line.n.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `alpha,coverage,n` plus a `bin` column when any row is binned.
pub fn write_reliability(path: impl AsRef<Path>, table: &ReliabilityTable) -> Result<()> {
    let path = path.as_ref();
    let binned = table.rows.iter().any(|r| r.bin.is_some());
    let mut w = csv::Writer::from_path(path)?;
    if binned {
        w.write_record(["alpha", "coverage", "n", "bin"])?;
    } else {
        w.write_record(["alpha", "coverage", "n"])?;
    }
    for r in &table.rows {
        let mut rec = vec![r.alpha.to_string(), r.coverage.to_string(), r.count.to_string()];
        if binned {
            rec.push(r.bin.clone().unwrap_or_else(|| "all".to_owned()));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// PIT dump: `site,lead_h,pit`.
pub fn write_pit(path: impl AsRef<Path>, rows: &[(String, usize, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["site", "lead_h", "pit"])?;
    for (site, lead, v) in rows {
        w.write_record([site.clone(), lead.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
