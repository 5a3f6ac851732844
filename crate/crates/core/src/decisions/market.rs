//! Day-ahead offering for a price-taking producer settled under a two-price
//! imbalance system.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::copula::TrajectorySet;
use crate::data::{format_timestamp, parse_timestamp};
use crate::error::{check_unit_closed, Error, Result};
use crate::prob::PredictiveCdf;
use crate::stats::integrate_panels;

/// Quadrature panels for expected costs; three nodes each, about 2,000
/// evaluations over `[0, 1]`.
const COST_PANELS: usize = 667;

/// Regulation unit costs: `down` is paid per unit of surplus, `up` per unit
/// of deficit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCosts {
    pub down: f64,
    pub up: f64,
}

impl UnitCosts {
    pub fn new(down: f64, up: f64) -> Result<Self> {
        for (name, v) in [("downward unit cost", down), ("upward unit cost", up)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    expected: "[0, inf)",
                });
            }
        }
        Ok(Self { down, up })
    }

    /// Nominal level `down / (down + up)` of the optimal offer.
    pub fn alpha(&self) -> Result<f64> {
        let total = self.down + self.up;
        if total <= 0.0 {
            return Err(Error::Indifferent);
        }
        Ok(self.down / total)
    }

    /// Balancing cost of realizing `y` against contract `bid`.
    pub fn imbalance_cost(&self, y: f64, bid: f64) -> f64 {
        let d = y - bid;
        if d >= 0.0 {
            self.down * d
        } else {
            -self.up * d
        }
    }
}

/// Realized prices for one delivery hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceQuote {
    /// Day-ahead price.
    pub pi_c: f64,
    /// Balancing buy price.
    pub pi_b: f64,
    /// Balancing sell price.
    pub pi_s: f64,
}

impl PriceQuote {
    /// Two-price system: `pi_s <= pi_c <= pi_b`.
    pub fn new(pi_c: f64, pi_b: f64, pi_s: f64) -> Result<Self> {
        let q = Self { pi_c, pi_b, pi_s };
        q.unit_costs()?;
        Ok(q)
    }

    pub fn unit_costs(&self) -> Result<UnitCosts> {
        UnitCosts::new(self.pi_c - self.pi_s, self.pi_b - self.pi_c)
    }
}

/// An offer and the nominal level it was read at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub alpha: f64,
    pub value: f64,
}

/// Quantile of the predictive distribution at `down / (down + up)`.
pub fn optimal_bid(f: &PredictiveCdf, costs: &UnitCosts) -> Result<Bid> {
    let alpha = costs.alpha()?;
    let value = f.quantile(alpha).clamp(0.0, 1.0);
    Ok(Bid { alpha, value })
}

/// `E[B(Y, bid)]` under `f`:
/// `down * ∫_bid^1 (1 - F) + up * ∫_0^bid F`, boundary masses included
/// through the CDF.
pub fn expected_imbalance_cost(f: &PredictiveCdf, costs: &UnitCosts, bid: f64) -> Result<f64> {
    check_unit_closed("offer", bid)?;
    let mut breaks = f.breakpoints();
    breaks.push(bid);
    let surplus = integrate_panels(bid, 1.0, &breaks, COST_PANELS, |u| 1.0 - f.cdf(u));
    let deficit = integrate_panels(0.0, bid, &breaks, COST_PANELS, |u| f.cdf(u));
    Ok(costs.down * surplus + costs.up * deficit)
}

/// Settlement of one delivery hour, per unit of capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueBreakdown {
    pub day_ahead: f64,
    pub balancing: f64,
    pub total: f64,
    /// Realized `y - bid`.
    pub imbalance: f64,
}

pub fn settle(y: f64, bid: f64, prices: &PriceQuote) -> Result<RevenueBreakdown> {
    check_unit_closed("realized power", y)?;
    check_unit_closed("offer", bid)?;
    let costs = prices.unit_costs()?;
    let day_ahead = prices.pi_c * y;
    let balancing = costs.imbalance_cost(y, bid);
    Ok(RevenueBreakdown {
        day_ahead,
        balancing,
        total: day_ahead - balancing,
        imbalance: y - bid,
    })
}

/// Mean over trajectories of the summed imbalance cost of `bids` at
/// `site`; `bids[k - 1]` and `costs[k - 1]` belong to lead `k`.
pub fn trajectory_expected_cost(
    trajectories: &TrajectorySet,
    site: usize,
    bids: &[f64],
    costs: &[UnitCosts],
) -> Result<f64> {
    if bids.len() != trajectories.leads || costs.len() != trajectories.leads {
        return Err(Error::DimensionMismatch {
            expected: trajectories.leads,
            got: bids.len().min(costs.len()),
        });
    }
    if site >= trajectories.sites || trajectories.is_empty() {
        return Err(Error::InvalidArgument("site outside the trajectory set".into()));
    }
    let total: f64 = (0..trajectories.len())
        .map(|j| {
            (1..=trajectories.leads)
                .map(|k| costs[k - 1].imbalance_cost(trajectories.value(j, site, k), bids[k - 1]))
                .sum::<f64>()
        })
        .sum();
    Ok(total / trajectories.len() as f64)
}

/// Gate closure and delivery window of the day-ahead market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    /// Hours between gate closure and the start of the delivery day.
    pub gate_closure_offset: usize,
    pub first_lead: usize,
    pub last_lead: usize,
    /// UTC hour of the daily gate closure.
    pub gate_hour: u32,
}

impl Default for MarketSpec {
    fn default() -> Self {
        Self {
            gate_closure_offset: 12,
            first_lead: 13,
            last_lead: 37,
            gate_hour: 12,
        }
    }
}

impl MarketSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gate_closure_offset == 0 {
            return Err(Error::InvalidArgument("gate closure offset must be positive".into()));
        }
        if self.first_lead <= self.gate_closure_offset || self.last_lead < self.first_lead {
            return Err(Error::InvalidArgument(format!(
                "delivery leads {}..={} must follow the gate closure offset {}",
                self.first_lead, self.last_lead, self.gate_closure_offset
            )));
        }
        if self.gate_hour > 23 {
            return Err(Error::InvalidArgument("gate hour must be below 24".into()));
        }
        Ok(())
    }

    pub fn leads(&self) -> std::ops::RangeInclusive<usize> {
        self.first_lead..=self.last_lead
    }

    pub fn is_gate(&self, stamp: DateTime<Utc>) -> bool {
        stamp.hour() == self.gate_hour && stamp.minute() == 0 && stamp.second() == 0
    }
}

/// One line of the price file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRow {
    pub origin: DateTime<Utc>,
    pub lead: usize,
    pub quote: PriceQuote,
}

impl PriceRow {
    pub fn delivery(&self) -> DateTime<Utc> {
        self.origin + Duration::hours(self.lead as i64)
    }
}

/// Realized prices keyed by delivery hour.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriceTable {
    by_delivery: BTreeMap<DateTime<Utc>, PriceQuote>,
}

/// Parameters of the synthetic price generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceSimConfig {
    pub mean_price: f64,
    pub diurnal_amplitude: f64,
    pub price_noise_sd: f64,
    pub mean_down: f64,
    pub mean_up: f64,
    /// Probability that the system is short in a given hour.
    pub p_short: f64,
}

impl Default for PriceSimConfig {
    fn default() -> Self {
        Self {
            mean_price: 40.0,
            diurnal_amplitude: 10.0,
            price_noise_sd: 3.0,
            mean_down: 8.0,
            mean_up: 12.0,
            p_short: 0.5,
        }
    }
}

impl PriceTable {
    pub fn from_rows(rows: impl IntoIterator<Item = PriceRow>) -> Self {
        let mut table = Self::default();
        for row in rows {
            table.insert(row.delivery(), row.quote);
        }
        table
    }

    pub fn insert(&mut self, delivery: DateTime<Utc>, quote: PriceQuote) {
        self.by_delivery.insert(delivery, quote);
    }

    pub fn get(&self, delivery: DateTime<Utc>) -> Option<&PriceQuote> {
        self.by_delivery.get(&delivery)
    }

    pub fn len(&self) -> usize {
        self.by_delivery.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_delivery.is_empty()
    }

    /// Synthetic hourly prices over `[from, from + hours)`. In each hour the
    /// system is either short (only the upward cost is nonzero) or long.
    pub fn simulate(from: DateTime<Utc>, hours: usize, cfg: &PriceSimConfig, seed: u64) -> Result<Self> {
        if !(cfg.p_short > 0.0 && cfg.p_short < 1.0) {
            return Err(Error::OutOfRange {
                name: "p_short",
                value: cfg.p_short,
                expected: "(0, 1)",
            });
        }
        let bad = |e: rand_distr::NormalError| Error::InvalidArgument(e.to_string());
        let noise = Normal::new(0.0, cfg.price_noise_sd).map_err(bad)?;
        let exp = |mean: f64| Exp::new(1.0 / mean).map_err(|e| Error::InvalidArgument(e.to_string()));
        let up = exp(cfg.mean_up / cfg.p_short)?;
        let down = exp(cfg.mean_down / (1.0 - cfg.p_short))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = Self::default();
        for h in 0..hours {
            let t = from + Duration::hours(h as i64);
            let phase = 2.0 * std::f64::consts::PI * (t.hour() as f64 - 8.0) / 24.0;
            let pi_c = (cfg.mean_price + cfg.diurnal_amplitude * phase.sin() + noise.sample(&mut rng)).max(0.0);
            let (d, u) = if rng.random::<f64>() < cfg.p_short {
                (0.0, up.sample(&mut rng))
            } else {
                (down.sample(&mut rng), 0.0)
            };
            table.insert(t, PriceQuote::new(pi_c, pi_c + u, pi_c - d)?);
        }
        Ok(table)
    }

    /// Rows for the given origins and leads, for export.
    pub fn rows_for(&self, origins: &[DateTime<Utc>], leads: std::ops::RangeInclusive<usize>) -> Vec<PriceRow> {
        let mut rows = Vec::new();
        for &origin in origins {
            for lead in leads.clone() {
                if let Some(q) = self.get(origin + Duration::hours(lead as i64)) {
                    rows.push(PriceRow {
                        origin,
                        lead,
                        quote: *q,
                    });
                }
            }
        }
        rows
    }
}

/// Forecasts of the unit costs available when the offer is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum PriceForecaster {
    /// Uses the realized unit costs of the delivery hour.
    PassThrough,
    /// Mean realized unit costs at the same hour of the previous `days`
    /// days that were already settled at the origin.
    Persistence { days: usize },
}

impl PriceForecaster {
    pub fn forecast(&self, table: &PriceTable, origin: DateTime<Utc>, lead: usize) -> Result<UnitCosts> {
        let delivery = origin + Duration::hours(lead as i64);
        let missing =
            || Error::InvalidArgument(format!("no prices to forecast delivery {}", format_timestamp(delivery)));
        match *self {
            PriceForecaster::PassThrough => table.get(delivery).ok_or_else(missing)?.unit_costs(),
            PriceForecaster::Persistence { days } => {
                let mut first = 1 + lead.saturating_sub(1) / 24;
                if delivery - Duration::hours(24 * first as i64) > origin {
                    first += 1;
                }
                let past: Vec<UnitCosts> = (first..first + days.max(1))
                    .filter_map(|j| table.get(delivery - Duration::hours(24 * j as i64)))
                    .map(PriceQuote::unit_costs)
                    .collect::<Result<_>>()?;
                if past.is_empty() {
                    return Err(missing());
                }
                let n = past.len() as f64;
                UnitCosts::new(
                    past.iter().map(|c| c.down).sum::<f64>() / n,
                    past.iter().map(|c| c.up).sum::<f64>() / n,
                )
            }
        }
    }
}

pub const PRICE_HEADER: [&str; 5] = ["origin", "lead_h", "pi_c", "pi_b", "pi_s"];
pub const BID_HEADER: [&str; 4] = ["origin", "lead_h", "alpha", "bid"];

pub fn write_prices(path: impl AsRef<Path>, rows: &[PriceRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PRICE_HEADER)?;
    for r in rows {
        w.write_record([
            format_timestamp(r.origin),
            r.lead.to_string(),
            r.quote.pi_c.to_string(),
            r.quote.pi_b.to_string(),
            r.quote.pi_s.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, row: usize) -> Result<T> {
    let v = rec.get(k).unwrap_or("");
    v.parse().map_err(|_| Error::MalformedValue {
        row,
        value: v.to_owned(),
    })
}

fn parse_origin(rec: &csv::StringRecord, row: usize) -> Result<DateTime<Utc>> {
    let v = rec.get(0).unwrap_or("");
    parse_timestamp(v).ok_or_else(|| Error::MalformedTimestamp {
        row,
        value: v.to_owned(),
    })
}

pub fn read_prices(path: impl AsRef<Path>) -> Result<Vec<PriceRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let row = i + 2;
            Ok(PriceRow {
                origin: parse_origin(&rec, row)?,
                lead: parse_field(&rec, 1, row)?,
                quote: PriceQuote::new(
                    parse_field(&rec, 2, row)?,
                    parse_field(&rec, 3, row)?,
                    parse_field(&rec, 4, row)?,
                )?,
            })
        })
        .collect()
}

/// An offer for one delivery hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssuedBid {
    pub origin: DateTime<Utc>,
    pub lead: usize,
    pub bid: Bid,
}

pub fn write_bids(path: impl AsRef<Path>, bids: &[IssuedBid]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BID_HEADER)?;
    for b in bids {
        w.write_record([
            format_timestamp(b.origin),
            b.lead.to_string(),
            b.bid.alpha.to_string(),
            b.bid.value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_bids(path: impl AsRef<Path>) -> Result<Vec<IssuedBid>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let row = i + 2;
            Ok(IssuedBid {
                origin: parse_origin(&rec, row)?,
                lead: parse_field(&rec, 1, row)?,
                bid: Bid {
                    alpha: parse_field(&rec, 2, row)?,
                    value: parse_field(&rec, 3, row)?,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{CdfRepr, DiscreteDistribution, ParametricDensity};
    use proptest::prelude::*;

    fn uniform() -> PredictiveCdf {
        PredictiveCdf::parametric(0, 1, ParametricDensity::beta(1.0, 1.0).unwrap())
    }

    fn discrete(atoms: Vec<(f64, f64)>) -> PredictiveCdf {
        PredictiveCdf::new(0, 1, CdfRepr::Discrete(DiscreteDistribution::new(atoms).unwrap()))
    }

    #[test]
    fn level_from_costs() {
        let f = uniform();
        let sym = optimal_bid(&f, &UnitCosts::new(7.0, 7.0).unwrap()).unwrap();
        assert_eq!(sym.alpha, 0.5);
        assert!((sym.value - 0.5).abs() < 1e-9);
        assert_eq!(UnitCosts::new(10.0, 30.0).unwrap().alpha().unwrap(), 0.25);
        assert!(matches!(
            optimal_bid(&f, &UnitCosts::new(0.0, 0.0).unwrap()),
            Err(Error::Indifferent)
        ));
        assert!(UnitCosts::new(-1.0, 2.0).is_err());
        assert!(PriceQuote::new(40.0, 35.0, 30.0).is_err());
    }

    #[test]
    fn expected_cost_examples() {
        let c = UnitCosts::new(3.0, 5.0).unwrap();
        let point = discrete(vec![(0.4, 1.0)]);
        assert!(expected_imbalance_cost(&point, &c, 0.4).unwrap().abs() < 1e-12);
        assert!((expected_imbalance_cost(&point, &c, 0.3).unwrap() - 0.3).abs() < 1e-12);
        let unit = UnitCosts::new(1.0, 1.0).unwrap();
        assert!((expected_imbalance_cost(&uniform(), &unit, 0.5).unwrap() - 0.25).abs() < 1e-12);
        // Censored density: mass 0.3 at zero.
        let cens = PredictiveCdf::parametric(0, 1, ParametricDensity::censored_gaussian(0.2, 0.4).unwrap());
        let direct = {
            // Independent route: expectation over a fine grid of quantile levels.
            let n = 200_000;
            (0..n)
                .map(|i| {
                    let y = cens.quantile((i as f64 + 0.5) / n as f64);
                    c.imbalance_cost(y, 0.35)
                })
                .sum::<f64>()
                / n as f64
        };
        let quad = expected_imbalance_cost(&cens, &c, 0.35).unwrap();
        assert!((quad - direct).abs() < 1e-5, "{quad} vs {direct}");
    }

    #[test]
    fn settlement_examples() {
        let q = PriceQuote::new(40.0, 45.0, 35.0).unwrap();
        let exact = settle(0.6, 0.6, &q).unwrap();
        assert_eq!(exact.balancing, 0.0);
        assert_eq!(exact.total, 40.0 * 0.6);
        let over = settle(0.7, 0.6, &q).unwrap();
        assert!((over.balancing - 0.5).abs() < 1e-12);
        assert!(settle(1.2, 0.6, &q).is_err());
    }

    #[test]
    fn optimal_bid_beats_fixed_levels_in_simulation() {
        // Y ~ Beta(2, 5) independent of prices; the producer knows the mean
        // unit costs but not the hourly realization.
        let f = PredictiveCdf::parametric(0, 1, ParametricDensity::beta(2.0, 5.0).unwrap());
        let cfg = PriceSimConfig::default();
        let expected = UnitCosts::new(cfg.mean_down, cfg.mean_up).unwrap();
        let start = parse_timestamp("2006-01-01T00:00:00Z").unwrap();
        let n = 10_000;
        let prices = PriceTable::simulate(start, n, &cfg, 11).unwrap();
        let beta = rand_distr::Beta::new(2.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ys: Vec<f64> = (0..n).map(|_| beta.sample(&mut rng)).collect();
        let revenue = |bid: f64| -> Vec<f64> {
            (0..n)
                .map(|h| {
                    settle(ys[h], bid, prices.get(start + Duration::hours(h as i64)).unwrap())
                        .unwrap()
                        .total
                })
                .collect()
        };
        let best = optimal_bid(&f, &expected).unwrap().value;
        let r_opt = revenue(best);
        for i in 1..=9 {
            let r_fix = revenue(f.quantile(i as f64 / 10.0));
            let diff: Vec<f64> = r_opt.iter().zip(&r_fix).map(|(a, b)| a - b).collect();
            let m = crate::stats::mean(&diff);
            let se = (crate::stats::variance(&diff) / n as f64).sqrt();
            assert!(m >= -2.0 * se, "alpha {i}/10: {m} (se {se})");
        }
    }

    #[test]
    fn persistence_uses_settled_hours_only() {
        let start = parse_timestamp("2006-01-01T00:00:00Z").unwrap();
        let table = PriceTable::simulate(start, 24 * 10, &PriceSimConfig::default(), 1).unwrap();
        let origin = start + Duration::hours(24 * 5 + 12);
        let c = PriceForecaster::Persistence { days: 1 }
            .forecast(&table, origin, 13)
            .unwrap();
        let realized = table
            .get(origin + Duration::hours(13 - 24))
            .unwrap()
            .unit_costs()
            .unwrap();
        assert_eq!(c, realized);
        // Lead 37 lands 25 h ahead; one day back is still unsettled.
        let c = PriceForecaster::Persistence { days: 1 }
            .forecast(&table, origin, 37)
            .unwrap();
        let realized = table
            .get(origin + Duration::hours(37 - 48))
            .unwrap()
            .unit_costs()
            .unwrap();
        assert_eq!(c, realized);
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let origin = parse_timestamp("2007-01-01T12:00:00Z").unwrap();
        let rows = vec![PriceRow {
            origin,
            lead: 13,
            quote: PriceQuote::new(41.5, 50.25, 30.0).unwrap(),
        }];
        write_prices(dir.path().join("p.csv"), &rows).unwrap();
        assert_eq!(read_prices(dir.path().join("p.csv")).unwrap(), rows);
        let bids = vec![IssuedBid {
            origin,
            lead: 14,
            bid: Bid {
                alpha: 0.25,
                value: 0.3125,
            },
        }];
        write_bids(dir.path().join("b.csv"), &bids).unwrap();
        assert_eq!(read_bids(dir.path().join("b.csv")).unwrap(), bids);
    }

    proptest! {
        #[test]
        fn settlement_identity_and_sign(y in 0.0..=1.0f64, bid in 0.0..=1.0f64, pc in 0.0..100.0f64, d in 0.0..50.0f64, u in 0.0..50.0f64) {
            let q = PriceQuote::new(pc, pc + u, pc - d).unwrap();
            let r = settle(y, bid, &q).unwrap();
            prop_assert_eq!(r.total, r.day_ahead - r.balancing);
            prop_assert!(r.balancing >= 0.0);
            prop_assert!(r.total <= pc * y);
        }

        #[test]
        fn bid_monotone_in_downward_cost(a in 0.0..20.0f64, extra in 0.0..20.0f64, up in 0.1..20.0f64) {
            let f = PredictiveCdf::parametric(0, 1, ParametricDensity::censored_gaussian(0.4, 0.3).unwrap());
            let lo = optimal_bid(&f, &UnitCosts::new(a, up).unwrap()).unwrap();
            let hi = optimal_bid(&f, &UnitCosts::new(a + extra, up).unwrap()).unwrap();
            prop_assert!(hi.alpha >= lo.alpha);
            prop_assert!(hi.value >= lo.value);
        }
    }
}
