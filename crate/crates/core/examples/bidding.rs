//! Day-ahead offers under a two-price balancing market.
//!
//! Each day at the 12:00 gate, a wind producer offers energy for the next
//! delivery day. Offering the point forecast ignores the asymmetry of the
//! balancing costs. Offering the predictive quantile at
//! `down / (down + up)`, with unit costs forecast from the previous week,
//! minimizes the expected imbalance cost.
//!
//! ```bash
//! cargo run --release --example bidding
//! ```

use windcast::data::SiteSet;
use windcast::decisions::{optimal_bid, settle, MarketSpec, PriceForecaster, PriceSimConfig, PriceTable};
use windcast::point::{HorizonMode, Inputs, LinearSpec, ModelFamily, PointForecaster};
use windcast::prob::{make_parametric, Family, PredictiveCdf};
use windcast::sim::{simulate, SimConfig};
use windcast::Error;

const FIT_END: usize = 10_000;
const HOURS: usize = 20_000;

#[derive(Default)]
struct Ledger {
    day_ahead: f64,
    balancing: f64,
    hours: usize,
}

fn main() -> windcast::Result<()> {
    let cfg = SimConfig::homogeneous(SiteSet::uniform("farm", 1, 1.0)?, 0.6, 3);
    let sim = simulate(&cfg, HOURS)?;
    let market = MarketSpec::default();
    let leads = market.last_lead;

    // Shortfalls are expensive relative to surpluses in this market.
    let price_cfg = PriceSimConfig {
        mean_down: 5.0,
        mean_up: 15.0,
        ..PriceSimConfig::default()
    };
    let prices = PriceTable::simulate(cfg.start, HOURS + 48, &price_cfg, 99)?;
    let price_forecast = PriceForecaster::Persistence { days: 7 };

    let fit = sim.power.slice(0, FIT_END);
    let family = ModelFamily::Linear(LinearSpec::ar(0, vec![1, 2, 24], 1));
    let model = PointForecaster::fit(&family, HorizonMode::Direct, leads, &Inputs::new(&fit, cfg.start))?;
    let inputs = Inputs::new(&sim.power, cfg.start);
    let gates: Vec<usize> = (0..HOURS - leads)
        .filter(|&t| market.is_gate(sim.power.timestamp(t)))
        .collect();

    // Error variance per lead from the training period.
    let mut variance = vec![0.0; leads];
    let mut count = vec![0usize; leads];
    for &t in gates.iter().filter(|&&t| t > 48 && t + leads < FIT_END) {
        let forecast = model.predict(&inputs, t)?;
        for k in 1..=leads {
            if let Some(y) = sim.power.get(t + k, 0) {
                variance[k - 1] += (y - forecast[k - 1]).powi(2);
                count[k - 1] += 1;
            }
        }
    }
    for (v, n) in variance.iter_mut().zip(&count) {
        *v /= *n as f64;
    }

    let mut point = Ledger::default();
    let mut quantile = Ledger::default();
    let mut perfect = 0.0;
    let mut alphas = Vec::new();
    for &t in gates.iter().filter(|&&t| t >= FIT_END) {
        let origin = sim.power.timestamp(t);
        let forecast = model.predict(&inputs, t)?;
        for k in market.leads() {
            let (Some(y), Some(realized)) = (sim.power.get(t + k, 0), prices.get(sim.power.timestamp(t + k))) else {
                continue;
            };
            let costs = price_forecast.forecast(&prices, origin, k)?;
            let f = PredictiveCdf::parametric(
                0,
                k,
                make_parametric(forecast[k - 1], variance[k - 1], Family::CensoredGaussian)?,
            );
            let bid = match optimal_bid(&f, &costs) {
                Ok(bid) => {
                    alphas.push(bid.alpha);
                    bid.value
                }
                Err(Error::Indifferent) => f.inverse(0.5)?,
                Err(e) => return Err(e),
            };
            for (ledger, offer) in [(&mut point, forecast[k - 1]), (&mut quantile, bid)] {
                let r = settle(y, offer, realized)?;
                ledger.day_ahead += r.day_ahead;
                ledger.balancing += r.balancing;
                ledger.hours += 1;
            }
            perfect += realized.pi_c * y;
        }
    }

    let mean_alpha = alphas.iter().sum::<f64>() / alphas.len() as f64;
    println!("{} delivery hours, mean offer level {mean_alpha:.3}", point.hours);
    println!(
        "{:<16} {:>12} {:>12} {:>12}",
        "strategy", "day-ahead", "balancing", "net"
    );
    for (name, l) in [("point forecast", &point), ("quantile offer", &quantile)] {
        println!(
            "{name:<16} {:>12.1} {:>12.1} {:>12.1}",
            l.day_ahead,
            l.balancing,
            l.day_ahead - l.balancing
        );
    }
    println!(
        "{:<16} {:>12.1} {:>12.1} {:>12.1}",
        "perfect offer", perfect, 0.0, perfect
    );
    println!(
        "balancing cost cut by {:.1}%",
        100.0 * (1.0 - quantile.balancing / point.balancing)
    );
    Ok(())
}
