//! Scores, reliability and PIT for three forecasters of the same series.
//!
//! Observations are drawn from known truncated Gaussian distributions whose
//! location wanders as an AR(1), so scores are autocorrelated in time and
//! standard errors come from a block bootstrap. The calibrated forecaster
//! issues the true distributions; the others are too sharp or biased.
//!
//! ```bash
//! cargo run --release --example verification
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use windcast::prob::{ParametricDensity, PredictiveCdf};
use windcast::verify::{block_bootstrap_se, crps, pinball, pit_uniformity, pit_values, reliability};

const N: usize = 5_000;
const SD: f64 = 0.1;

fn forecaster(locations: &[f64], shift: f64, sd: f64) -> windcast::Result<Vec<PredictiveCdf>> {
    locations
        .iter()
        .map(|&mu| {
            Ok(PredictiveCdf::parametric(
                0,
                1,
                ParametricDensity::truncated_gaussian(mu + shift, sd)?,
            ))
        })
        .collect()
}

fn main() -> windcast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mu = 0.4;
    let locations: Vec<f64> = (0..N)
        .map(|_| {
            mu = 0.4 + 0.95 * (mu - 0.4) + 0.05 * (rng.random::<f64>() - 0.5);
            mu
        })
        .collect();
    let truth = forecaster(&locations, 0.0, SD)?;
    let y: Vec<f64> = truth.iter().map(|f| f.quantile(rng.random::<f64>())).collect();

    let levels = [0.1, 0.5, 0.9];
    println!(
        "{:<12} {:>8} {:>8} {:>9} {:>9} {:>16} {:>8}",
        "forecaster", "CRPS", "se", "pin(0.1)", "pin(0.9)", "cov 0.1/0.5/0.9", "PIT KS"
    );
    for (name, shift, sd) in [
        ("calibrated", 0.0, SD),
        ("too sharp", 0.0, 0.5 * SD),
        ("biased", 0.08, SD),
    ] {
        let forecasts = forecaster(&locations, shift, sd)?;
        let scores: Vec<f64> = forecasts
            .iter()
            .zip(&y)
            .map(|(f, &obs)| crps(f, obs))
            .collect::<windcast::Result<_>>()?;
        let mean = scores.iter().sum::<f64>() / N as f64;
        let se = block_bootstrap_se(&scores, 24, 500, 1);
        let quantiles: Vec<Vec<f64>> = forecasts
            .iter()
            .map(|f| levels.iter().map(|&a| f.quantile(a)).collect())
            .collect();
        let column = |i: usize| -> Vec<f64> { quantiles.iter().map(|q| q[i]).collect() };
        let table = reliability(&levels, &quantiles, &y, None)?;
        let coverage: Vec<String> = levels
            .iter()
            .map(|&a| format!("{:.2}", table.coverage(a).unwrap()))
            .collect();
        let ks = pit_uniformity(&pit_values(&forecasts, &y, 2)?);
        println!(
            "{name:<12} {mean:>8.4} {se:>8.4} {:>9.4} {:>9.4} {:>16} {:>8.3}",
            pinball(&column(0), &y, 0.1)?,
            pinball(&column(2), &y, 0.9)?,
            coverage.join("/"),
            ks.statistic
        );
    }
    Ok(())
}
