//! Turns 12-hour-ahead point forecasts into predictive distributions three
//! ways and scores them on held-out data.
//!
//! - quantile regression on a piecewise-linear basis in the point forecast;
//! - parametric densities on [0, 1] with the training error variance;
//! - dressing with empirical errors binned by forecast level.
//!
//! Coverage counts `y <= q`. Hours with zero output sit on quantiles clipped
//! at zero, so coverage of low levels runs above nominal.
//!
//! ```bash
//! cargo run --release --example probabilistic
//! ```

use windcast::data::{Observations, SiteSet};
use windcast::point::{HorizonMode, Inputs, LinearSpec, ModelFamily, PointForecaster};
use windcast::prob::{
    dress_point_forecast, fit_adaptive_qr, make_gln, make_parametric, select_gln_shape, DressingOptions,
    ErrorClimatology, Family, PredictiveCdf, QrOptions,
};
use windcast::sim::{simulate, SimConfig};
use windcast::verify::{crps, reliability};

const LEAD: usize = 12;
const FIT_END: usize = 8_000;
const TRAIN_END: usize = 20_000;
const HOURS: usize = 30_000;

/// `[1, ŷ, (ŷ - κ)+ ...]` with knots at quantiles of the training forecasts.
fn features(point: f64, knots: &[f64]) -> Vec<f64> {
    let mut x = vec![1.0, point];
    x.extend(knots.iter().map(|k| (point - k).max(0.0)));
    x
}

struct Score {
    name: &'static str,
    crps: f64,
    coverage: (f64, f64),
    width: f64,
}

fn score(name: &'static str, cdfs: &[PredictiveCdf], y: &[f64], levels: &[f64]) -> windcast::Result<Score> {
    let mut total = 0.0;
    let mut width = 0.0;
    let mut quantiles = Vec::with_capacity(y.len());
    for (f, &obs) in cdfs.iter().zip(y) {
        total += crps(f, obs)?;
        let q: Vec<f64> = levels.iter().map(|&a| f.quantile(a)).collect();
        width += q[levels.len() - 1] - q[0];
        quantiles.push(q);
    }
    let table = reliability(levels, &quantiles, y, None)?;
    let n = y.len() as f64;
    Ok(Score {
        name,
        crps: total / n,
        coverage: (
            table.coverage(levels[0]).unwrap(),
            table.coverage(levels[levels.len() - 1]).unwrap(),
        ),
        width: width / n,
    })
}

fn main() -> windcast::Result<()> {
    let cfg = SimConfig::homogeneous(SiteSet::uniform("farm", 1, 1.0)?, 0.6, 11);
    let sim = simulate(&cfg, HOURS)?;
    let fit = sim.power.slice(0, FIT_END);
    let family = ModelFamily::Linear(LinearSpec::ar(0, vec![1, 2, 24], 1));
    let model = PointForecaster::fit(&family, HorizonMode::Direct, LEAD, &Inputs::new(&fit, cfg.start))?;
    let inputs = Inputs::new(&sim.power, cfg.start);

    let pairs = |from: usize, to: usize| -> windcast::Result<(Vec<f64>, Vec<f64>)> {
        let mut points = Vec::new();
        let mut observed = Vec::new();
        for t in (from..to - LEAD).step_by(3) {
            if let Some(y) = sim.power.get(t + LEAD, 0) {
                points.push(model.predict(&inputs, t)?[LEAD - 1]);
                observed.push(y);
            }
        }
        Ok((points, observed))
    };
    let (train_points, train_y) = pairs(FIT_END, TRAIN_END)?;
    let (test_points, test_y) = pairs(TRAIN_END, sim.power.len())?;
    println!(
        "lead {LEAD} h, {} training and {} test forecasts",
        train_points.len(),
        test_points.len()
    );

    let levels: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    let central = [0.1, 0.9];
    let mut scores = Vec::new();

    let mut sorted = train_points.clone();
    sorted.sort_by(f64::total_cmp);
    let knots: Vec<f64> = [0.2, 0.4, 0.6, 0.8]
        .iter()
        .map(|a| sorted[(a * sorted.len() as f64) as usize])
        .collect();
    let x: Vec<Vec<f64>> = train_points.iter().map(|&p| features(p, &knots)).collect();
    let qr = fit_adaptive_qr(&x, &train_y, &levels, &QrOptions::default())?;
    let cdfs = test_points
        .iter()
        .map(|&p| Ok(PredictiveCdf::quantiles(0, LEAD, qr.predict(&features(p, &knots))?)))
        .collect::<windcast::Result<Vec<_>>>()?;
    scores.push(score("quantile regression", &cdfs, &test_y, &central)?);

    let variance = train_points
        .iter()
        .zip(&train_y)
        .map(|(p, y)| (y - p).powi(2))
        .sum::<f64>()
        / train_y.len() as f64;
    for (name, family) in [
        ("truncated gaussian", Family::TruncatedGaussian),
        ("censored gaussian", Family::CensoredGaussian),
    ] {
        let cdfs = test_points
            .iter()
            .map(|&p| {
                Ok(PredictiveCdf::parametric(
                    0,
                    LEAD,
                    make_parametric(p, variance, family)?,
                ))
            })
            .collect::<windcast::Result<Vec<_>>>()?;
        scores.push(score(name, &cdfs, &test_y, &central)?);
    }
    let triples: Vec<(f64, f64, f64)> = train_points
        .iter()
        .zip(&train_y)
        .map(|(p, y)| (*p, variance, *y))
        .collect();
    let nu = select_gln_shape(&triples)?;
    let cdfs = test_points
        .iter()
        .map(|&p| Ok(PredictiveCdf::parametric(0, LEAD, make_gln(p, variance, nu)?)))
        .collect::<windcast::Result<Vec<_>>>()?;
    scores.push(score("logit-normal", &cdfs, &test_y, &central)?);
    println!("logit-normal shape selected by likelihood: {nu}");

    let climatology = ErrorClimatology::build(
        train_points.iter().zip(&train_y).map(|(p, y)| (LEAD, *p, *y)),
        DressingOptions::default(),
    )?;
    let cdfs = test_points
        .iter()
        .map(|&p| {
            Ok(PredictiveCdf::quantiles(
                0,
                LEAD,
                dress_point_forecast(p, LEAD, &climatology, &levels)?.quantiles,
            ))
        })
        .collect::<windcast::Result<Vec<_>>>()?;
    scores.push(score("dressing", &cdfs, &test_y, &central)?);

    println!(
        "{:<20} {:>7} {:>9} {:>9} {:>9}",
        "method", "CRPS", "cov(0.1)", "cov(0.9)", "80% width"
    );
    for s in &scores {
        println!(
            "{:<20} {:>7.4} {:>9.3} {:>9.3} {:>9.3}",
            s.name, s.crps, s.coverage.0, s.coverage.1, s.width
        );
    }
    Ok(())
}
