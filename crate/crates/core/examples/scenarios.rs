//! Space-time scenarios from a Gaussian copula.
//!
//! The "truth" couples two sites over 24 leads with an exponentially
//! decaying latent correlation. The example learns that correlation
//! recursively from observed windows, then compares trajectories sampled
//! with the learned matrix and with independent cells, both on the energy
//! score and on the spread of the daily energy total.
//!
//! ```bash
//! cargo run --release --example scenarios
//! ```

use nalgebra::DMatrix;

use windcast::copula::{sample_trajectories, to_latent, LatentCovariance, MarginalSet, TrajectorySet};
use windcast::prob::{ParametricDensity, PredictiveCdf};
use windcast::verify::energy_score;

const SITES: usize = 2;
const LEADS: usize = 24;
const DRAWS: usize = 200;

fn marginals() -> windcast::Result<MarginalSet> {
    let mut set = MarginalSet::new(SITES, LEADS);
    for s in 0..SITES {
        for k in 1..=LEADS {
            let centre = 0.45 + 0.15 * (k as f64 / 24.0 * std::f64::consts::TAU).sin() - 0.1 * s as f64;
            let spread = 0.08 + 0.006 * k as f64;
            set.insert(PredictiveCdf::parametric(
                s,
                k,
                ParametricDensity::truncated_gaussian(centre, spread)?,
            ))?;
        }
    }
    Ok(set)
}

/// `exp(-|k - l| / 6)` in time, times 0.7 across sites.
fn true_correlation() -> DMatrix<f64> {
    let dim = SITES * LEADS;
    DMatrix::from_fn(dim, dim, |i, j| {
        let (si, ki) = (i / LEADS, i % LEADS);
        let (sj, kj) = (j / LEADS, j % LEADS);
        let time = (-((ki as f64 - kj as f64).abs()) / 6.0).exp();
        if si == sj {
            time
        } else {
            0.7 * time
        }
    })
}

fn daily_totals(set: &TrajectorySet) -> Vec<f64> {
    set.paths.iter().map(|p| p.iter().sum()).collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn main() -> windcast::Result<()> {
    let marginals = marginals()?;
    let truth = LatentCovariance::from_matrix(true_correlation(), 0.995)?;

    // Observed windows, one draw per day from the true generator.
    let observed: Vec<Vec<f64>> = (0..1500u64)
        .map(|d| Ok(sample_trajectories(&marginals, &truth, 1, 10_000 + d)?.paths.remove(0)))
        .collect::<windcast::Result<_>>()?;

    let mut learned = LatentCovariance::identity(SITES * LEADS, 0.995)?;
    for y in &observed[..1000] {
        learned.update(&to_latent(y, &marginals)?)?;
    }
    let err = (learned.matrix() - truth.matrix()).abs().max();
    println!("learned correlation after 1000 windows: largest entry error {err:.3}");
    println!(
        "site 0, leads 1 and 2: true {:.3}, learned {:.3}",
        truth.get(0, 1),
        learned.get(0, 1)
    );

    let independent = LatentCovariance::identity(SITES * LEADS, 0.995)?;
    let held_out = &observed[1000..];
    let mut diffs = Vec::with_capacity(held_out.len());
    for (w, y) in held_out.iter().enumerate() {
        let a = sample_trajectories(&marginals, &learned, DRAWS, w as u64)?;
        let b = sample_trajectories(&marginals, &independent, DRAWS, w as u64)?;
        diffs.push(energy_score(&a, y)? - energy_score(&b, y)?);
    }
    let (mean, sd) = mean_sd(&diffs);
    println!(
        "energy score, learned minus independent: {mean:.4} (se {:.4}, {} windows)",
        sd / (diffs.len() as f64).sqrt(),
        diffs.len()
    );

    let observed_totals: Vec<f64> = held_out.iter().map(|p| p.iter().sum()).collect();
    let learned_totals = daily_totals(&sample_trajectories(&marginals, &learned, 5_000, 1)?);
    let independent_totals = daily_totals(&sample_trajectories(&marginals, &independent, 5_000, 1)?);
    println!("daily energy total (capacity-hours), mean and sd:");
    for (name, v) in [
        ("observed", &observed_totals),
        ("learned", &learned_totals),
        ("independent", &independent_totals),
    ] {
        let (m, s) = mean_sd(v);
        println!("  {name:<12} {m:>7.2} {s:>7.2}");
    }
    Ok(())
}
