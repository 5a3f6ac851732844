//! Monte Carlo checks that span several modules: regime recovery, error
//! dressing calibration, trajectory marginals and energy-score propriety.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use windcast::copula::{sample_trajectories, LatentCovariance, MarginalSet};
use windcast::data::SiteSet;
use windcast::point::{fit_linear, CparxModel, CparxSpec, Inputs, LinearSpec, PerfectNwp, RegimeCovariate, RegimeRule};
use windcast::prob::{dress_point_forecast, DressingOptions, ErrorClimatology, ParametricDensity, PredictiveCdf};
use windcast::sim::{simulate, RegimeSwitch, SimConfig};
use windcast::verify::energy_score;

#[test]
fn two_regime_sigma_ratio_is_recovered() {
    let mut cfg = SimConfig::homogeneous(SiteSet::uniform("s", 1, 1.0).unwrap(), 0.6, 21);
    cfg.diurnal_amplitude = 0.0;
    cfg.regime = Some(RegimeSwitch {
        threshold: 8.0,
        sd_below: 0.6,
        sd_above: 1.2,
    });
    let sim = simulate(&cfg, 40_000).unwrap();
    // Wind speed itself follows the switching AR(1); the threshold acts on
    // the previous hour's speed, which is the own lag at the origin.
    let inputs = Inputs::new(&sim.speed, cfg.start);
    let rule = RegimeRule::new(RegimeCovariate::OwnLag(1), vec![8.0]).unwrap();
    let model = fit_linear(&LinearSpec::tar(0, vec![1], 1, rule), &inputs).unwrap();
    let ratio = model.sigma(1) / model.sigma(0);
    assert!((ratio / 2.0 - 1.0).abs() < 0.1, "sigma ratio {ratio}");
}

#[test]
fn dressed_central_interval_is_calibrated() {
    const LEAD: usize = 24;
    const FIT_HOURS: usize = 12_000;
    const TRAIN_ROWS: usize = 10_000;
    const TEST_ROWS: usize = 5_000;
    let mut cfg = SimConfig::homogeneous(SiteSet::uniform("s", 1, 1.0).unwrap(), 0.6, 22);
    cfg.power_noise_sd = 0.02;
    let hours = FIT_HOURS + 24 * (TRAIN_ROWS + TEST_ROWS) + 96;
    let sim = simulate(&cfg, hours).unwrap();
    let nwp = PerfectNwp::new(sim.speed.clone(), sim.direction.clone()).unwrap();
    let train = sim.power.slice(0, FIT_HOURS);
    let model = CparxModel::fit(&CparxSpec::new(0, LEAD), &Inputs::new(&train, cfg.start).with_nwp(&nwp)).unwrap();
    let inputs = Inputs::new(&sim.power, cfg.start).with_nwp(&nwp);
    let pairs = |from: usize, count: usize| -> Vec<(f64, f64)> {
        (from..)
            .step_by(24)
            .take(count)
            .map(|t| {
                let p = model.predict_at(&inputs, t).unwrap().clamp(0.0, 1.0);
                (p, sim.power.get(t + LEAD, 0).unwrap())
            })
            .collect()
    };
    let history = pairs(FIT_HOURS + 12, TRAIN_ROWS);
    let climatology =
        ErrorClimatology::build(history.iter().map(|(p, y)| (LEAD, *p, *y)), DressingOptions::default()).unwrap();
    let held_out = pairs(FIT_HOURS + 12 + 24 * TRAIN_ROWS, TEST_ROWS);
    let inside = held_out
        .iter()
        .filter(|(p, y)| {
            let q = dress_point_forecast(*p, LEAD, &climatology, &[0.05, 0.95])
                .unwrap()
                .quantiles;
            q.values()[0] <= *y && *y <= q.values()[1]
        })
        .count();
    let coverage = inside as f64 / TEST_ROWS as f64;
    assert!((0.88..=0.92).contains(&coverage), "coverage {coverage}");
}

fn shifted_marginals(sites: usize, leads: usize, shift: f64) -> MarginalSet {
    let mut set = MarginalSet::new(sites, leads);
    for s in 0..sites {
        for k in 1..=leads {
            let mu = 0.25 + 0.1 * s as f64 + 0.05 * k as f64 + shift;
            let d = ParametricDensity::truncated_gaussian(mu, 0.12).unwrap();
            set.insert(PredictiveCdf::parametric(s, k, d)).unwrap();
        }
    }
    set
}

fn ar_correlation(dim: usize, rho: f64) -> LatentCovariance {
    LatentCovariance::from_matrix(
        DMatrix::from_fn(dim, dim, |i, j| rho.powi((i as i32 - j as i32).abs())),
        0.98,
    )
    .unwrap()
}

#[test]
fn trajectory_quantiles_converge_to_marginals() {
    let marginals = shifted_marginals(2, 3, 0.0);
    let set = sample_trajectories(&marginals, &ar_correlation(6, 0.7), 10_000, 23).unwrap();
    for cell in 0..6 {
        let mut values: Vec<f64> = set.paths.iter().map(|p| p[cell]).collect();
        assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        values.sort_by(f64::total_cmp);
        let f = marginals.get(cell).unwrap();
        for alpha in [0.1, 0.5, 0.9] {
            let empirical = values[(alpha * values.len() as f64) as usize];
            assert!(
                (empirical - f.quantile(alpha)).abs() < 0.02,
                "cell {cell} alpha {alpha}"
            );
        }
    }
}

#[test]
fn energy_score_prefers_the_true_generator() {
    let truth = shifted_marginals(2, 3, 0.0);
    let shifted = shifted_marginals(2, 3, 0.08);
    let cov = ar_correlation(6, 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let diffs: Vec<f64> = (0..500u64)
        .map(|w| {
            let observed = sample_trajectories(&truth, &cov, 1, rng.random())
                .unwrap()
                .paths
                .remove(0);
            let good = sample_trajectories(&truth, &cov, 30, 1_000 + w).unwrap();
            let bad = sample_trajectories(&shifted, &cov, 30, 1_000 + w).unwrap();
            energy_score(&good, &observed).unwrap() - energy_score(&bad, &observed).unwrap()
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(
        mean < 2.0 * sd / n.sqrt(),
        "mean difference {mean}, se {}",
        sd / n.sqrt()
    );
    assert!(mean < 0.0);
}
