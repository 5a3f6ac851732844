//! Acceptance gate: ten oracle and property checks with fixed seeds, one
//! `PASS`/`FAIL` line each. Exits non-zero when any check fails.
//!
//! ```bash
//! cargo test --test acceptance
//! cargo test --test acceptance -- 1 6    # selected criteria only
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal as StatrsNormal};

use windcast::config::RunConfig;
use windcast::copula::{sample_trajectories, LatentCovariance, MarginalSet, TrajectorySet};
use windcast::data::{parse_timestamp, SiteSet, SpaceTimeSeries};
use windcast::decisions::{
    convolve_margin, expected_imbalance_cost, expected_reserve_cost, optimal_bid, optimal_reserves, settle,
    GridDensity, PriceQuote, ReserveProblem, SideCost, UnitCosts,
};
use windcast::pipeline::{run_pipeline, RunOptions, Stage};
use windcast::point::{
    fit_linear, fit_recursive, persistence, CparxModel, CparxSpec, Inputs, LinearSpec, PerfectNwp, RegimeCovariate,
    RegimeRule,
};
use windcast::prob::{
    fit_adaptive_qr, CdfRepr, DiscreteDistribution, ParametricDensity, PredictiveCdf, QrOptions, QuantileSet,
};
use windcast::sim::{simulate, SimConfig};
use windcast::verify::{crps, energy_score, pinball, sample_crps};

/// `Ok(detail)` passes, `Err(detail)` fails.
type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn lib<T>(r: windcast::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn random_density(rng: &mut ChaCha8Rng, kind: usize) -> windcast::Result<PredictiveCdf> {
    let d = match kind % 5 {
        0 => ParametricDensity::truncated_gaussian(uniform(rng, 0.0, 1.0), uniform(rng, 0.03, 0.3))?,
        1 => ParametricDensity::censored_gaussian(uniform(rng, -0.1, 1.1), uniform(rng, 0.03, 0.3))?,
        2 => ParametricDensity::beta(uniform(rng, 0.5, 5.0), uniform(rng, 0.5, 5.0))?,
        3 => ParametricDensity::generalized_logit_normal(
            uniform(rng, -2.0, 2.0),
            uniform(rng, 0.2, 1.5),
            [0.5, 1.0, 2.0][rng.random_range(0..3)],
        )?,
        _ => {
            let levels: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
            let mut values: Vec<f64> = (0..9).map(|_| uniform(rng, -0.05, 1.0).max(0.0)).collect();
            values.sort_by(f64::total_cmp);
            return Ok(PredictiveCdf::quantiles(0, 1, QuantileSet::new(levels, values)?));
        }
    };
    Ok(PredictiveCdf::parametric(0, 1, d))
}

/// Running integral `I(b) = ∫_0^b F` on a uniform grid, so that the expected
/// imbalance cost of any offer is `down ((1 - b) - (I(1) - I(b))) + up I(b)`.
struct CostTable {
    h: f64,
    cdf: Vec<f64>,
    cum: Vec<f64>,
}

impl CostTable {
    fn new(f: &PredictiveCdf, cells: usize) -> Self {
        let h = 1.0 / cells as f64;
        // Left limit at 1: a mass at the upper bound adds nothing to the
        // integral over [0, 1].
        let mut cdf: Vec<f64> = (0..cells).map(|i| f.cdf(i as f64 * h)).collect();
        cdf.push(f.cdf_left(1.0));
        let mut cum = vec![0.0; cells + 1];
        for i in 1..=cells {
            cum[i] = cum[i - 1] + 0.5 * h * (cdf[i - 1] + cdf[i]);
        }
        Self { h, cdf, cum }
    }

    fn integral(&self, b: f64) -> f64 {
        let i = ((b / self.h) as usize).min(self.cdf.len() - 2);
        let frac = b / self.h - i as f64;
        let at_b = self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i]);
        self.cum[i] + 0.5 * frac * self.h * (self.cdf[i] + at_b)
    }

    fn cost(&self, costs: &UnitCosts, b: f64) -> f64 {
        let total = self.cum[self.cum.len() - 1];
        let below = self.integral(b);
        costs.down * ((1.0 - b) - (total - below)) + costs.up * below
    }
}

fn newsvendor() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = f64::NEG_INFINITY;
    let mut route_gap = 0.0f64;
    for i in 0..100 {
        let f = lib(random_density(&mut rng, i))?;
        let costs = lib(UnitCosts::new(
            uniform(&mut rng, 0.1, 50.0),
            uniform(&mut rng, 0.1, 50.0),
        ))?;
        let bid = lib(optimal_bid(&f, &costs))?;
        let table = CostTable::new(&f, 20_000);
        let at_bid = table.cost(&costs, bid.value);
        let grid_min = (0..1000)
            .map(|g| table.cost(&costs, g as f64 / 999.0))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(at_bid - grid_min);
        route_gap = route_gap.max((lib(expected_imbalance_cost(&f, &costs, bid.value))? - at_bid).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "max(cost at quantile bid - grid min) = {worst:.3e}, library vs table cost {route_gap:.1e}, {secs:.2} s"
    );
    if worst <= 1e-6 && route_gap < 1e-5 && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn settlement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0usize;
    let mut max_route_gap = 0.0f64;
    for i in 0..100_000 {
        let y = rng.random::<f64>();
        let bid = rng.random::<f64>();
        let pi_c = uniform(&mut rng, 0.0, 100.0);
        // Every tenth triple has one regulation cost at zero.
        let up = if i % 10 == 3 { 0.0 } else { uniform(&mut rng, 0.0, 50.0) };
        let down = if i % 10 == 7 { 0.0 } else { uniform(&mut rng, 0.0, 50.0) };
        let prices = lib(PriceQuote::new(pi_c, pi_c + up, pi_c - down))?;
        let r = lib(settle(y, bid, &prices))?;
        if r.total != r.day_ahead - r.balancing || r.balancing.is_nan() || r.balancing < 0.0 {
            violations += 1;
        }
        // Cash flows as the market pays them: contract at the day-ahead
        // price, imbalance at the balancing sell or buy price.
        let imbalance_price = if y >= bid { prices.pi_s } else { prices.pi_b };
        let cash = prices.pi_c * bid + imbalance_price * (y - bid);
        max_route_gap = max_route_gap.max((cash - r.total).abs());
    }
    let detail = format!("violations = {violations}, max |cash flow - (S - B)| = {max_route_gap:.2e}");
    if violations == 0 && max_route_gap < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn convolution() -> Outcome {
    let step = 0.001;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_var = 0.0f64;
    let mut worst_mass = 0.0f64;
    for _ in 0..20 {
        let (s1, s2) = (uniform(&mut rng, 0.01, 0.08), uniform(&mut rng, 0.01, 0.08));
        let a = lib(GridDensity::gaussian(uniform(&mut rng, -0.1, 0.1), s1, step))?;
        let b = lib(GridDensity::gaussian(uniform(&mut rng, -0.1, 0.1), s2, step))?;
        let c = lib(a.convolve(&b))?;
        worst_var = worst_var.max((c.variance() / (s1 * s1 + s2 * s2) - 1.0).abs());
        worst_mass = worst_mass.max((c.total() - 1.0).abs());
    }
    let mut worst_cells = 0.0f64;
    for _ in 0..50 {
        let (x1, x2) = (uniform(&mut rng, -0.5, 0.5), uniform(&mut rng, -0.4, 0.4));
        let c = lib(lib(GridDensity::point(x1, step))?.convolve(&lib(GridDensity::point(x2, step))?))?;
        let at = (0..c.len())
            .max_by(|i, j| c.masses()[*i].total_cmp(&c.masses()[*j]))
            .unwrap_or(0);
        worst_cells = worst_cells.max((c.x(at) - (x1 + x2)).abs() / step);
        worst_mass = worst_mass.max((c.total() - 1.0).abs());
    }
    // The three-way system margin keeps its mass too.
    let f = lib(random_density(&mut rng, 0))?;
    let problem = ReserveProblem {
        load_error: lib(GridDensity::gaussian(0.0, 0.03, step))?,
        generation_loss: lib(GridDensity::two_point_outage(0.02, 0.1, step))?,
        wind_error: lib(GridDensity::wind_error(&f, f.quantile(0.5), step))?,
        up: lib(SideCost::new(10.0, 1.0))?,
        down: lib(SideCost::new(10.0, 1.0))?,
    };
    worst_mass = worst_mass.max((lib(convolve_margin(&problem))?.density.total() - 1.0).abs());
    let detail = format!(
        "variance rel err = {worst_var:.2e}, delta sum off by {worst_cells:.2} cells, mass err = {worst_mass:.1e}"
    );
    if worst_var < 1e-3 && worst_cells <= 1.0 && worst_mass <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Brute-force minimizer over every grid point from 0 to the top of the
/// support.
fn reserve_grid_search(part: &GridDensity, short: f64, hold: f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let top = (0..part.len()).rev().find(|i| part.masses()[*i] > 0.0).unwrap_or(0);
    for g in 0..=top {
        let q = part.x(g);
        if q < -1e-12 {
            continue;
        }
        let cost: f64 = (0..part.len())
            .map(|i| {
                let x = part.x(i);
                part.masses()[i] * if x <= q { hold * (q - x) } else { short * (x - q) }
            })
            .sum();
        if cost < best.0 {
            best = (cost, q);
        }
    }
    best.1
}

fn random_side_cost(rng: &mut ChaCha8Rng) -> Result<SideCost, String> {
    let hold = uniform(rng, 0.5, 5.0);
    lib(SideCost::new(hold + uniform(rng, 0.5, 50.0), hold))
}

fn reserve() -> Outcome {
    let step = 0.001;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    let mut cost_gap = f64::NEG_INFINITY;
    for i in 0..50 {
        let f = lib(random_density(&mut rng, i))?;
        let point = f.quantile(uniform(&mut rng, 0.3, 0.7)).clamp(0.0, 1.0);
        let problem = ReserveProblem {
            load_error: lib(GridDensity::gaussian(
                uniform(&mut rng, -0.01, 0.01),
                uniform(&mut rng, 0.01, 0.05),
                step,
            ))?
            .trimmed(1e-12),
            generation_loss: lib(GridDensity::two_point_outage(
                uniform(&mut rng, 0.0, 0.05),
                uniform(&mut rng, 0.02, 0.2),
                step,
            ))?,
            wind_error: lib(GridDensity::wind_error(&f, point, step))?.trimmed(1e-12),
            up: random_side_cost(&mut rng)?,
            down: random_side_cost(&mut rng)?,
        };
        let margin = lib(convolve_margin(&problem))?;
        let decision = lib(optimal_reserves(&problem, &margin))?;
        for (part, cost, q) in [
            (margin.positive_part(), problem.up, decision.q_up),
            (margin.negative_part(), problem.down, decision.q_down),
        ] {
            let brute = reserve_grid_search(&part, cost.short, cost.hold);
            worst = worst.max((q - brute).abs());
            cost_gap =
                cost_gap.max(expected_reserve_cost(&part, &cost, q) - expected_reserve_cost(&part, &cost, brute));
        }
    }
    let detail = format!("max |quantile - grid search| = {worst:.4}, max cost excess = {cost_gap:.2e}");
    if worst <= step + 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Asymptotic Kolmogorov p-value of the one-sample statistic `d` for `n`
/// draws, with the small-sample correction of Stephens.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn ks_statistic(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
        .fold(0.0, f64::max)
}

fn copula_marginals() -> windcast::Result<MarginalSet> {
    let densities = [
        ParametricDensity::beta(2.0, 5.0)?,
        ParametricDensity::truncated_gaussian(0.4, 0.2)?,
        ParametricDensity::generalized_logit_normal(0.3, 0.8, 1.0)?,
        ParametricDensity::beta(0.8, 0.6)?,
        ParametricDensity::truncated_gaussian(0.9, 0.3)?,
    ];
    let mut cdfs: Vec<PredictiveCdf> = Vec::new();
    for (i, d) in densities.into_iter().enumerate() {
        cdfs.push(PredictiveCdf::parametric(i / 3, i % 3 + 1, d));
    }
    let set = QuantileSet::new(vec![0.1, 0.5, 0.9], vec![0.2, 0.45, 0.8])?;
    cdfs.push(PredictiveCdf::quantiles(1, 3, set));
    MarginalSet::from_cdfs(2, 3, cdfs)
}

fn sample_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn copula() -> Outcome {
    let draws = 10_000;
    let marginals = lib(copula_marginals())?;
    let dim = marginals.dim();
    let cells = |set: &TrajectorySet| -> Result<Vec<Vec<f64>>, String> {
        (0..dim)
            .map(|i| {
                let f = lib(marginals.get(i))?;
                Ok(set.paths.iter().map(|p| f.cdf(p[i])).collect())
            })
            .collect()
    };

    let independent = lib(sample_trajectories(
        &marginals,
        &lib(LatentCovariance::identity(dim, 0.98))?,
        draws,
        505,
    ))?;
    let min_p = cells(&independent)?
        .into_iter()
        .map(|u| ks_p_value(ks_statistic(u), draws))
        .fold(1.0, f64::min);

    let mut rng = ChaCha8Rng::seed_from_u64(506);
    let a: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let mut c: DMatrix<f64> = &a * a.transpose() + DMatrix::<f64>::identity(dim, dim) * 0.1;
    let d: Vec<f64> = (0..dim).map(|i| c[(i, i)].sqrt()).collect();
    for i in 0..dim {
        for j in 0..dim {
            c[(i, j)] /= d[i] * d[j];
        }
    }
    let c = (&c + c.transpose()) * 0.5;
    let target = c.clone();
    let dependent = lib(sample_trajectories(
        &marginals,
        &lib(LatentCovariance::from_matrix(c, 0.98))?,
        draws,
        507,
    ))?;
    let normal = StatrsNormal::standard();
    let latent: Vec<Vec<f64>> = cells(&dependent)?
        .into_iter()
        .map(|u| {
            u.into_iter()
                .map(|p| normal.inverse_cdf(p.clamp(1e-12, 1.0 - 1e-12)))
                .collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..i {
            worst = worst.max((sample_correlation(&latent[i], &latent[j]) - target[(i, j)]).abs());
        }
    }
    let detail = format!("identity: min KS p = {min_p:.3}; random PSD: max |corr - target| = {worst:.4}");
    if min_p > 0.01 && worst <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Same basis as the pipeline: `[1, p, (p - κ)+ for κ in 0.2..0.8]`.
fn hinge_features(p: f64) -> Vec<f64> {
    let mut x = vec![1.0, p];
    x.extend([0.2, 0.4, 0.6, 0.8].iter().map(|k| (p - k).max(0.0)));
    x
}

fn quantile_regression() -> Outcome {
    const LEAD: usize = 24;
    const FIT_HOURS: usize = 12_000;
    const QR_ROWS: usize = 10_000;
    const HELD_OUT: usize = 5_000;
    const QR_END: usize = FIT_HOURS + 24 * QR_ROWS + 48;
    let hours = QR_END + 24 * HELD_OUT + 48;
    let mut cfg = SimConfig::homogeneous(lib(SiteSet::uniform("s", 1, 1.0))?, 0.6, 606);
    cfg.power_noise_sd = 0.02;
    let sim = lib(simulate(&cfg, hours))?;
    let nwp = lib(PerfectNwp::new(sim.speed.clone(), sim.direction.clone()))?;
    let train = sim.power.slice(0, FIT_HOURS);
    let model = lib(CparxModel::fit(
        &CparxSpec::new(0, LEAD),
        &Inputs::new(&train, cfg.start).with_nwp(&nwp),
    ))?;
    let inputs = Inputs::new(&sim.power, cfg.start).with_nwp(&nwp);
    // Origins at one hour of day, as with daily gate closures.
    let rows = |from: usize, count: usize| -> Result<(Vec<Vec<f64>>, Vec<f64>), String> {
        let mut x = Vec::with_capacity(count);
        let mut y = Vec::with_capacity(count);
        for t in (from..).step_by(24).take(count) {
            let p = lib(model.predict_at(&inputs, t))?.clamp(0.0, 1.0);
            x.push(hinge_features(p));
            y.push(sim.power.get(t + LEAD, 0).ok_or("missing simulated value")?);
        }
        Ok((x, y))
    };
    let (x_fit, y_fit) = rows(FIT_HOURS + 12, QR_ROWS)?;
    let (x_test, y_test) = rows(QR_END + 12, HELD_OUT)?;
    let levels = [0.1, 0.25, 0.5, 0.75, 0.9];
    let qr = lib(fit_adaptive_qr(&x_fit, &y_fit, &levels, &QrOptions::default()))?;
    let mut coverage = [0.0; 5];
    for (x, y) in x_test.iter().zip(&y_test) {
        // Raw linear quantiles: clipping at the bounds would count every
        // zero observation as covered.
        for (c, q) in coverage.iter_mut().zip(qr.predict_raw(x)) {
            if *y <= q {
                *c += 1.0 / HELD_OUT as f64;
            }
        }
    }
    let worst = levels
        .iter()
        .zip(&coverage)
        .map(|(a, c)| (a - c).abs())
        .fold(0.0, f64::max);
    let shown: Vec<String> = coverage.iter().map(|c| format!("{c:.3}")).collect();
    let detail = format!(
        "coverage at {levels:?} = [{}], max deviation = {worst:.4} ({} training rows)",
        shown.join(", "),
        y_fit.len()
    );
    if worst <= 0.02 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Two-parameter OLS `y = a + b x` in closed form.
fn ols_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

fn model_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let noise = Normal::new(0.0, 0.02).map_err(|e| e.to_string())?;
    let n = 10_000;
    let mut y = vec![0.5];
    for _ in 1..n {
        let prev = y[y.len() - 1];
        y.push(0.5 + 0.9 * (prev - 0.5) + noise.sample(&mut rng));
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err("simulated AR(1) left [0, 1]".into());
    }
    let start = parse_timestamp("2020-01-01T00:00:00Z").ok_or("bad timestamp")?;
    let series = lib(SpaceTimeSeries::from_columns(
        lib(SiteSet::uniform("s", 1, 1.0))?,
        start,
        &[y.clone()],
    ))?;
    let inputs = Inputs::new(&series, start);
    let spec = LinearSpec::ar(0, vec![1], 1);
    let ols = lib(fit_linear(&spec, &inputs))?;
    let phi = ols.own_coefficients(0)[0];

    let (a, b) = ols_line(&y[..n - 1], &y[1..]);
    let closed_form_gap = (ols.intercept(0) - a).abs().max((phi - b).abs());

    let rls = lib(fit_recursive(&spec, &inputs, 1.0, 200))?;
    let rls_gap = rls.model.regimes[0]
        .theta
        .iter()
        .zip(&ols.regimes[0].theta)
        .map(|(r, o)| (r - o).abs())
        .fold(0.0, f64::max);

    let rule = lib(RegimeRule::new(RegimeCovariate::OwnLag(1), vec![]))?;
    let tar = lib(fit_linear(&LinearSpec::tar(0, vec![1], 1, rule), &inputs))?;
    let mut tar_equal = tar.regimes.len() == 1 && tar.regimes[0].theta == ols.regimes[0].theta;
    for t in (1..n).step_by(97) {
        tar_equal &= lib(tar.predict_at(&inputs, t))? == lib(ols.predict_at(&inputs, t))?;
    }
    let detail = format!(
        "phi = {phi:.4}, |OLS - closed form| = {closed_form_gap:.1e}, |RLS(1) - OLS| = {rls_gap:.1e}, TAR(R=1) == AR: {tar_equal}"
    );
    if (phi - 0.9).abs() <= 0.03 && closed_form_gap < 1e-9 && rls_gap <= 1e-6 && tar_equal {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn forecast_skill() -> Outcome {
    const LEAD: usize = 24;
    const TRAIN: usize = 12_000;
    let cfg = SimConfig::homogeneous(lib(SiteSet::uniform("s", 5, 1.0))?, 0.6, 808);
    let sim = lib(simulate(&cfg, 16_000))?;
    let nwp = lib(PerfectNwp::new(sim.speed.clone(), sim.direction.clone()))?;
    let train = sim.power.slice(0, TRAIN);
    let train_inputs = Inputs::new(&train, cfg.start).with_nwp(&nwp);
    let inputs = Inputs::new(&sim.power, cfg.start).with_nwp(&nwp);
    let (mut se_model, mut se_persist, mut n) = (0.0, 0.0, 0usize);
    for site in 0..5 {
        let model = lib(CparxModel::fit(&CparxSpec::new(site, LEAD), &train_inputs))?;
        for t in TRAIN..16_000 - LEAD {
            let y = sim.power.get(t + LEAD, site).ok_or("missing simulated value")?;
            let p = lib(model.predict_at(&inputs, t))?.clamp(0.0, 1.0);
            let last = persistence(&inputs, site, t, LEAD).ok_or("missing persistence input")?[LEAD - 1];
            se_model += (p - y).powi(2);
            se_persist += (last - y).powi(2);
            n += 1;
        }
    }
    let (rmse, rmse_p) = ((se_model / n as f64).sqrt(), (se_persist / n as f64).sqrt());
    let gain = 1.0 - rmse / rmse_p;
    let detail = format!(
        "RMSE CP-ARX = {rmse:.4}, persistence = {rmse_p:.4}, improvement = {:.1}%",
        100.0 * gain
    );
    if gain >= 0.20 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn score_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst_point = 0.0f64;
    let mut worst_pinball = 0.0f64;
    let mut worst_degenerate = 0.0f64;
    let mut worst_scalar = 0.0f64;
    for _ in 0..200 {
        let (point, y) = (rng.random::<f64>(), rng.random::<f64>());
        let mass = PredictiveCdf::new(0, 1, CdfRepr::Discrete(lib(DiscreteDistribution::point(point))?));
        worst_point = worst_point.max((lib(crps(&mass, y))? - (point - y).abs()).abs());

        let obs: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        worst_pinball = worst_pinball.max(lib(pinball(&obs, &obs, uniform(&mut rng, 0.01, 0.99)))?.abs());

        let (sites, leads) = (rng.random_range(1..4), rng.random_range(1..6));
        let x: Vec<f64> = (0..sites * leads).map(|_| rng.random::<f64>()).collect();
        let target: Vec<f64> = (0..sites * leads).map(|_| rng.random::<f64>()).collect();
        let copies = TrajectorySet {
            origin: None,
            sites,
            leads,
            paths: vec![x.clone(); rng.random_range(2..12)],
        };
        let dist = x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_degenerate = worst_degenerate.max((lib(energy_score(&copies, &target))? - dist).abs());

        // m n = 1: the energy score is the ensemble CRPS, checked against the
        // ensemble formula and against the CRPS integral of the empirical CDF.
        let ensemble: Vec<f64> = (0..rng.random_range(2..30)).map(|_| rng.random::<f64>()).collect();
        let scalar = TrajectorySet {
            origin: None,
            sites: 1,
            leads: 1,
            paths: ensemble.iter().map(|v| vec![*v]).collect(),
        };
        let es = lib(energy_score(&scalar, &[y]))?;
        let w = 1.0 / ensemble.len() as f64;
        let empirical = PredictiveCdf::new(
            0,
            1,
            CdfRepr::Discrete(lib(DiscreteDistribution::new(
                ensemble.iter().map(|v| (*v, w)).collect(),
            ))?),
        );
        worst_scalar = worst_scalar
            .max((es - lib(sample_crps(&ensemble, y))?).abs())
            .max((es - lib(crps(&empirical, y))?).abs());
    }
    let detail = format!(
        "CRPS(point mass) err = {worst_point:.1e}, pinball(perfect) = {worst_pinball:.1e}, \
         ES(degenerate) err = {worst_degenerate:.1e}, ES vs CRPS at m n = 1 err = {worst_scalar:.1e}"
    );
    if worst_point < 1e-9 && worst_pinball == 0.0 && worst_degenerate < 1e-12 && worst_scalar <= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn read_tree(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(root).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    let mut secs = Vec::new();
    for run in ["a", "b"] {
        let cfg = RunConfig {
            out: dir.path().join(run),
            ..RunConfig::default()
        };
        let sites = cfg.sites.ids.len();
        let (leads, hours, draws) = (cfg.model.horizon, cfg.simulation.hours, cfg.copula.trajectories);
        if (sites, leads, hours, draws) != (5, 43, 16_000, 12) {
            return Err(format!(
                "default run is {sites} sites x {leads} leads x {hours} h, J = {draws}"
            ));
        }
        let start = Instant::now();
        lib(run_pipeline(
            &cfg,
            Stage::Simulate,
            &RunOptions { emit_plots_data: true },
        ))?;
        secs.push(start.elapsed().as_secs_f64());
        runs.push(read_tree(&cfg.out)?);
    }
    let differing: Vec<&String> = runs[0]
        .iter()
        .filter(|(name, bytes)| runs[1].get(*name) != Some(*bytes))
        .map(|(name, _)| name)
        .collect();
    let same = differing.is_empty() && runs[0].len() == runs[1].len();
    let detail = format!(
        "{} files, identical: {same}, run times {:.1} s and {:.1} s",
        runs[0].len(),
        secs[0],
        secs[1]
    );
    if same && secs.iter().all(|s| *s < 60.0) {
        Ok(detail)
    } else if !differing.is_empty() {
        Err(format!("{detail}; differing: {differing:?}"))
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("newsvendor optimality", newsvendor),
        ("settlement identity", settlement),
        ("convolution oracle", convolution),
        ("reserve quantile vs grid search", reserve),
        ("copula calibration", copula),
        ("quantile regression calibration", quantile_regression),
        ("model recovery", model_recovery),
        ("forecast skill ordering", forecast_skill),
        ("score identities", score_identities),
        ("end-to-end determinism", determinism),
    ];
    // Numeric arguments select criteria; anything else (such as flags
    // forwarded by cargo) is ignored.
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (verdict, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{verdict} [{:>2}] {name}: {detail} ({:.1} s)",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
