//! Conditional-parametric models: AR coefficients that vary smoothly with a
//! covariate, estimated by kernel-weighted local least squares at the nodes
//! of a covariate grid and interpolated linearly between nodes.

use std::f64::consts::PI;

use chrono::Timelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, NormalEquations};

use super::nwp::speed_direction;
use super::Inputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Triangular,
    /// Every row gets weight one at every node; reduces to a global fit.
    Uniform,
}

/// Nodes of a one-dimensional covariate grid. Periodic grids (directions)
/// wrap at the seam; non-periodic grids clamp outside `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateGrid {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    pub periodic: bool,
}

impl CovariateGrid {
    /// Eight periodic nodes over wind direction in degrees.
    pub fn direction() -> Self {
        Self {
            lo: 0.0,
            hi: 360.0,
            nodes: 8,
            periodic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || !(self.hi > self.lo) {
            return Err(Error::InvalidArgument(
                "covariate grid needs hi > lo and at least 2 nodes".into(),
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.hi - self.lo) / self.nodes as f64
        } else {
            (self.hi - self.lo) / (self.nodes - 1) as f64
        }
    }

    pub fn node(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.spacing()
    }

    fn distance(&self, x: f64, j: usize) -> f64 {
        if self.periodic {
            let period = self.hi - self.lo;
            let d = (x - self.node(j)).rem_euclid(period);
            d.min(period - d)
        } else {
            (x.clamp(self.lo, self.hi) - self.node(j)).abs()
        }
    }

    /// The two nodes bracketing `x` with their linear interpolation weights.
    pub fn interpolation(&self, x: f64) -> [(usize, f64); 2] {
        let m = self.nodes;
        if self.periodic {
            let u = (x - self.lo).rem_euclid(self.hi - self.lo) / self.spacing();
            let j = (u.floor() as usize).min(m - 1);
            let f = u - j as f64;
            [(j, 1.0 - f), ((j + 1) % m, f)]
        } else {
            let u = (x.clamp(self.lo, self.hi) - self.lo) / self.spacing();
            let j = (u.floor() as usize).min(m - 2);
            let f = u - j as f64;
            [(j, 1.0 - f), (j + 1, f)]
        }
    }

    fn kernel_weight(&self, kernel: Kernel, bandwidth: f64, x: f64, j: usize) -> f64 {
        match kernel {
            Kernel::Uniform => 1.0,
            Kernel::Triangular => (1.0 - self.distance(x, j) / (bandwidth * self.spacing())).max(0.0),
        }
    }

    /// `Σ_j w_j(x) θ_j`.
    pub fn evaluate(&self, nodes: &[Vec<f64>], x: f64) -> Vec<f64> {
        let [(j0, w0), (j1, w1)] = self.interpolation(x);
        nodes[j0].iter().zip(&nodes[j1]).map(|(a, b)| w0 * a + w1 * b).collect()
    }
}

/// Local least squares at every node, returning node coefficients.
///
/// A node whose kernel weight sums to less than `10 p` rows, or whose local
/// design is singular, takes the pooled unweighted fit instead. This happens
/// with short samples where some covariate range (a wind sector) is never
/// visited.
fn fit_nodes(
    grid: &CovariateGrid,
    kernel: Kernel,
    bandwidth: f64,
    rows: &[(f64, Vec<f64>, f64)],
    p: usize,
) -> Result<Vec<Vec<f64>>> {
    let needed = 10 * p * grid.nodes;
    if rows.len() < needed {
        return Err(Error::TooFewRows {
            needed,
            got: rows.len(),
        });
    }
    let mut pooled: Option<Vec<f64>> = None;
    let mut pooled_fit = || -> Result<Vec<f64>> {
        if let Some(theta) = &pooled {
            return Ok(theta.clone());
        }
        let mut ne = NormalEquations::new(p);
        for (_, z, y) in rows {
            ne.add(z, *y, 1.0);
        }
        let theta = ne.solve()?;
        pooled = Some(theta.clone());
        Ok(theta)
    };
    (0..grid.nodes)
        .map(|j| {
            let mut ne = NormalEquations::new(p);
            let mut mass = 0.0;
            for (x, z, y) in rows {
                let w = grid.kernel_weight(kernel, bandwidth, *x, j);
                mass += w;
                ne.add(z, *y, w);
            }
            if mass < (10 * p) as f64 {
                return pooled_fit();
            }
            match ne.solve() {
                Err(Error::RankDeficient) => pooled_fit(),
                other => other,
            }
        })
        .collect()
}

fn residual_scale(grid: &CovariateGrid, nodes: &[Vec<f64>], rows: &[(f64, Vec<f64>, f64)], p: usize) -> (f64, f64) {
    let sse: f64 = rows
        .iter()
        .map(|(x, z, y)| (y - dot(&grid.evaluate(nodes, *x), z)).powi(2))
        .sum();
    let n = rows.len() as f64;
    ((sse / (n - p as f64)).sqrt(), (sse / n).sqrt())
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if bandwidth > 0.0 && bandwidth.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "bandwidth",
            value: bandwidth,
            expected: "> 0 (in node spacings)",
        })
    }
}

/// CP-AR structure. The covariate is read from the exogenous panel at the
/// forecast origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CparSpec {
    pub site: usize,
    pub horizon: usize,
    pub lags: Vec<usize>,
    pub intercept: bool,
    /// Column of the covariate panel.
    pub covariate: usize,
    pub grid: CovariateGrid,
    pub kernel: Kernel,
    /// Kernel half-width in node spacings.
    pub bandwidth: f64,
}

impl CparSpec {
    pub fn new(site: usize, lags: Vec<usize>, horizon: usize, covariate: usize, grid: CovariateGrid) -> Self {
        Self {
            site,
            horizon,
            lags,
            intercept: true,
            covariate,
            grid,
            kernel: Kernel::Triangular,
            bandwidth: 1.5,
        }
    }

    fn n_params(&self) -> usize {
        usize::from(self.intercept) + self.lags.len()
    }

    fn regressors(&self, inputs: &Inputs, t: usize) -> Option<(f64, Vec<f64>)> {
        let cov = inputs.covariates?;
        if t >= cov.len() {
            return None;
        }
        let x = cov.value(t, self.covariate)?;
        let mut z = Vec::with_capacity(self.n_params());
        if self.intercept {
            z.push(1.0);
        }
        for &i in &self.lags {
            z.push(inputs.y(t as isize - i as isize + 1, self.site)?);
        }
        Some((x, z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CparModel {
    pub spec: CparSpec,
    /// Coefficients per grid node, in design order.
    pub nodes: Vec<Vec<f64>>,
    pub sigma: f64,
    pub in_sample_rmse: f64,
}

impl CparModel {
    pub fn fit(spec: &CparSpec, inputs: &Inputs) -> Result<Self> {
        spec.grid.validate()?;
        check_bandwidth(spec.bandwidth)?;
        if spec.horizon == 0 || spec.lags.is_empty() || spec.lags.contains(&0) {
            return Err(Error::InvalidArgument(
                "CP-AR needs horizon >= 1 and positive lags".into(),
            ));
        }
        if inputs.covariates.is_none() {
            return Err(Error::InvalidArgument("CP-AR needs a covariate panel".into()));
        }
        let n = inputs.target.len();
        let mut rows = Vec::new();
        for t in 0..n.saturating_sub(spec.horizon) {
            let (Some((x, z)), Some(y)) = (
                spec.regressors(inputs, t),
                inputs.y((t + spec.horizon) as isize, spec.site),
            ) else {
                continue;
            };
            rows.push((x, z, y));
        }
        let p = spec.n_params();
        let nodes = fit_nodes(&spec.grid, spec.kernel, spec.bandwidth, &rows, p)?;
        let (sigma, rmse) = residual_scale(&spec.grid, &nodes, &rows, p);
        Ok(Self {
            spec: spec.clone(),
            nodes,
            sigma,
            in_sample_rmse: rmse,
        })
    }

    /// Coefficient functions evaluated at covariate value `x`.
    pub fn coefficients_at(&self, x: f64) -> Vec<f64> {
        self.spec.grid.evaluate(&self.nodes, x)
    }

    pub fn predict_at(&self, inputs: &Inputs, t: usize) -> Result<f64> {
        let (x, z) = self.spec.regressors(inputs, t).ok_or(Error::MissingCell {
            site: self.spec.site,
            time: t,
        })?;
        Ok(dot(&self.coefficients_at(x), &z))
    }
}

/// `g(w) = 1 / (1 + exp(-(w - center) / scale))`, a speed-to-power map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticCurve {
    pub center: f64,
    pub scale: f64,
}

impl LogisticCurve {
    pub fn eval(&self, w: f64) -> f64 {
        1.0 / (1.0 + (-(w - self.center) / self.scale).exp())
    }

    /// Least-squares fit to `(speed, power)` pairs by Levenberg-Marquardt.
    pub fn fit(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.len() < 20 {
            return Err(Error::TooFewRows {
                needed: 20,
                got: pairs.len(),
            });
        }
        let sse = |c: f64, ls: f64| -> f64 {
            let curve = LogisticCurve {
                center: c,
                scale: ls.exp(),
            };
            pairs.iter().map(|(w, y)| (y - curve.eval(*w)).powi(2)).sum()
        };
        let mid: Vec<f64> = pairs
            .iter()
            .filter(|p| (0.3..=0.7).contains(&p.1))
            .map(|p| p.0)
            .collect();
        let mut c = if mid.is_empty() {
            pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64
        } else {
            crate::stats::mean(&mid)
        };
        let mut ls = 1.5f64.ln();
        let mut mu = 1e-3;
        let mut current = sse(c, ls);
        for _ in 0..200 {
            let s = ls.exp();
            let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (w, y) in pairs {
                let g = 1.0 / (1.0 + (-(w - c) / s).exp());
                let d = g * (1.0 - g);
                let jc = -d / s;
                let jl = -d * (w - c) / s;
                let r = y - g;
                a11 += jc * jc;
                a12 += jc * jl;
                a22 += jl * jl;
                b1 += jc * r;
                b2 += jl * r;
            }
            let mut improved = false;
            for _ in 0..30 {
                let m11 = a11 * (1.0 + mu);
                let m22 = a22 * (1.0 + mu);
                let det = m11 * m22 - a12 * a12;
                if det.abs() < 1e-300 {
                    mu *= 10.0;
                    continue;
                }
                // r(θ + δ) ≈ r - J δ, so (JᵀJ + μD) δ = Jᵀ r.
                let dc = (m22 * b1 - a12 * b2) / det;
                let dl = (m11 * b2 - a12 * b1) / det;
                let trial = sse(c + dc, ls + dl);
                if trial < current {
                    let rel = (current - trial) / current.max(1e-300);
                    c += dc;
                    ls += dl;
                    current = trial;
                    mu = (mu / 10.0).max(1e-12);
                    improved = rel > 1e-12;
                    break;
                }
                mu *= 10.0;
            }
            if !improved {
                break;
            }
        }
        Ok(Self {
            center: c,
            scale: ls.exp(),
        })
    }
}

/// CP-ARX structure: diurnal harmonics, the last observation and a fitted
/// speed-to-power term from NWP, each with a coefficient that depends on the
/// forecast wind direction. No intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CparxSpec {
    pub site: usize,
    pub horizon: usize,
    pub grid: CovariateGrid,
    pub kernel: Kernel,
    pub bandwidth: f64,
    /// Leads sharing one speed-to-power curve.
    pub bucket_hours: usize,
}

impl CparxSpec {
    pub fn new(site: usize, horizon: usize) -> Self {
        Self {
            site,
            horizon,
            grid: CovariateGrid::direction(),
            kernel: Kernel::Triangular,
            bandwidth: 1.5,
            bucket_hours: 6,
        }
    }

    fn bucket_leads(&self) -> std::ops::RangeInclusive<usize> {
        let b = (self.horizon - 1) / self.bucket_hours;
        b * self.bucket_hours + 1..=(b + 1) * self.bucket_hours
    }
}

/// Diurnal harmonics at the hour of day of `inputs.timestamp(time)`.
fn harmonics(inputs: &Inputs, time: usize) -> (f64, f64) {
    let h = inputs.timestamp(time).hour() as f64;
    let angle = 2.0 * PI * h / 24.0;
    (angle.cos(), angle.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CparxModel {
    pub spec: CparxSpec,
    pub curve: LogisticCurve,
    /// `[θc, θs, θ1, θ2]` per grid node.
    pub nodes: Vec<Vec<f64>>,
    pub sigma: f64,
    pub in_sample_rmse: f64,
}

impl CparxModel {
    fn design(&self, inputs: &Inputs, t: usize) -> Result<(f64, Vec<f64>)> {
        design(&self.spec, &self.curve, inputs, t)
    }

    pub fn fit(spec: &CparxSpec, inputs: &Inputs) -> Result<Self> {
        let curve = Self::fit_curve(spec, inputs)?;
        Self::fit_with_curve(spec, inputs, curve)
    }

    /// Speed-to-power curve from all leads in the bucket of `spec.horizon`;
    /// every horizon of the bucket gets the same curve.
    pub fn fit_curve(spec: &CparxSpec, inputs: &Inputs) -> Result<LogisticCurve> {
        check_cparx(spec)?;
        let nwp = inputs
            .nwp
            .ok_or_else(|| Error::InvalidArgument("CP-ARX needs NWP input".into()))?;
        let n = inputs.target.len();
        let mut pairs = Vec::new();
        for k in spec.bucket_leads() {
            for t in 0..n.saturating_sub(k) {
                let (Some((u, v)), Some(y)) = (
                    nwp.uv(spec.site, inputs.timestamp(t), k),
                    inputs.y((t + k) as isize, spec.site),
                ) else {
                    continue;
                };
                pairs.push((u.hypot(v), y));
            }
        }
        LogisticCurve::fit(&pairs)
    }

    pub fn fit_with_curve(spec: &CparxSpec, inputs: &Inputs, curve: LogisticCurve) -> Result<Self> {
        check_cparx(spec)?;
        let n = inputs.target.len();
        let mut rows = Vec::new();
        for t in 0..n.saturating_sub(spec.horizon) {
            let Some(y) = inputs.y((t + spec.horizon) as isize, spec.site) else {
                continue;
            };
            if let Ok((x, z)) = design(spec, &curve, inputs, t) {
                rows.push((x, z, y));
            }
        }
        let nodes = fit_nodes(&spec.grid, spec.kernel, spec.bandwidth, &rows, 4)?;
        let (sigma, rmse) = residual_scale(&spec.grid, &nodes, &rows, 4);
        Ok(Self {
            spec: spec.clone(),
            curve,
            nodes,
            sigma,
            in_sample_rmse: rmse,
        })
    }

    pub fn predict_at(&self, inputs: &Inputs, t: usize) -> Result<f64> {
        let (x, z) = self.design(inputs, t)?;
        Ok(dot(&self.spec.grid.evaluate(&self.nodes, x), &z))
    }
}

fn check_cparx(spec: &CparxSpec) -> Result<()> {
    spec.grid.validate()?;
    check_bandwidth(spec.bandwidth)?;
    if spec.horizon == 0 || spec.bucket_hours == 0 {
        return Err(Error::InvalidArgument(
            "CP-ARX needs horizon >= 1 and bucket_hours >= 1".into(),
        ));
    }
    Ok(())
}

fn design(spec: &CparxSpec, curve: &LogisticCurve, inputs: &Inputs, t: usize) -> Result<(f64, Vec<f64>)> {
    let k = spec.horizon;
    let nwp = inputs
        .nwp
        .ok_or_else(|| Error::InvalidArgument("CP-ARX needs NWP input".into()))?;
    let (u, v) = nwp
        .uv(spec.site, inputs.timestamp(t), k)
        .ok_or(Error::MissingNwp { origin: t, lead: k })?;
    let last = inputs.y(t as isize, spec.site).ok_or(Error::MissingCell {
        site: spec.site,
        time: t,
    })?;
    let (speed, direction) = speed_direction(u, v);
    let (c, s) = harmonics(inputs, t + k);
    Ok((direction, vec![c, s, last, curve.eval(speed)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_timestamp, Panel};
    use crate::point::linear::{fit_linear, LinearSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn dense_ls(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let p = rows[0].len();
        let x = nalgebra::DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j] * w[i].sqrt());
        let b = nalgebra::DVector::from_fn(rows.len(), |i, _| y[i] * w[i].sqrt());
        crate::linalg::solve_spd(x.transpose() * &x, x.transpose() * b)
    }

    fn start() -> chrono::DateTime<chrono::Utc> {
        parse_timestamp("2006-01-01T00:00:00Z").unwrap()
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let g = CovariateGrid::direction();
        let [(a, wa), (b, wb)] = g.interpolation(350.0);
        assert_eq!((a, b), (7, 0));
        assert!((wa - 2.0 / 9.0).abs() < 1e-12 && (wb - 7.0 / 9.0).abs() < 1e-12);
        let nodes: Vec<Vec<f64>> = (0..8).map(|j| vec![j as f64]).collect();
        // Continuous across the seam.
        let left = g.evaluate(&nodes, 359.999_999)[0];
        let right = g.evaluate(&nodes, 0.0)[0];
        assert!((left - right).abs() < 1e-6);
    }

    #[test]
    fn non_periodic_grid_clamps() {
        let g = CovariateGrid {
            lo: 0.0,
            hi: 1.0,
            nodes: 3,
            periodic: false,
        };
        let nodes = vec![vec![1.0], vec![2.0], vec![5.0]];
        assert_eq!(g.evaluate(&nodes, -3.0)[0], 1.0);
        assert_eq!(g.evaluate(&nodes, 7.0)[0], 5.0);
        assert!((g.evaluate(&nodes, 0.75)[0] - 3.5).abs() < 1e-12);
    }

    fn ar_with_covariate(n: usize, seed: u64, dependent: bool) -> (Panel, Panel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut y = vec![0.5; n];
        let mut x = vec![0.0; n];
        for t in 1..n {
            x[t - 1] = rng.random_range(0.0..360.0);
            let theta = if dependent {
                0.5 + 0.4 * (x[t - 1] as f64).to_radians().cos()
            } else {
                0.7
            };
            y[t] = 0.1 + theta * (y[t - 1] - 0.5) + 0.5 * (1.0 - theta) + noise.sample(&mut rng);
        }
        (
            Panel::from_columns(vec!["s0".into()], start(), &[y]),
            Panel::from_columns(vec!["dir".into()], start(), &[x]),
        )
    }

    #[test]
    fn uniform_kernel_reduces_to_ar() {
        let (y, x) = ar_with_covariate(5000, 1, false);
        let inputs = Inputs::new(&y, start()).with_covariates(&x);
        let mut spec = CparSpec::new(0, vec![1, 2], 1, 0, CovariateGrid::direction());
        spec.kernel = Kernel::Uniform;
        let cp = CparModel::fit(&spec, &inputs).unwrap();
        let ar = fit_linear(&LinearSpec::ar(0, vec![1, 2], 1), &inputs).unwrap();
        for node in &cp.nodes {
            for (a, b) in node.iter().zip(&ar.regimes[0].theta) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn triangular_kernel_tracks_direction_dependence() {
        let (y, x) = ar_with_covariate(40_000, 2, true);
        let inputs = Inputs::new(&y, start()).with_covariates(&x);
        let spec = CparSpec::new(0, vec![1], 1, 0, CovariateGrid::direction());
        let cp = CparModel::fit(&spec, &inputs).unwrap();
        let north = cp.coefficients_at(0.0)[1];
        let south = cp.coefficients_at(180.0)[1];
        assert!(north > 0.75 && south < 0.25, "{north} {south}");
    }

    #[test]
    fn node_fit_matches_dense_route() {
        let (y, x) = ar_with_covariate(3000, 3, true);
        let inputs = Inputs::new(&y, start()).with_covariates(&x);
        let spec = CparSpec::new(0, vec![1], 1, 0, CovariateGrid::direction());
        let cp = CparModel::fit(&spec, &inputs).unwrap();
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        let mut ws = Vec::new();
        for t in 0..2999 {
            rows.push(vec![1.0, y.column(0)[t]]);
            ys.push(y.column(0)[t + 1]);
            ws.push(spec.grid.kernel_weight(spec.kernel, spec.bandwidth, x.column(0)[t], 3));
        }
        let dense = dense_ls(&rows, &ys, &ws).unwrap();
        for (a, b) in cp.nodes[3].iter().zip(&dense) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn unvisited_nodes_take_the_pooled_fit() {
        // Every covariate value lies within one node spacing of 90 degrees,
        // so the nodes at 0, 90 and 180 see data and the rest do not.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<(f64, Vec<f64>, f64)> = (0..2000)
            .map(|_| {
                let z = rng.random::<f64>();
                (
                    rng.random_range(60.0..120.0),
                    vec![1.0, z],
                    0.3 + 0.5 * z + 0.01 * rng.random::<f64>(),
                )
            })
            .collect();
        let grid = CovariateGrid::direction();
        let nodes = fit_nodes(&grid, Kernel::Triangular, 1.5, &rows, 2).unwrap();
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r.1.clone()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let pooled = dense_ls(&x, &y, &vec![1.0; rows.len()]).unwrap();
        for j in [4, 5, 6] {
            for (a, b) in nodes[j].iter().zip(&pooled) {
                assert!((a - b).abs() < 1e-9, "node {j}");
            }
        }
        assert!((nodes[2][1] - 0.5).abs() < 0.01);
    }

    #[test]
    fn logistic_fit_recovers_curve() {
        let truth = LogisticCurve {
            center: 9.0,
            scale: 1.7,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<(f64, f64)> = (0..2000)
            .map(|_| {
                let w: f64 = rng.random_range(0.0..20.0);
                (w, truth.eval(w) + rng.random_range(-0.02..0.02))
            })
            .collect();
        let fit = LogisticCurve::fit(&pairs).unwrap();
        assert!(
            (fit.center - 9.0).abs() < 0.05 && (fit.scale - 1.7).abs() < 0.05,
            "{fit:?}"
        );
    }
}
