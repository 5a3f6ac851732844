//! Reserve sizing from the density of the system margin, the sum of load
//! forecast error, generation outages and wind forecast error.

use std::path::Path;

use chrono::{DateTime, Utc};

use crate::data::format_timestamp;
use crate::error::{Error, Result};
use crate::prob::PredictiveCdf;
use crate::stats::norm_cdf;

/// Default spacing of margin grids, in units of normalized capacity.
pub const DEFAULT_STEP: f64 = 0.001;
/// Default support of component grids.
pub const DEFAULT_SUPPORT: (f64, f64) = (-1.0, 1.0);
/// Tolerance on component normalization.
const MASS_TOL: f64 = 1e-6;

/// Probability masses on the grid `lo + i * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    lo: f64,
    step: f64,
    mass: Vec<f64>,
}

impl GridDensity {
    /// Masses must be nonnegative and sum to 1 within 1e-6.
    pub fn new(lo: f64, step: f64, mass: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !lo.is_finite() {
            return Err(Error::IncompatibleGrids(format!("bad grid origin {lo} or step {step}")));
        }
        if mass.is_empty() || mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::IncompatibleGrids("masses must be nonnegative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::IncompatibleGrids(format!("masses sum to {total}")));
        }
        Ok(Self { lo, step, mass })
    }

    /// Masses of the cells `(x - step/2, x + step/2]` for grid points on
    /// `[lo, hi]` aligned to multiples of `step`, from a CDF.
    pub fn from_cdf(lo: f64, hi: f64, step: f64, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        let first = (lo / step).round() as i64;
        let last = (hi / step).round() as i64;
        if last < first {
            return Err(Error::IncompatibleGrids(format!("empty support [{lo}, {hi}]")));
        }
        let mut mass: Vec<f64> = (first..=last)
            .map(|i| {
                let x = i as f64 * step;
                (cdf(x + 0.5 * step) - cdf(x - 0.5 * step)).max(0.0)
            })
            .collect();
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(Error::IncompatibleGrids("no mass on the support".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Self::new(first as f64 * step, step, mass)
    }

    /// Unit mass at the grid point nearest `x`.
    pub fn point(x: f64, step: f64) -> Result<Self> {
        Self::new((x / step).round() * step, step, vec![1.0])
    }

    /// Gaussian discretized on the default support. Synthetic preset for
    /// load forecast errors.
    pub fn gaussian(mean: f64, sd: f64, step: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(Error::OutOfRange {
                name: "sd",
                value: sd,
                expected: "(0, inf)",
            });
        }
        Self::from_cdf(DEFAULT_SUPPORT.0, DEFAULT_SUPPORT.1, step, |x| {
            norm_cdf((x - mean) / sd)
        })
    }

    pub fn uniform(a: f64, b: f64, step: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
        }
        Self::from_cdf(a, b, step, |x| ((x - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// Loss of `size` with probability `p`, nothing otherwise. Synthetic
    /// preset for generation outages.
    pub fn two_point_outage(p: f64, size: f64, step: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(size >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "outage preset needs p in [0, 1] and size >= 0, got ({p}, {size})"
            )));
        }
        let n = (size / step).round() as usize;
        let mut mass = vec![0.0; n + 1];
        mass[0] += 1.0 - p;
        mass[n] += p;
        Self::new(0.0, step, mass)
    }

    /// Distribution of `point - Y` for `Y ~ f`, the wind forecast error.
    pub fn wind_error(f: &PredictiveCdf, point: f64, step: f64) -> Result<Self> {
        let first = ((point - 1.0) / step).floor() as i64;
        let last = (point / step).ceil() as i64;
        let mut mass: Vec<f64> = (first..=last)
            .map(|i| {
                let e = i as f64 * step;
                // P(point - e - step/2 <= Y < point - e + step/2)
                (f.cdf_left(point - e + 0.5 * step) - f.cdf_left(point - e - 0.5 * step)).max(0.0)
            })
            .collect();
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(Error::IncompatibleGrids("predictive distribution has no mass".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Self::new(first as f64 * step, step, mass)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(i, m)| m * self.x(i)).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.mass
            .iter()
            .enumerate()
            .map(|(i, m)| m * (self.x(i) - mu).powi(2))
            .sum()
    }

    /// Largest grid point carrying mass.
    pub fn support_max(&self) -> f64 {
        let i = self.mass.iter().rposition(|m| *m > 0.0).unwrap_or(0);
        self.x(i)
    }

    /// Smallest grid point whose cumulative mass reaches `level`; level 1
    /// gives [`Self::support_max`].
    pub fn quantile(&self, level: f64) -> f64 {
        if level >= 1.0 {
            return self.support_max();
        }
        let target = level * self.total() - 1e-12;
        let mut acc = 0.0;
        for (i, m) in self.mass.iter().enumerate() {
            acc += m;
            if acc >= target && *m > 0.0 || acc >= target && level <= 0.0 {
                return self.x(i);
            }
        }
        self.support_max()
    }

    /// Drops leading and trailing cells with mass below `eps`.
    pub fn trimmed(&self, eps: f64) -> Self {
        let first = self.mass.iter().position(|m| *m >= eps).unwrap_or(0);
        let last = self.mass.iter().rposition(|m| *m >= eps).unwrap_or(self.mass.len() - 1);
        Self {
            lo: self.x(first),
            step: self.step,
            mass: self.mass[first..=last].to_vec(),
        }
    }

    /// Mean-preserving move onto the grid with spacing `step`, splitting
    /// each mass between its two nearest new points.
    pub fn resample(&self, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::IncompatibleGrids(format!("bad step {step}")));
        }
        let first = (self.lo / step).floor() as i64;
        let last = (self.x(self.len() - 1) / step).ceil() as i64;
        let mut mass = vec![0.0; (last - first + 1) as usize];
        for (i, m) in self.mass.iter().enumerate() {
            let pos = self.x(i) / step - first as f64;
            let j = (pos.floor() as usize).min(mass.len() - 1);
            let frac = pos - j as f64;
            if frac < 1e-9 || j + 1 >= mass.len() {
                mass[j] += m;
            } else {
                mass[j] += m * (1.0 - frac);
                mass[j + 1] += m * frac;
            }
        }
        Self::new(first as f64 * step, step, mass)
    }

    /// Density of the sum of independent variables by direct convolution.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if ((self.step - other.step) / self.step).abs() > 1e-9 {
            return Err(Error::IncompatibleGrids(format!(
                "steps {} and {} differ",
                self.step, other.step
            )));
        }
        let mut mass = vec![0.0; self.len() + other.len() - 1];
        for (i, a) in self.mass.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.mass.iter().enumerate() {
                mass[i + j] += a * b;
            }
        }
        Ok(Self {
            lo: self.lo + other.lo,
            step: self.step,
            mass,
        })
    }

    fn renormalized(mut self) -> Self {
        let total = self.total();
        self.mass.iter_mut().for_each(|m| *m /= total);
        self
    }

    fn zero_index(&self) -> i64 {
        (-self.lo / self.step).round() as i64
    }
}

/// Piecewise-linear cost of one reserve direction: `short` per unit of
/// uncovered margin, `hold` per unit of unused reserve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideCost {
    pub short: f64,
    pub hold: f64,
}

impl SideCost {
    /// Convexity with a unique quantile solution needs `short > hold >= 0`.
    pub fn new(short: f64, hold: f64) -> Result<Self> {
        let c = Self { short, hold };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hold >= 0.0 && self.short > self.hold && self.short.is_finite()) {
            return Err(Error::InvalidCost(format!(
                "shortage slope {} must exceed holding slope {} >= 0",
                self.short, self.hold
            )));
        }
        Ok(())
    }

    pub fn level(&self) -> f64 {
        self.short / (self.short + self.hold)
    }
}

/// Inputs of the reserve decision for one delivery hour.
#[derive(Debug, Clone, PartialEq)]
pub struct ReserveProblem {
    pub load_error: GridDensity,
    pub generation_loss: GridDensity,
    pub wind_error: GridDensity,
    pub up: SideCost,
    pub down: SideCost,
}

/// Density of the system margin; positive values call for upward reserve.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginDensity {
    pub density: GridDensity,
}

impl MarginDensity {
    /// Distribution of `max(O, 0)` on a grid starting at zero.
    pub fn positive_part(&self) -> GridDensity {
        let d = &self.density;
        let z = d.zero_index();
        let mut mass = vec![0.0];
        for (i, m) in d.mass.iter().enumerate() {
            if (i as i64) <= z {
                mass[0] += m;
            } else {
                mass.push(*m);
            }
        }
        if z < -1 {
            // The support starts above zero: pad the gap.
            let gap = (-z - 1) as usize;
            mass.splice(1..1, std::iter::repeat_n(0.0, gap));
        }
        GridDensity {
            lo: 0.0,
            step: d.step,
            mass,
        }
    }

    /// Distribution of `max(-O, 0)`.
    pub fn negative_part(&self) -> GridDensity {
        let d = &self.density;
        let mut rev = d.mass.clone();
        rev.reverse();
        MarginDensity {
            density: GridDensity {
                lo: -d.x(d.len() - 1),
                step: d.step,
                mass: rev,
            },
        }
        .positive_part()
    }
}

/// Convolution of the three components. Grids with different spacing are
/// resampled to the finest one when the spacings are integer multiples.
pub fn convolve_margin(problem: &ReserveProblem) -> Result<MarginDensity> {
    let parts = [&problem.load_error, &problem.generation_loss, &problem.wind_error];
    let step = parts.iter().map(|p| p.step).fold(f64::INFINITY, f64::min);
    let aligned = parts
        .iter()
        .map(|p| {
            let ratio = p.step / step;
            if (ratio - ratio.round()).abs() > 1e-6 {
                return Err(Error::IncompatibleGrids(format!(
                    "step {} is not a multiple of {step}",
                    p.step
                )));
            }
            if (ratio - 1.0).abs() < 1e-9 {
                Ok((*p).clone())
            } else {
                p.resample(step)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let density = aligned[0].convolve(&aligned[1])?.convolve(&aligned[2])?.renormalized();
    Ok(MarginDensity { density })
}

/// `E[hold (q - X)^+ + short (X - q)^+]` for `X` on the grid `part`.
pub fn expected_reserve_cost(part: &GridDensity, cost: &SideCost, q: f64) -> f64 {
    part.mass
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let x = part.x(i);
            m * if x <= q {
                cost.hold * (q - x)
            } else {
                cost.short * (x - q)
            }
        })
        .sum()
}

/// Minimizer of [`expected_reserve_cost`] over `points` equally spaced
/// reserve levels on `[0, support max]`.
pub fn grid_search_reserve(part: &GridDensity, cost: &SideCost, points: usize) -> f64 {
    let hi = part.support_max().max(0.0);
    let n = points.max(2);
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n {
        let q = hi * i as f64 / (n - 1) as f64;
        let c = expected_reserve_cost(part, cost, q);
        if c < best.0 {
            best = (c, q);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReserveDecision {
    pub q_up: f64,
    pub q_down: f64,
    /// Expected cost of both directions at the chosen levels.
    pub expected_cost: f64,
}

/// Quantiles of the positive and negative margin parts at
/// `short / (short + hold)`.
pub fn optimal_reserves(problem: &ReserveProblem, margin: &MarginDensity) -> Result<ReserveDecision> {
    problem.up.validate()?;
    problem.down.validate()?;
    let pos = margin.positive_part();
    let neg = margin.negative_part();
    let q_up = pos.quantile(problem.up.level());
    let q_down = neg.quantile(problem.down.level());
    Ok(ReserveDecision {
        q_up,
        q_down,
        expected_cost: expected_reserve_cost(&pos, &problem.up, q_up)
            + expected_reserve_cost(&neg, &problem.down, q_down),
    })
}

/// One line of the reserve report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReserveReportRow {
    pub origin: DateTime<Utc>,
    pub lead: usize,
    pub decision: ReserveDecision,
}

pub const RESERVE_HEADER: [&str; 5] = ["origin", "lead_h", "q_up", "q_down", "expected_cost"];

pub fn write_reserve_report(path: impl AsRef<Path>, rows: &[ReserveReportRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESERVE_HEADER)?;
    for r in rows {
        w.write_record([
            format_timestamp(r.origin),
            r.lead.to_string(),
            r.decision.q_up.to_string(),
            r.decision.q_down.to_string(),
            r.decision.expected_cost.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::ParametricDensity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const STEP: f64 = DEFAULT_STEP;

    fn problem(
        load: GridDensity,
        outage: GridDensity,
        wind: GridDensity,
        up: SideCost,
        down: SideCost,
    ) -> ReserveProblem {
        ReserveProblem {
            load_error: load,
            generation_loss: outage,
            wind_error: wind,
            up,
            down,
        }
    }

    fn costs() -> SideCost {
        SideCost::new(10.0, 1.0).unwrap()
    }

    #[test]
    fn deltas_add() {
        let p = problem(
            GridDensity::point(0.1, STEP).unwrap(),
            GridDensity::point(0.25, STEP).unwrap(),
            GridDensity::point(-0.05, STEP).unwrap(),
            costs(),
            costs(),
        );
        let m = convolve_margin(&p).unwrap();
        let top = m
            .density
            .masses()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((m.density.x(top) - 0.3).abs() <= STEP);
        assert!((m.density.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_variances_add() {
        let (s1, s2) = (0.05, 0.12);
        let p = problem(
            GridDensity::gaussian(0.0, s1, STEP).unwrap(),
            GridDensity::point(0.0, STEP).unwrap(),
            GridDensity::gaussian(0.0, s2, STEP).unwrap(),
            costs(),
            costs(),
        );
        let v = convolve_margin(&p).unwrap().density.variance();
        let target = s1 * s1 + s2 * s2;
        assert!(((v - target) / target).abs() < 1e-3, "{v} vs {target}");
    }

    #[test]
    fn identity_element_and_commutation() {
        let u = GridDensity::uniform(-0.2, 0.3, STEP).unwrap();
        let zero = GridDensity::point(0.0, STEP).unwrap();
        let m = convolve_margin(&problem(u.clone(), zero.clone(), zero.clone(), costs(), costs())).unwrap();
        for (a, b) in m.density.masses().iter().zip(u.masses()) {
            assert!((a - b).abs() < 1e-12);
        }
        let g = GridDensity::gaussian(0.02, 0.07, STEP).unwrap();
        let o = GridDensity::two_point_outage(0.03, 0.2, STEP).unwrap();
        let a = convolve_margin(&problem(u.clone(), o.clone(), g.clone(), costs(), costs())).unwrap();
        let b = convolve_margin(&problem(g, u, o, costs(), costs())).unwrap();
        assert!((a.density.lo() - b.density.lo()).abs() < 1e-12);
        for (x, y) in a.density.masses().iter().zip(b.density.masses()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn resampling_and_incompatible_grids() {
        let coarse = GridDensity::gaussian(0.0, 0.1, 0.004).unwrap();
        let fine = coarse.resample(0.001).unwrap();
        assert!((fine.mean() - coarse.mean()).abs() < 1e-12);
        let odd = GridDensity::gaussian(0.0, 0.1, 0.0015).unwrap();
        let p = problem(coarse, odd, GridDensity::point(0.0, 0.001).unwrap(), costs(), costs());
        assert!(matches!(convolve_margin(&p), Err(Error::IncompatibleGrids(_))));
        assert!(GridDensity::new(0.0, 0.01, vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn symmetric_margin_symmetric_reserves() {
        let g = GridDensity::gaussian(0.0, 0.08, STEP).unwrap();
        let zero = GridDensity::point(0.0, STEP).unwrap();
        let p = problem(g, zero.clone(), zero, costs(), costs());
        let m = convolve_margin(&p).unwrap();
        let d = optimal_reserves(&p, &m).unwrap();
        assert!((d.q_up - d.q_down).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn free_holding_covers_support() {
        let u = GridDensity::uniform(-0.1, 0.4, STEP).unwrap();
        let zero = GridDensity::point(0.0, STEP).unwrap();
        let p = problem(u, zero.clone(), zero, SideCost::new(5.0, 0.0).unwrap(), costs());
        let m = convolve_margin(&p).unwrap();
        let d = optimal_reserves(&p, &m).unwrap();
        assert!((d.q_up - 0.4).abs() < 1e-9);
        assert!(SideCost::new(1.0, 2.0).is_err());
    }

    #[test]
    fn quantile_rule_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let wind_f = PredictiveCdf::parametric(
                0,
                1,
                ParametricDensity::censored_gaussian(rng.random_range(0.1..0.9), rng.random_range(0.05..0.2)).unwrap(),
            );
            let point = rng.random_range(0.2..0.8);
            let p = problem(
                GridDensity::gaussian(0.0, rng.random_range(0.01..0.05), STEP).unwrap(),
                GridDensity::two_point_outage(rng.random_range(0.0..0.1), rng.random_range(0.0..0.2), STEP).unwrap(),
                GridDensity::wind_error(&wind_f, point, STEP).unwrap(),
                SideCost::new(rng.random_range(2.0..20.0), rng.random_range(0.0..2.0)).unwrap(),
                SideCost::new(rng.random_range(2.0..20.0), rng.random_range(0.0..2.0)).unwrap(),
            );
            let m = convolve_margin(&p).unwrap();
            let d = optimal_reserves(&p, &m).unwrap();
            for (part, cost, q) in [(m.positive_part(), p.up, d.q_up), (m.negative_part(), p.down, d.q_down)] {
                let grid = grid_search_reserve(&part, &cost, 1000);
                let step = part.support_max() / 999.0;
                assert!(expected_reserve_cost(&part, &cost, q) <= expected_reserve_cost(&part, &cost, grid) + 1e-12);
                assert!((q - grid).abs() <= step.max(STEP) + 1e-12, "{q} vs {grid}");
            }
        }
    }

    #[test]
    fn wind_error_keeps_boundary_mass() {
        let f = PredictiveCdf::parametric(0, 1, ParametricDensity::censored_gaussian(0.1, 0.2).unwrap());
        let e = GridDensity::wind_error(&f, 0.3, STEP).unwrap();
        // Mass at Y = 0 sits at error 0.3.
        let i = ((0.3 - e.lo()) / STEP).round() as usize;
        assert!((e.masses()[i] - f.mass_at_zero()).abs() < 1e-3);
        assert!((e.mean() - (0.3 - f.mean())).abs() < 1e-4);
    }
}
