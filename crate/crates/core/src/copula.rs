//! Joint space-time predictive distributions through a Gaussian copula over
//! the per-cell marginals: latent transform, adaptive correlation tracking
//! and trajectory sampling.

use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{format_timestamp, parse_timestamp, MultivariateTarget, SiteSet};
use crate::error::{Error, Result};
use crate::linalg::cholesky_with_jitter;
use crate::prob::PredictiveCdf;
use crate::stats::{norm_cdf, norm_quantile};

/// Default smoothing factor for the latent correlation.
pub const DEFAULT_LAMBDA: f64 = 0.98;
/// Probabilities are kept in `[PROB_CLAMP, 1 - PROB_CLAMP]` before `Φ⁻¹`.
pub const PROB_CLAMP: f64 = 1e-9;
/// Monte Carlo draws used by [`joint_cdf`].
pub const JOINT_CDF_DRAWS: usize = 100_000;

/// Marginal predictive distributions for every (site, lead) cell of a
/// window, stored site-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    pub sites: usize,
    pub leads: usize,
    cells: Vec<Option<PredictiveCdf>>,
}

impl MarginalSet {
    pub fn new(sites: usize, leads: usize) -> Self {
        Self {
            sites,
            leads,
            cells: vec![None; sites * leads],
        }
    }

    /// Places each CDF at the cell named by its `site` and `lead`.
    pub fn from_cdfs(sites: usize, leads: usize, cdfs: impl IntoIterator<Item = PredictiveCdf>) -> Result<Self> {
        let mut set = Self::new(sites, leads);
        for cdf in cdfs {
            set.insert(cdf)?;
        }
        Ok(set)
    }

    pub fn for_target(target: &MultivariateTarget) -> Self {
        Self::new(target.sites.len(), target.leads.len())
    }

    pub fn dim(&self) -> usize {
        self.sites * self.leads
    }

    pub fn index(&self, site: usize, lead: usize) -> usize {
        site * self.leads + (lead - 1)
    }

    pub fn insert(&mut self, cdf: PredictiveCdf) -> Result<()> {
        if cdf.site >= self.sites || cdf.lead == 0 || cdf.lead > self.leads {
            return Err(Error::InvalidArgument(format!(
                "cell (site {}, lead {}) outside a {}x{} window",
                cdf.site, cdf.lead, self.sites, self.leads
            )));
        }
        let idx = self.index(cdf.site, cdf.lead);
        self.cells[idx] = Some(cdf);
        Ok(())
    }

    pub fn get(&self, flat: usize) -> Result<&PredictiveCdf> {
        self.cells
            .get(flat)
            .and_then(Option::as_ref)
            .ok_or(Error::MissingMarginal(flat))
    }
}

/// Latent Gaussian vector for one forecast origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub origin: Option<DateTime<Utc>>,
    pub z: Vec<f64>,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `z_i = Φ⁻¹(F_i(y_i))` for every cell of the window.
pub fn to_latent(y: &[f64], marginals: &MarginalSet) -> Result<LatentSample> {
    if y.len() != marginals.dim() {
        return Err(Error::DimensionMismatch {
            expected: marginals.dim(),
            got: y.len(),
        });
    }
    let z = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    name: "observation",
                    value: v,
                    expected: "[0, 1]",
                });
            }
            Ok(norm_quantile(clamp_prob(marginals.get(i)?.cdf(v))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LatentSample { origin: None, z })
}

/// Exponentially smoothed correlation of the latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCovariance {
    matrix: DMatrix<f64>,
    lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "covariance smoothing",
            value: lambda,
            expected: "(0, 1]",
        })
    }
}

impl LatentCovariance {
    pub fn identity(dim: usize, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            matrix: DMatrix::identity(dim, dim),
            lambda,
        })
    }

    /// Wraps a correlation matrix: symmetric with unit diagonal (±1e-10).
    pub fn from_matrix(matrix: DMatrix<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.ncols(),
            });
        }
        for i in 0..n {
            if (matrix[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(
                    "correlation matrix needs a unit diagonal".into(),
                ));
            }
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("correlation matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { matrix, lambda })
    }

    /// Every entry equal to one: perfect dependence.
    pub fn comonotone(dim: usize, lambda: f64) -> Result<Self> {
        Self::from_matrix(DMatrix::from_element(dim, dim, 1.0), lambda)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// `λ C + (1 - λ) z zᵀ`, before renormalization.
    pub fn blend(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        let l = self.lambda;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            l * self.matrix[(i, j)] + (1.0 - l) * z[i] * z[j]
        }))
    }

    /// Blends in `z` and rescales to unit diagonal.
    pub fn update(&mut self, sample: &LatentSample) -> Result<()> {
        let mut m = self.blend(&sample.z)?;
        let n = self.dim();
        let d: Vec<f64> = (0..n).map(|i| m[(i, i)].sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if i == j { 1.0 } else { m[(i, j)] / (d[i] * d[j]) };
            }
        }
        self.matrix = m;
        Ok(())
    }

    /// Lower Cholesky factor with the jitter that was needed.
    pub fn cholesky(&self) -> Result<(DMatrix<f64>, f64)> {
        cholesky_with_jitter(&self.matrix)
    }

    /// Writes `dim <n>`, `lambda <λ>` and then one row per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let n = self.dim();
        let mut text = format!("dim {n}\nlambda {}\n", self.lambda);
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| self.matrix[(i, j)].to_string()).collect();
            text.push_str(&row.join(" "));
            text.push('\n');
        }
        w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let bad = |what: &str| Error::InvalidArgument(format!("covariance checkpoint: {what}"));
        let header = |line: Option<&str>, key: &str| -> Result<String> {
            let line = line.ok_or_else(|| bad("truncated header"))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| bad(&format!("expected '{key}'")))?;
            Ok(rest.trim().to_owned())
        };
        let n: usize = header(lines.next(), "dim")?.parse().map_err(|_| bad("dimension"))?;
        let lambda: f64 = header(lines.next(), "lambda")?.parse().map_err(|_| bad("lambda"))?;
        let mut values = Vec::with_capacity(n * n);
        for line in lines.take(n) {
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| bad("matrix entry"))?);
            }
        }
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(n, n, &values), lambda)
    }
}

/// Scenario paths over a window, each an `m x n` site-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub origin: Option<DateTime<Utc>>,
    pub sites: usize,
    pub leads: usize,
    /// `paths[j][site * leads + lead - 1]`.
    pub paths: Vec<Vec<f64>>,
}

impl TrajectorySet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn value(&self, j: usize, site: usize, lead: usize) -> f64 {
        self.paths[j][site * self.leads + lead - 1]
    }

    /// Appends rows `origin,traj_id,site,lead_h,value` to `w`.
    pub fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>, site_ids: &SiteSet) -> Result<()> {
        let origin = self.origin.map(format_timestamp).unwrap_or_default();
        for (j, path) in self.paths.iter().enumerate() {
            for s in 0..self.sites {
                for k in 1..=self.leads {
                    w.write_record([
                        origin.as_str(),
                        &j.to_string(),
                        &site_ids.ids()[s],
                        &k.to_string(),
                        &path[s * self.leads + k - 1].to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    }
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["origin", "traj_id", "site", "lead_h", "value"];

pub fn write_trajectories(path: impl AsRef<Path>, sets: &[TrajectorySet], sites: &SiteSet) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(TRAJECTORY_HEADER)?;
    for set in sets {
        set.write_rows(&mut w, sites)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a trajectory export, one set per origin in file order.
pub fn read_trajectories(path: impl AsRef<Path>, sites: &SiteSet) -> Result<Vec<TrajectorySet>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut raw: Vec<(String, Vec<(usize, usize, usize, f64)>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let get = |k: usize| rec.get(k).unwrap_or("");
        let bad = |k: usize| Error::MalformedValue {
            row,
            value: get(k).to_owned(),
        };
        let j: usize = get(1).parse().map_err(|_| bad(1))?;
        let s = sites
            .index_of(get(2))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown site '{}'", get(2))))?;
        let k: usize = get(3).parse().map_err(|_| bad(3))?;
        let v: f64 = get(4).parse().map_err(|_| bad(4))?;
        match raw.last_mut() {
            Some((o, cells)) if o == get(0) => cells.push((j, s, k, v)),
            _ => raw.push((get(0).to_owned(), vec![(j, s, k, v)])),
        }
    }
    raw.into_iter()
        .enumerate()
        .map(|(i, (origin, cells))| {
            let n_traj = cells.iter().map(|c| c.0).max().unwrap_or(0) + 1;
            let leads = cells.iter().map(|c| c.2).max().unwrap_or(0);
            let m = sites.len();
            let mut paths = vec![vec![f64::NAN; m * leads]; n_traj];
            for (j, s, k, v) in cells {
                if k == 0 {
                    return Err(Error::MalformedValue {
                        row: i + 2,
                        value: "lead_h 0".into(),
                    });
                }
                paths[j][s * leads + k - 1] = v;
            }
            let origin = if origin.is_empty() {
                None
            } else {
                Some(parse_timestamp(&origin).ok_or(Error::MalformedTimestamp {
                    row: i + 2,
                    value: origin,
                })?)
            };
            Ok(TrajectorySet {
                origin,
                sites: m,
                leads,
                paths,
            })
        })
        .collect()
}

/// Independent RNG stream for draw `j` of a run seeded with `seed`.
pub fn draw_rng(seed: u64, j: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    rng
}

/// `J` draws `z ~ N(0, C)` via the (jittered) Cholesky factor.
pub fn sample_latent(cov: &LatentCovariance, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let (l, _) = cov.cholesky()?;
    let n = cov.dim();
    Ok((0..draws)
        .into_par_iter()
        .map(|j| {
            let mut rng = draw_rng(seed, j);
            let e: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..n).map(|i| (0..=i).map(|k| l[(i, k)] * e[k]).sum()).collect()
        })
        .collect())
}

/// `y_i = F_i⁻¹(Φ(z_i))` for each latent draw.
pub fn trajectories_from_latent(marginals: &MarginalSet, latent: &[Vec<f64>]) -> Result<TrajectorySet> {
    let n = marginals.dim();
    let cdfs = (0..n).map(|i| marginals.get(i)).collect::<Result<Vec<_>>>()?;
    let paths = latent
        .par_iter()
        .map(|z| {
            if z.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: z.len(),
                });
            }
            Ok(z.iter()
                .zip(&cdfs)
                .map(|(zi, f)| f.quantile(norm_cdf(*zi)).clamp(0.0, 1.0))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySet {
        origin: None,
        sites: marginals.sites,
        leads: marginals.leads,
        paths,
    })
}

/// `J` space-time trajectories; reproducible for a given seed and
/// independent of the thread count.
pub fn sample_trajectories(
    marginals: &MarginalSet,
    cov: &LatentCovariance,
    draws: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    if draws == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    if cov.dim() != marginals.dim() {
        return Err(Error::DimensionMismatch {
            expected: marginals.dim(),
            got: cov.dim(),
        });
    }
    trajectories_from_latent(marginals, &sample_latent(cov, draws, seed)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// `P(Y <= y)` jointly over the window, by Monte Carlo over `draws` latent
/// vectors.
pub fn joint_cdf(
    y: &[f64],
    marginals: &MarginalSet,
    cov: &LatentCovariance,
    draws: usize,
    seed: u64,
) -> Result<McEstimate> {
    if cov.dim() != marginals.dim() {
        return Err(Error::DimensionMismatch {
            expected: marginals.dim(),
            got: cov.dim(),
        });
    }
    let u = to_latent(y, marginals)?.z;
    let latent = sample_latent(cov, draws, seed)?;
    let hits = latent.iter().filter(|z| z.iter().zip(&u).all(|(a, b)| a <= b)).count();
    let p = hits as f64 / draws as f64;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / draws as f64).sqrt(),
    })
}
