//! Long-format CSV export of marginal forecasts.
//!
//! Quantile form: `origin,site,lead_h,alpha,quantile`.
//! Parametric form: `origin,site,lead_h,family,mu,sigma,nu`. For Beta
//! densities `mu` and `sigma` hold the mean and standard deviation.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::data::{format_timestamp, parse_timestamp, SiteSet};
use crate::error::{Error, Result};

use super::cdf::{CdfRepr, PredictiveCdf};
use super::parametric::{Family, ParametricDensity};
use super::quantiles::QuantileSet;

/// A marginal forecast issued at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct IssuedForecast {
    pub origin: DateTime<Utc>,
    pub cdf: PredictiveCdf,
}

fn create(path: &Path) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(std::io::BufWriter::new(file)))
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Writes each forecast's quantiles at `levels`.
pub fn write_quantile_forecasts(
    path: impl AsRef<Path>,
    sites: &SiteSet,
    forecasts: &[IssuedForecast],
    levels: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["origin", "site", "lead_h", "alpha", "quantile"])?;
    for f in forecasts {
        let origin = format_timestamp(f.origin);
        let site = &sites.ids()[f.cdf.site];
        for &alpha in levels {
            w.write_record([
                origin.as_str(),
                site,
                &f.cdf.lead.to_string(),
                &alpha.to_string(),
                &f.cdf.quantile(alpha).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn parse_f64(text: &str, row: usize) -> Result<f64> {
    text.parse().map_err(|_| Error::MalformedValue {
        row,
        value: text.to_owned(),
    })
}

fn parse_lead(text: &str, row: usize) -> Result<usize> {
    text.parse().map_err(|_| Error::MalformedValue {
        row,
        value: text.to_owned(),
    })
}

fn parse_origin(text: &str, row: usize) -> Result<DateTime<Utc>> {
    parse_timestamp(text).ok_or_else(|| Error::MalformedTimestamp {
        row,
        value: text.to_owned(),
    })
}

fn site_index(sites: &SiteSet, id: &str) -> Result<usize> {
    sites
        .index_of(id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown site '{id}'")))
}

/// Reads a quantile export back into quantile-set forecasts, ordered by
/// origin, site and lead.
pub fn read_quantile_forecasts(path: impl AsRef<Path>, sites: &SiteSet) -> Result<Vec<IssuedForecast>> {
    let mut rdr = open(path.as_ref())?;
    let mut cells: BTreeMap<(DateTime<Utc>, usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let get = |k: usize| rec.get(k).unwrap_or("");
        let key = (
            parse_origin(get(0), row)?,
            site_index(sites, get(1))?,
            parse_lead(get(2), row)?,
        );
        cells
            .entry(key)
            .or_default()
            .push((parse_f64(get(3), row)?, parse_f64(get(4), row)?));
    }
    cells
        .into_iter()
        .map(|((origin, site, lead), mut pairs)| {
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (levels, values) = pairs.into_iter().unzip();
            Ok(IssuedForecast {
                origin,
                cdf: PredictiveCdf::quantiles(site, lead, QuantileSet::new(levels, values)?),
            })
        })
        .collect()
}

/// Writes parametric forecasts; other representations are rejected.
pub fn write_parametric_forecasts(path: impl AsRef<Path>, sites: &SiteSet, forecasts: &[IssuedForecast]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["origin", "site", "lead_h", "family", "mu", "sigma", "nu"])?;
    for f in forecasts {
        let CdfRepr::Parametric(d) = &f.cdf.repr else {
            return Err(Error::InvalidArgument(
                "parametric export needs parametric forecasts".into(),
            ));
        };
        let (mu, sigma, nu) = match *d {
            ParametricDensity::TruncatedGaussian { mu, sigma } | ParametricDensity::CensoredGaussian { mu, sigma } => {
                (mu, sigma, String::new())
            }
            ParametricDensity::GeneralizedLogitNormal { mu, sigma, nu, .. } => (mu, sigma, nu.to_string()),
            ParametricDensity::Beta { .. } => (d.mean(), d.variance().sqrt(), String::new()),
        };
        w.write_record([
            format_timestamp(f.origin),
            sites.ids()[f.cdf.site].clone(),
            f.cdf.lead.to_string(),
            d.family().as_str().to_owned(),
            mu.to_string(),
            sigma.to_string(),
            nu,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_parametric_forecasts(path: impl AsRef<Path>, sites: &SiteSet) -> Result<Vec<IssuedForecast>> {
    let mut rdr = open(path.as_ref())?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let get = |k: usize| rec.get(k).unwrap_or("");
        let origin = parse_origin(get(0), row)?;
        let site = site_index(sites, get(1))?;
        let lead = parse_lead(get(2), row)?;
        let family = Family::parse(get(3)).ok_or_else(|| Error::MalformedValue {
            row,
            value: get(3).to_owned(),
        })?;
        let mu = parse_f64(get(4), row)?;
        let sigma = parse_f64(get(5), row)?;
        let density = match family {
            Family::TruncatedGaussian => ParametricDensity::truncated_gaussian(mu, sigma)?,
            Family::CensoredGaussian => ParametricDensity::censored_gaussian(mu, sigma)?,
            Family::GeneralizedLogitNormal => {
                ParametricDensity::generalized_logit_normal(mu, sigma, parse_f64(get(6), row)?)?
            }
            Family::Beta => ParametricDensity::beta_from_moments(mu, sigma * sigma)?,
        };
        out.push(IssuedForecast {
            origin,
            cdf: PredictiveCdf::parametric(site, lead, density),
        });
    }
    Ok(out)
}
