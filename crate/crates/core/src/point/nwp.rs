//! Numerical weather prediction inputs: forecast wind components per site,
//! origin and lead. CSV files hold one site each: `origin,lead_h,u,v`.

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};

use crate::data::{format_timestamp, parse_timestamp, Panel};
use crate::error::{Error, Result};

/// Source of forecast wind components `(û, v̂)` in m/s.
pub trait NwpSource: Sync {
    fn uv(&self, site: usize, origin: DateTime<Utc>, lead: usize) -> Option<(f64, f64)>;
}

/// Components of a wind blowing *from* `direction_deg` at `speed`.
pub fn uv_from_speed_direction(speed: f64, direction_deg: f64) -> (f64, f64) {
    let rad = direction_deg.to_radians();
    (-speed * rad.sin(), -speed * rad.cos())
}

/// Speed and meteorological direction in `[0, 360)` from components.
pub fn speed_direction(u: f64, v: f64) -> (f64, f64) {
    let speed = u.hypot(v);
    let dir = (-u).atan2(-v).to_degrees().rem_euclid(360.0);
    (speed, dir)
}

/// Forecasts equal to the realized speed and direction: an upper bound on
/// NWP skill for synthetic studies.
#[derive(Debug, Clone)]
pub struct PerfectNwp {
    speed: Panel,
    direction: Panel,
}

impl PerfectNwp {
    pub fn new(speed: Panel, direction: Panel) -> Result<Self> {
        if speed.start != direction.start || speed.values.len() != direction.values.len() {
            return Err(Error::InvalidArgument(
                "speed and direction panels must share their grid".into(),
            ));
        }
        Ok(Self { speed, direction })
    }
}

impl NwpSource for PerfectNwp {
    fn uv(&self, site: usize, origin: DateTime<Utc>, lead: usize) -> Option<(f64, f64)> {
        let offset = (origin - self.speed.start).num_hours() + lead as i64;
        let m = self.speed.names.len();
        if offset < 0 || site >= m {
            return None;
        }
        let idx = offset as usize * m + site;
        let (s, d) = (*self.speed.values.get(idx)?, *self.direction.values.get(idx)?);
        (!s.is_nan() && !d.is_nan()).then(|| uv_from_speed_direction(s, d))
    }
}

/// Tabulated forecasts, typically loaded from CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NwpTable {
    cells: Vec<HashMap<(DateTime<Utc>, usize), (f64, f64)>>,
}

impl NwpTable {
    pub fn new(sites: usize) -> Self {
        Self {
            cells: vec![HashMap::new(); sites],
        }
    }

    pub fn insert(&mut self, site: usize, origin: DateTime<Utc>, lead: usize, uv: (f64, f64)) {
        self.cells[site].insert((origin, lead), uv);
    }

    pub fn sites(&self) -> usize {
        self.cells.len()
    }

    /// Samples `source` at the given origins and leads `1..=leads`.
    pub fn from_source(source: &dyn NwpSource, sites: usize, origins: &[DateTime<Utc>], leads: usize) -> Self {
        let mut table = Self::new(sites);
        for s in 0..sites {
            for &o in origins {
                for k in 1..=leads {
                    if let Some(uv) = source.uv(s, o, k) {
                        table.insert(s, o, k, uv);
                    }
                }
            }
        }
        table
    }

    pub fn write_site(&self, site: usize, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["origin", "lead_h", "u", "v"])?;
        let mut keys: Vec<_> = self.cells[site].keys().copied().collect();
        keys.sort();
        for key in keys {
            let (u, v) = self.cells[site][&key];
            w.write_record([format_timestamp(key.0), key.1.to_string(), u.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Loads one CSV per site, in site order.
    pub fn load(paths: &[impl AsRef<Path>]) -> Result<Self> {
        let mut table = Self::new(paths.len());
        for (site, path) in paths.iter().enumerate() {
            let path = path.as_ref();
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let row = i + 2;
                let get = |k: usize| rec.get(k).unwrap_or("");
                let origin = parse_timestamp(get(0)).ok_or_else(|| Error::MalformedTimestamp {
                    row,
                    value: get(0).to_owned(),
                })?;
                let bad = |k: usize| Error::MalformedValue {
                    row,
                    value: get(k).to_owned(),
                };
                let lead: usize = get(1).parse().map_err(|_| bad(1))?;
                let u: f64 = get(2).parse().map_err(|_| bad(2))?;
                let v: f64 = get(3).parse().map_err(|_| bad(3))?;
                table.insert(site, origin, lead, (u, v));
            }
        }
        Ok(table)
    }
}

impl NwpSource for NwpTable {
    fn uv(&self, site: usize, origin: DateTime<Utc>, lead: usize) -> Option<(f64, f64)> {
        self.cells.get(site)?.get(&(origin, lead)).copied()
    }
}

/// Origin timestamps `first, first + step, ...` strictly before `end`.
pub fn origins_between(first: DateTime<Utc>, end: DateTime<Utc>, step_hours: i64) -> Vec<DateTime<Utc>> {
    let mut out = Vec::new();
    let mut t = first;
    while t < end {
        out.push(t);
        t += Duration::hours(step_hours);
    }
    out
}
