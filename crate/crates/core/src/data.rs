//! Domain types for the bounded space-time power process: site sets, lead
//! time sets, normalized hourly series with explicit missing cells, zone
//! aggregation and the site-major flattening of `(site, lead)` targets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};

use crate::error::{Error, Result};

/// Relative excess over nominal capacity that is treated as ingestion noise
/// and clamped to 1.0.
pub const CAPACITY_SLACK: f64 = 1e-9;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// Ordered set of sites with their nominal capacities (MW).
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet {
    ids: Vec<String>,
    capacities: Vec<f64>,
}

impl SiteSet {
    pub fn new(ids: Vec<String>, capacities: Vec<f64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidArgument("a site set needs at least one site".into()));
        }
        if ids.len() != capacities.len() {
            return Err(Error::CapacityMismatch(format!(
                "{} sites but {} capacities",
                ids.len(),
                capacities.len()
            )));
        }
        let unique: BTreeSet<&String> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(Error::InvalidArgument("duplicate site identifier".into()));
        }
        if let Some(c) = capacities.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return Err(Error::CapacityMismatch(format!(
                "capacity {c} is not strictly positive"
            )));
        }
        Ok(Self { ids, capacities })
    }

    /// Sites named `prefix1..prefixN` sharing one capacity.
    pub fn uniform(prefix: &str, count: usize, capacity: f64) -> Result<Self> {
        Self::new(
            (1..=count).map(|i| format!("{prefix}{i}")).collect(),
            vec![capacity; count],
        )
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn capacity(&self, site: usize) -> f64 {
        self.capacities[site]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    pub fn total_capacity(&self) -> f64 {
        self.capacities.iter().sum()
    }
}

/// The `n` consecutive lead times `t+1..t+n` following an origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadTimeSet {
    origin: DateTime<Utc>,
    count: usize,
    step_hours: i64,
}

impl LeadTimeSet {
    pub fn new(origin: DateTime<Utc>, count: usize) -> Result<Self> {
        Self::with_step(origin, count, 1)
    }

    pub fn with_step(origin: DateTime<Utc>, count: usize, step_hours: i64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("a lead time set needs n >= 1".into()));
        }
        if step_hours <= 0 {
            return Err(Error::InvalidArgument("lead step must be positive".into()));
        }
        Ok(Self {
            origin,
            count,
            step_hours,
        })
    }

    pub fn origin(&self) -> DateTime<Utc> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step_hours(&self) -> i64 {
        self.step_hours
    }

    pub fn horizons(&self) -> impl Iterator<Item = usize> {
        1..=self.count
    }

    pub fn time_at(&self, lead: usize) -> DateTime<Utc> {
        self.origin + Duration::hours(self.step_hours * lead as i64)
    }
}

/// Read access to an hourly panel of observations, one column per site.
pub trait Observations: Sync {
    fn len(&self) -> usize;
    fn n_sites(&self) -> usize;
    fn value(&self, time: usize, site: usize) -> Option<f64>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Hourly normalized power observations `y_{s,t}` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSeries {
    sites: SiteSet,
    start: DateTime<Utc>,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl SpaceTimeSeries {
    /// Builds a series from time-major rows of normalized values.
    pub fn new(sites: SiteSet, start: DateTime<Utc>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let m = sites.len();
        let mut values = Vec::with_capacity(rows.len() * m);
        let mut missing = Vec::with_capacity(rows.len() * m);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            for (s, cell) in row.into_iter().enumerate() {
                match cell {
                    Some(v) if (0.0..=1.0).contains(&v) => {
                        values.push(v);
                        missing.push(false);
                    }
                    Some(v) => {
                        return Err(Error::OutOfRange {
                            name: "normalized power",
                            value: v,
                            expected: "[0, 1]",
                        })
                        .map_err(|e| annotate(e, &sites, s, t));
                    }
                    None => {
                        values.push(f64::NAN);
                        missing.push(true);
                    }
                }
            }
        }
        Ok(Self {
            sites,
            start,
            values,
            missing,
        })
    }

    /// Builds a complete series from per-site columns.
    pub fn from_columns(sites: SiteSet, start: DateTime<Utc>, columns: &[Vec<f64>]) -> Result<Self> {
        let len = columns.first().map(Vec::len).unwrap_or(0);
        if columns.len() != sites.len() || columns.iter().any(|c| c.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: sites.len(),
                got: columns.len(),
            });
        }
        let rows = (0..len).map(|t| columns.iter().map(|c| Some(c[t])).collect()).collect();
        Self::new(sites, start, rows)
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn timestamp(&self, time: usize) -> DateTime<Utc> {
        self.start + Duration::hours(time as i64)
    }

    pub fn index_of(&self, stamp: DateTime<Utc>) -> Option<usize> {
        let hours = (stamp - self.start).num_hours();
        if hours < 0 || self.start + Duration::hours(hours) != stamp {
            return None;
        }
        let idx = hours as usize;
        (idx < self.len()).then_some(idx)
    }

    pub fn get(&self, time: usize, site: usize) -> Option<f64> {
        let i = time * self.sites.len() + site;
        (!self.missing[i]).then(|| self.values[i])
    }

    pub fn column(&self, site: usize) -> Vec<Option<f64>> {
        (0..self.len()).map(|t| self.get(t, site)).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    /// Contiguous sub-range of time steps.
    pub fn slice(&self, from: usize, to: usize) -> SpaceTimeSeries {
        let m = self.sites.len();
        Self {
            sites: self.sites.clone(),
            start: self.timestamp(from),
            values: self.values[from * m..to * m].to_vec(),
            missing: self.missing[from * m..to * m].to_vec(),
        }
    }

    /// Keeps only the listed sites, in the given order.
    pub fn select_sites(&self, indices: &[usize]) -> Result<SpaceTimeSeries> {
        let ids = indices.iter().map(|&i| self.sites.ids[i].clone()).collect();
        let caps = indices.iter().map(|&i| self.sites.capacities[i]).collect();
        let sites = SiteSet::new(ids, caps)?;
        let rows = (0..self.len())
            .map(|t| indices.iter().map(|&s| self.get(t, s)).collect())
            .collect();
        Self::new(sites, self.start, rows)
    }
}

fn annotate(err: Error, sites: &SiteSet, site: usize, row: usize) -> Error {
    match err {
        Error::OutOfRange { value, .. } => Error::InvalidArgument(format!(
            "normalized value {value} for site '{}' at row {row} outside [0, 1]",
            sites.ids[site]
        )),
        other => other,
    }
}

impl Observations for SpaceTimeSeries {
    fn len(&self) -> usize {
        self.values.len() / self.sites.len()
    }

    fn n_sites(&self) -> usize {
        self.sites.len()
    }

    fn value(&self, time: usize, site: usize) -> Option<f64> {
        self.get(time, site)
    }
}

/// Unbounded hourly panel (wind speeds, directions) sharing the time axis
/// of a [`SpaceTimeSeries`]. NaN marks missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub names: Vec<String>,
    pub start: DateTime<Utc>,
    /// Time-major values, `values[t * names.len() + s]`.
    pub values: Vec<f64>,
}

impl Panel {
    pub fn from_columns(names: Vec<String>, start: DateTime<Utc>, columns: &[Vec<f64>]) -> Self {
        let len = columns.first().map(Vec::len).unwrap_or(0);
        let mut values = Vec::with_capacity(len * columns.len());
        for t in 0..len {
            for c in columns {
                values.push(c[t]);
            }
        }
        Self { names, start, values }
    }

    pub fn column(&self, site: usize) -> Vec<f64> {
        (0..self.len())
            .map(|t| self.values[t * self.names.len() + site])
            .collect()
    }
}

impl Observations for Panel {
    fn len(&self) -> usize {
        if self.names.is_empty() {
            0
        } else {
            self.values.len() / self.names.len()
        }
    }

    fn n_sites(&self) -> usize {
        self.names.len()
    }

    fn value(&self, time: usize, site: usize) -> Option<f64> {
        let v = self.values[time * self.names.len() + site];
        (!v.is_nan()).then_some(v)
    }
}

/// Normalizes one raw power value by its nominal capacity.
pub fn normalize(raw: f64, capacity: f64) -> Result<f64> {
    if raw < 0.0 {
        return Err(Error::NegativePower {
            site: String::new(),
            row: 0,
            value: raw,
        });
    }
    if raw > capacity * (1.0 + CAPACITY_SLACK) || raw.is_nan() {
        return Err(Error::ExceedsCapacity {
            site: String::new(),
            row: 0,
            value: raw,
            capacity,
        });
    }
    Ok((raw / capacity).min(1.0))
}

pub fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

pub fn format_timestamp(stamp: DateTime<Utc>) -> String {
    stamp.format(TIMESTAMP_FORMAT).to_string()
}

/// Reads a `timestamp,<site1>,<site2>,...` CSV of raw power values and
/// normalizes each column by the capacity given for that site in `schema`.
///
/// Timestamps must be strictly increasing and lie on the hourly grid that
/// starts at the first row; absent hours become missing cells, as do empty
/// fields.
pub fn load_series(path: impl AsRef<Path>, schema: &SiteSet) -> Result<SpaceTimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(file, schema)
}

pub fn read_series<R: std::io::Read>(reader: R, schema: &SiteSet) -> Result<SpaceTimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if names.len() != schema.len() {
        return Err(Error::CapacityMismatch(format!(
            "file has {} site columns, configuration has {}",
            names.len(),
            schema.len()
        )));
    }
    let mut columns = Vec::with_capacity(names.len());
    for name in &names {
        let idx = schema
            .index_of(name)
            .ok_or_else(|| Error::CapacityMismatch(format!("no capacity configured for site '{name}'")))?;
        columns.push(idx);
    }
    let capacities: Vec<f64> = columns.iter().map(|&i| schema.capacity(i)).collect();
    let sites = SiteSet::new(names.clone(), capacities.clone())?;

    let mut start: Option<DateTime<Utc>> = None;
    let mut last: Option<i64> = None;
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 2;
        let field = record.get(0).unwrap_or("");
        let stamp = parse_timestamp(field).ok_or_else(|| Error::MalformedTimestamp {
            row: row_no,
            value: field.to_owned(),
        })?;
        let origin = *start.get_or_insert(stamp);
        let offset = stamp - origin;
        let hours = offset.num_hours();
        if origin + Duration::hours(hours) != stamp {
            return Err(Error::OffGrid { row: row_no });
        }
        if let Some(prev) = last {
            if hours <= prev {
                return Err(Error::NonMonotoneTime { row: row_no });
            }
        }
        last = Some(hours);
        let hours = hours as usize;
        while rows.len() < hours {
            rows.push(vec![None; names.len()]);
        }
        let mut row = Vec::with_capacity(names.len());
        for (s, cap) in capacities.iter().enumerate() {
            let text = record.get(s + 1).unwrap_or("");
            if text.is_empty() {
                row.push(None);
                continue;
            }
            let raw: f64 = text.parse().map_err(|_| Error::MalformedValue {
                row: row_no,
                value: text.to_owned(),
            })?;
            let v = normalize(raw, *cap).map_err(|e| match e {
                Error::NegativePower { value, .. } => Error::NegativePower {
                    site: names[s].clone(),
                    row: row_no,
                    value,
                },
                Error::ExceedsCapacity { value, capacity, .. } => Error::ExceedsCapacity {
                    site: names[s].clone(),
                    row: row_no,
                    value,
                    capacity,
                },
                other => other,
            })?;
            row.push(Some(v));
        }
        rows.push(row);
    }
    let start = start.ok_or(Error::EmptySample)?;
    SpaceTimeSeries::new(sites, start, rows)
}

/// How values are written by [`write_series`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueScale {
    Normalized,
    Capacity,
}

pub fn write_series(path: impl AsRef<Path>, series: &SpaceTimeSeries, scale: ValueScale) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["timestamp".to_owned()];
    header.extend(series.sites().ids().iter().cloned());
    w.write_record(&header)?;
    for t in 0..series.len() {
        let mut rec = vec![format_timestamp(series.timestamp(t))];
        for s in 0..series.n_sites() {
            rec.push(match series.get(t, s) {
                Some(v) => match scale {
                    ValueScale::Normalized => v.to_string(),
                    ValueScale::Capacity => (v * series.sites().capacity(s)).to_string(),
                },
                None => String::new(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_panel(path: impl AsRef<Path>, panel: &Panel) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["timestamp".to_owned()];
    header.extend(panel.names.iter().cloned());
    w.write_record(&header)?;
    let m = panel.names.len();
    for t in 0..panel.len() {
        let mut rec = vec![format_timestamp(panel.start + Duration::hours(t as i64))];
        for s in 0..m {
            let v = panel.values[t * m + s];
            rec.push(if v.is_nan() { String::new() } else { v.to_string() });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a complete hourly panel written by [`write_panel`].
pub fn load_panel(path: impl AsRef<Path>) -> Result<Panel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let names: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_owned).collect();
    let mut start = None;
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("");
        let stamp = parse_timestamp(field).ok_or_else(|| Error::MalformedTimestamp {
            row: i + 2,
            value: field.to_owned(),
        })?;
        let origin = *start.get_or_insert(stamp);
        if stamp - origin != Duration::hours(i as i64) {
            return Err(Error::NonMonotoneTime { row: i + 2 });
        }
        for s in 0..names.len() {
            let text = rec.get(s + 1).unwrap_or("");
            values.push(if text.is_empty() {
                f64::NAN
            } else {
                text.parse().map_err(|_| Error::MalformedValue {
                    row: i + 2,
                    value: text.to_owned(),
                })?
            });
        }
    }
    Ok(Panel {
        names,
        start: start.ok_or(Error::EmptySample)?,
        values,
    })
}

/// Capacity-weighted grouping of original zones into aggregate zones.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneAggregation {
    /// `(original, aggregate)` pairs in original-site order.
    mapping: Vec<(String, String)>,
    /// Capacity share of each original zone within its aggregate.
    weights: BTreeMap<String, f64>,
    aggregates: Vec<String>,
    aggregate_capacity: BTreeMap<String, f64>,
}

impl ZoneAggregation {
    /// Derives weights from the capacities in `sites`. Every site must be
    /// mapped exactly once; aggregates are ordered by first appearance.
    pub fn new(mapping: Vec<(String, String)>, sites: &SiteSet) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (orig, _) in &mapping {
            if sites.index_of(orig).is_none() {
                return Err(Error::UnmappedZone(orig.clone()));
            }
            if !seen.insert(orig.clone()) {
                return Err(Error::InvalidArgument(format!("zone '{orig}' mapped twice")));
            }
        }
        if let Some(id) = sites.ids().iter().find(|id| !seen.contains(*id)) {
            return Err(Error::UnmappedZone(id.clone()));
        }
        let mut aggregates: Vec<String> = Vec::new();
        let mut totals: BTreeMap<String, f64> = BTreeMap::new();
        for (orig, agg) in &mapping {
            if !aggregates.contains(agg) {
                aggregates.push(agg.clone());
            }
            *totals.entry(agg.clone()).or_insert(0.0) += sites.capacity(sites.index_of(orig).unwrap());
        }
        let mut weights = BTreeMap::new();
        for (orig, agg) in &mapping {
            let cap = sites.capacity(sites.index_of(orig).unwrap());
            weights.insert(orig.clone(), cap / totals[agg]);
        }
        for agg in &aggregates {
            let sum: f64 = mapping.iter().filter(|(_, a)| a == agg).map(|(o, _)| weights[o]).sum();
            debug_assert!((sum - 1.0).abs() <= 1e-12);
        }
        Ok(Self {
            mapping,
            weights,
            aggregates,
            aggregate_capacity: totals,
        })
    }

    pub fn aggregates(&self) -> &[String] {
        &self.aggregates
    }

    pub fn weight(&self, original: &str) -> Option<f64> {
        self.weights.get(original).copied()
    }

    pub fn aggregate_of(&self, original: &str) -> Option<&str> {
        self.mapping
            .iter()
            .find(|(o, _)| o == original)
            .map(|(_, a)| a.as_str())
    }

    pub fn aggregate_capacity(&self, aggregate: &str) -> Option<f64> {
        self.aggregate_capacity.get(aggregate).copied()
    }

    /// The 15 Western Denmark control zones grouped into 5 aggregates.
    ///
    /// Per-zone capacities are illustrative (total 2475 MW) and reproduce the
    /// published aggregate shares of 31/18/17/23/10 % after rounding.
    pub fn western_denmark() -> (SiteSet, ZoneAggregation) {
        let groups: [(&str, &[(u32, f64)]); 5] = [
            ("agg1", &[(1, 260.0), (2, 260.0), (3, 255.0)]),
            ("agg2", &[(5, 150.0), (6, 150.0), (7, 150.0)]),
            ("agg3", &[(4, 145.0), (8, 140.0), (9, 140.0)]),
            ("agg4", &[(10, 145.0), (11, 145.0), (14, 145.0), (15, 140.0)]),
            ("agg5", &[(12, 125.0), (13, 125.0)]),
        ];
        let mut caps = BTreeMap::new();
        let mut mapping = Vec::new();
        for (agg, zones) in groups {
            for &(z, cap) in zones {
                caps.insert(z, cap);
                mapping.push((z.to_string(), agg.to_string()));
            }
        }
        let ids: Vec<String> = caps.keys().map(|z| z.to_string()).collect();
        let capacities: Vec<f64> = caps.values().copied().collect();
        let sites = SiteSet::new(ids, capacities).expect("static layout is valid");
        mapping.sort_by_key(|(o, _)| o.parse::<u32>().unwrap());
        let agg = ZoneAggregation::new(mapping, &sites).expect("static layout is valid");
        (sites, agg)
    }
}

/// Capacity-weighted mean of member zones per aggregate. A missing member
/// cell makes the aggregate cell missing.
pub fn aggregate(series: &SpaceTimeSeries, agg: &ZoneAggregation) -> Result<SpaceTimeSeries> {
    let sites = series.sites();
    for id in sites.ids() {
        if agg.aggregate_of(id).is_none() {
            return Err(Error::UnmappedZone(id.clone()));
        }
    }
    for (orig, _) in &agg.mapping {
        if sites.index_of(orig).is_none() {
            return Err(Error::UnmappedZone(orig.clone()));
        }
    }
    let members: Vec<Vec<(usize, f64)>> = agg
        .aggregates
        .iter()
        .map(|a| {
            agg.mapping
                .iter()
                .filter(|(_, g)| g == a)
                .map(|(o, _)| (sites.index_of(o).unwrap(), agg.weights[o]))
                .collect()
        })
        .collect();
    let capacities = agg.aggregates.iter().map(|a| agg.aggregate_capacity[a]).collect();
    let out_sites = SiteSet::new(agg.aggregates.clone(), capacities)?;
    let rows = (0..series.len())
        .map(|t| {
            members
                .iter()
                .map(|group| {
                    let mut acc = 0.0;
                    for &(s, w) in group {
                        acc += w * series.get(t, s)?;
                    }
                    Some(acc.clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect();
    SpaceTimeSeries::new(out_sites, series.start(), rows)
}

/// The `m x n` random variable over sites and leads, flattened site-major:
/// flat index `site * n + (lead - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateTarget {
    pub sites: SiteSet,
    pub leads: LeadTimeSet,
}

impl MultivariateTarget {
    pub fn new(sites: SiteSet, leads: LeadTimeSet) -> Self {
        Self { sites, leads }
    }

    pub fn dim(&self) -> usize {
        self.sites.len() * self.leads.len()
    }

    /// Flat index of `(site, lead)`, with `lead` 1-based.
    pub fn index(&self, site: usize, lead: usize) -> usize {
        debug_assert!(lead >= 1 && lead <= self.leads.len());
        site * self.leads.len() + (lead - 1)
    }

    /// Inverse of [`index`](Self::index).
    pub fn position(&self, flat: usize) -> (usize, usize) {
        let n = self.leads.len();
        (flat / n, flat % n + 1)
    }

    pub fn flatten(&self, matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.leads.len();
        if matrix.len() != self.sites.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sites.len(),
                got: matrix.len(),
            });
        }
        let mut out = Vec::with_capacity(self.dim());
        for row in matrix {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            out.extend_from_slice(row);
        }
        Ok(out)
    }

    pub fn unflatten(&self, flat: &[f64]) -> Result<Vec<Vec<f64>>> {
        if flat.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: flat.len(),
            });
        }
        Ok(flat.chunks(self.leads.len()).map(<[f64]>::to_vec).collect())
    }

    /// Observed values `y_{s,t+k}` for the window following `origin`
    /// (a time index into `series`).
    pub fn window(&self, series: &impl Observations, origin: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        for s in 0..self.sites.len() {
            for k in self.leads.horizons() {
                let t = origin + k;
                let v = if t < series.len() { series.value(t, s) } else { None };
                out.push(v.ok_or(Error::MissingCell { site: s, time: t })?);
            }
        }
        Ok(out)
    }
}
