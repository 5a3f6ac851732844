//! Predictive quantiles by dressing point forecasts with empirical error
//! quantiles, conditioned on forecast level and lead time.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sort_f64};

use super::quantiles::QuantileSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressingOptions {
    /// Equal-width forecast-level bins on `[0, 1]`.
    pub level_bins: usize,
    /// Width of the lead-time buckets in hours.
    pub lead_bucket_hours: usize,
    /// Bins with fewer errors fall back to the whole lead bucket.
    pub min_errors: usize,
}

impl Default for DressingOptions {
    fn default() -> Self {
        Self {
            level_bins: 5,
            lead_bucket_hours: 6,
            min_errors: 200,
        }
    }
}

/// Sorted forecast errors `y - ŷ` grouped by lead bucket and level bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorClimatology {
    options: DressingOptions,
    binned: BTreeMap<(usize, usize), Vec<f64>>,
    by_bucket: BTreeMap<usize, Vec<f64>>,
}

impl ErrorClimatology {
    /// Builds the climatology from `(lead, point, observed)` records.
    pub fn build(records: impl IntoIterator<Item = (usize, f64, f64)>, options: DressingOptions) -> Result<Self> {
        if options.level_bins == 0 || options.lead_bucket_hours == 0 {
            return Err(Error::InvalidArgument("dressing bins must be positive".into()));
        }
        let mut clim = Self {
            options,
            binned: BTreeMap::new(),
            by_bucket: BTreeMap::new(),
        };
        for (lead, point, observed) in records {
            let key = clim.key(lead, point);
            let e = observed - point;
            clim.binned.entry(key).or_default().push(e);
            clim.by_bucket.entry(key.0).or_default().push(e);
        }
        if clim.by_bucket.is_empty() {
            return Err(Error::EmptySample);
        }
        for v in clim.binned.values_mut().chain(clim.by_bucket.values_mut()) {
            sort_f64(v);
        }
        Ok(clim)
    }

    pub fn options(&self) -> DressingOptions {
        self.options
    }

    fn key(&self, lead: usize, point: f64) -> (usize, usize) {
        let bucket = lead.saturating_sub(1) / self.options.lead_bucket_hours;
        let bins = self.options.level_bins;
        let bin = ((point.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        (bucket, bin)
    }

    /// Errors for `(lead, point)` and whether the lead-bucket fallback was
    /// used.
    pub fn errors_for(&self, lead: usize, point: f64) -> Result<(&[f64], bool)> {
        let key = self.key(lead, point);
        if let Some(e) = self.binned.get(&key) {
            if e.len() >= self.options.min_errors {
                return Ok((e, false));
            }
        }
        match self.by_bucket.get(&key.0) {
            Some(e) if !e.is_empty() => Ok((e, true)),
            _ => Err(Error::EmptySample),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dressed {
    pub quantiles: QuantileSet,
    /// True when the level bin was too sparse and the lead bucket was used.
    pub fallback: bool,
}

/// `ŷ` plus the matching error quantiles, clipped to `[0, 1]` and
/// rearranged.
pub fn dress_point_forecast(
    point: f64,
    lead: usize,
    climatology: &ErrorClimatology,
    levels: &[f64],
) -> Result<Dressed> {
    if !(0.0..=1.0).contains(&point) {
        return Err(Error::OutOfRange {
            name: "point forecast",
            value: point,
            expected: "[0, 1]",
        });
    }
    let (errors, fallback) = climatology.errors_for(lead, point)?;
    let values = levels.iter().map(|&a| point + quantile_sorted(errors, a)).collect();
    Ok(Dressed {
        quantiles: QuantileSet::new(levels.to_vec(), values)?,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

    #[test]
    fn zero_errors_give_the_point() {
        let clim = ErrorClimatology::build((0..300).map(|_| (3, 0.4, 0.4)), DressingOptions::default()).unwrap();
        let d = dress_point_forecast(0.4, 3, &clim, &LEVELS).unwrap();
        assert!(d.quantiles.values().iter().all(|v| *v == 0.4));
        assert!(!d.fallback);
    }

    #[test]
    fn symmetric_errors_keep_the_median() {
        let records = (0..400).map(|i| {
            let e = if i % 2 == 0 { 0.05 } else { -0.05 } * (1 + i % 7) as f64 / 7.0;
            (10, 0.5, 0.5 + e)
        });
        let clim = ErrorClimatology::build(records, DressingOptions::default()).unwrap();
        let d = dress_point_forecast(0.5, 10, &clim, &LEVELS).unwrap();
        assert!((d.quantiles.values()[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sparse_bin_falls_back_to_lead_bucket() {
        let mut records: Vec<_> = (0..300).map(|_| (2, 0.1, 0.15)).collect();
        records.extend((0..10).map(|_| (2, 0.9, 0.7)));
        let clim = ErrorClimatology::build(records, DressingOptions::default()).unwrap();
        let d = dress_point_forecast(0.9, 2, &clim, &LEVELS).unwrap();
        assert!(d.fallback);
        assert!(matches!(
            dress_point_forecast(0.5, 30, &clim, &LEVELS),
            Err(Error::EmptySample)
        ));
    }
}
