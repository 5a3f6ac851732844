use crate::error::{Error, Result};

/// Lower bound on tracked variances.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Exponentially smoothed forecast-error variance per (site, lead) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTracker {
    lambda: f64,
    values: Vec<f64>,
}

impl VarianceTracker {
    /// `cells` variances all starting at `initial`.
    pub fn new(lambda: f64, cells: usize, initial: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::OutOfRange {
                name: "variance smoothing",
                value: lambda,
                expected: "(0, 1]",
            });
        }
        Ok(Self {
            lambda,
            values: vec![initial.max(VARIANCE_FLOOR); cells],
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn variance(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn set(&mut self, cell: usize, variance: f64) {
        self.values[cell] = variance.max(VARIANCE_FLOOR);
    }

    /// `σ² ← λ σ² + (1 - λ) e²`.
    pub fn update(&mut self, cell: usize, error: f64) {
        let v = self.lambda * self.values[cell] + (1.0 - self.lambda) * error * error;
        self.values[cell] = v.max(VARIANCE_FLOOR);
    }
}
