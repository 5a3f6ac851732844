//! Recursive least squares with exponential forgetting for linear models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{dot, NormalEquations};

use super::linear::{LinearModel, LinearSpec, RegimeFit};
use super::Inputs;

/// Result of [`fit_recursive`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveFit {
    /// Model holding the final parameters.
    pub model: LinearModel,
    /// `(origin t, regime, coefficients after the update at t)` for every
    /// row past the initial window.
    pub path: Vec<(usize, usize, Vec<f64>)>,
}

struct State {
    theta: DVector<f64>,
    p: DMatrix<f64>,
}

/// Fits `spec` by batch OLS on the first `initial_window` rows of each
/// regime, then updates recursively with forgetting factor `forgetting`.
/// With `forgetting = 1` the final parameters equal batch OLS on all rows.
pub fn fit_recursive(
    spec: &LinearSpec,
    inputs: &Inputs,
    forgetting: f64,
    initial_window: usize,
) -> Result<RecursiveFit> {
    if !(forgetting > 0.9 && forgetting <= 1.0) {
        return Err(Error::OutOfRange {
            name: "forgetting factor",
            value: forgetting,
            expected: "(0.9, 1]",
        });
    }
    spec.validate(inputs.target.n_sites())?;
    let k = spec.n_params();
    if initial_window < k {
        return Err(Error::TooFewRows {
            needed: k,
            got: initial_window,
        });
    }
    let rows = spec.rows(inputs);
    let regimes = spec.n_regimes();

    let mut states = Vec::with_capacity(regimes);
    let mut seen = vec![0usize; regimes];
    let mut start_of = vec![0usize; regimes];
    for r in 0..regimes {
        let mut ne = NormalEquations::new(k);
        let mut used = 0;
        for (i, row) in rows.iter().enumerate() {
            if row.1 != r {
                continue;
            }
            if used == initial_window {
                start_of[r] = i;
                break;
            }
            ne.add(&row.2, row.3, 1.0);
            used += 1;
            start_of[r] = i + 1;
        }
        if used < initial_window {
            return Err(Error::TooFewRows {
                needed: initial_window,
                got: used,
            });
        }
        let theta = DVector::from_vec(ne.solve()?);
        let p = ne.matrix().cholesky().ok_or(Error::RankDeficient)?.inverse();
        states.push(State { theta, p });
        seen[r] = used;
    }

    let mut path = Vec::new();
    for (i, (t, r, x, y)) in rows.iter().enumerate() {
        if i < start_of[*r] {
            continue;
        }
        let s = &mut states[*r];
        let xv = DVector::from_column_slice(x);
        let px = &s.p * &xv;
        let denom = forgetting + xv.dot(&px);
        let gain = &px / denom;
        let err = y - s.theta.dot(&xv);
        s.theta += &gain * err;
        s.p = (&s.p - &gain * px.transpose()) / forgetting;
        // Keep P symmetric against rounding drift.
        s.p = (&s.p + s.p.transpose()) * 0.5;
        seen[*r] += 1;
        path.push((*t, *r, s.theta.as_slice().to_vec()));
    }

    let mut fits = Vec::with_capacity(regimes);
    let mut sse_total = 0.0;
    for (r, s) in states.iter().enumerate() {
        let theta = s.theta.as_slice().to_vec();
        let sse: f64 = rows
            .iter()
            .filter(|row| row.1 == r)
            .map(|row| (row.3 - dot(&theta, &row.2)).powi(2))
            .sum();
        sse_total += sse;
        let dof = seen[r].saturating_sub(k).max(1);
        fits.push(RegimeFit {
            theta,
            sigma: (sse / dof as f64).sqrt(),
            rows: seen[r],
        });
    }
    Ok(RecursiveFit {
        model: LinearModel {
            spec: spec.clone(),
            regimes: fits,
            in_sample_rmse: (sse_total / rows.len().max(1) as f64).sqrt(),
        },
        path,
    })
}
