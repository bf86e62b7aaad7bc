//! Euclidean projection onto `{x : Σx = 1, l ≤ x ≤ u}`, one row at a time.
//!
//! The projection is `x(μ*)` with `x_i(μ) = clamp(v_i − μ, l_i, u_i)`, where
//! `μ*` solves `Σ x(μ) = 1`. The sum is piecewise linear and nonincreasing
//! in `μ` with breakpoints `v_i − u_i` and `v_i − l_i`; sorting them locates
//! the active segment, and `μ*` is found by linear interpolation on it.
//!
//! For the indicator of a convex set the proximal map and the orthogonal
//! projection are the same operator, so this also serves as the prox step.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::numeric::NeumaierSum;
use crate::topics::Bounds;

/// Slack allowed on `Σl ≤ 1 ≤ Σu`.
const FEASIBILITY_TOL: f64 = 1e-12;

fn clamped_sum(v: &[f64], l: &[f64], u: &[f64], mu: f64) -> f64 {
    let mut acc = NeumaierSum::new();
    for i in 0..v.len() {
        acc.add((v[i] - mu).clamp(l[i], u[i]));
    }
    acc.value()
}

fn check_row(v: &[f64], l: &[f64], u: &[f64]) -> Result<()> {
    check_len("projection lower", v.len(), l.len())?;
    check_len("projection upper", v.len(), u.len())?;
    let mut lo = NeumaierSum::new();
    let mut hi = NeumaierSum::new();
    for i in 0..v.len() {
        if !v[i].is_finite() {
            return Err(Error::Validation(format!("entry {i} is not finite")));
        }
        if !(l[i] <= u[i]) {
            return Err(Error::Validation(format!(
                "entry {i}: lower {} exceeds upper {}",
                l[i], u[i]
            )));
        }
        lo.add(l[i]);
        hi.add(u[i]);
    }
    if lo.value() > 1.0 + FEASIBILITY_TOL || hi.value() < 1.0 - FEASIBILITY_TOL {
        return Err(Error::Validation(format!(
            "bounds sum to [{}, {}], which excludes 1",
            lo.value(),
            hi.value()
        )));
    }
    Ok(())
}

/// Projects `v` onto `{x : Σx = 1, l ≤ x ≤ u}`.
pub fn project_row(v: &[f64], l: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_row(v, l, u)?;
    let k = v.len();
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * k);
    for i in 0..k {
        breaks.push(v[i] - u[i]);
        breaks.push(v[i] - l[i]);
    }
    breaks.sort_by(f64::total_cmp);

    // g(μ) is Σu left of the first breakpoint and Σl right of the last.
    // Find the first breakpoint with g ≤ 1; μ* lies on the segment ending there.
    let values: Vec<f64> = breaks.iter().map(|&b| clamped_sum(v, l, u, b)).collect();
    let idx = values.iter().position(|&g| g <= 1.0);
    let mu = match idx {
        // g(first) ≤ 1 means Σu ≤ 1, so Σu = 1 up to tolerance: everything at upper
        Some(0) => breaks[0],
        Some(j) => {
            let (b0, b1) = (breaks[j - 1], breaks[j]);
            let (g0, g1) = (values[j - 1], values[j]);
            if g0 == g1 || b0 == b1 {
                b1
            } else {
                let t = (g0 - 1.0) / (g0 - g1);
                b0 + t * (b1 - b0)
            }
        }
        // only reachable through rounding when Σl is 1 up to tolerance
        None => breaks[2 * k - 1],
    };
    Ok((0..k).map(|i| (v[i] - mu).clamp(l[i], u[i])).collect())
}

/// Row-wise projection of `v` onto the feasible set of `bounds`.
pub fn project_matrix(v: &DMatrix<f64>, bounds: &Bounds) -> Result<DMatrix<f64>> {
    let (n, k) = v.shape();
    bounds.require_shape(n, k)?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = v.row(i).iter().copied().collect();
            let l: Vec<f64> = bounds.lower().row(i).iter().copied().collect();
            let u: Vec<f64> = bounds.upper().row(i).iter().copied().collect();
            project_row(&row, &l, &u).map_err(|e| Error::Infeasible {
                row: i,
                message: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}
