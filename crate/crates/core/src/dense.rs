//! Dense reference paths. Used for oracle checks and small instances only.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Dense `L = D − A`.
pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for (u, v, w) in g.edges() {
        l[(u, v)] -= w;
        l[(v, u)] -= w;
        l[(u, u)] += w;
        l[(v, v)] += w;
    }
    l
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
pub fn solve_spd(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let chol = a.cholesky().ok_or_else(|| {
        Error::Validation("dense system is not numerically positive definite".into())
    })?;
    Ok(chol
        .solve(&DVector::from_column_slice(b))
        .as_slice()
        .to_vec())
}

pub(crate) fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::DenseCap { n, cap })
    } else {
        Ok(())
    }
}
