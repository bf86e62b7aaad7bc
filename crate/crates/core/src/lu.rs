//! Partial-pivot LU for the small dense capacitance systems of the Woodbury path.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Pivots with magnitude below this are treated as singular.
pub const PIVOT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(mut a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        check_len("LU factorization (square)", n, a.ncols())?;
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_abs = a[(col, col)].abs();
            for row in col + 1..n {
                let v = a[(row, col)].abs();
                if v > pivot_abs {
                    pivot_abs = v;
                    pivot_row = row;
                }
            }
            if !(pivot_abs >= PIVOT_FLOOR) {
                return Err(Error::Conditioning { pivot: pivot_abs });
            }
            if pivot_row != col {
                a.swap_rows(col, pivot_row);
                perm.swap(col, pivot_row);
            }
            let pivot = a[(col, col)];
            for row in col + 1..n {
                let factor = a[(row, col)] / pivot;
                a[(row, col)] = factor;
                if factor != 0.0 {
                    for c in col + 1..n {
                        let upd = factor * a[(col, c)];
                        a[(row, c)] -= upd;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        check_len("LU solve", n, b.len())?;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let acc: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= acc;
        }
        for i in (0..n).rev() {
            let acc: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - acc) / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Explicit inverse, column by column.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e).expect("dimension checked");
            inv.set_column(c, &nalgebra::DVector::from_vec(col));
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let lu = LuFactor::new(a.clone()).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]).unwrap();
        let back = &a * nalgebra::DVector::from_vec(x);
        for (got, want) in back.iter().zip([3.0, 2.0, 4.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let prod = &a * lu.inverse();
        assert!((prod - DMatrix::identity(3, 3)).abs().max() < 1e-14);
    }

    #[test]
    fn singular_is_conditioning_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(LuFactor::new(a), Err(Error::Conditioning { .. })));
    }
}
