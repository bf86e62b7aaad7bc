//! User–topic (`X`, n×k) and influence–topic (`Y`, k×n) matrices and the
//! bound matrices that define the feasible set `Q`.
//!
//! Both topic matrices are row-stochastic with entries in `[0, 1]`. The TSV
//! format stores one matrix row per line; the loader accepts row sums within
//! `1e-6` of one and renormalizes them.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::numeric::NeumaierSum;

/// Row sums must be within this of 1 for a strict topic matrix.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Looser tolerance accepted (then renormalized) when reading files.
pub const FILE_ROW_SUM_TOL: f64 = 1e-6;

fn row_sum(m: &DMatrix<f64>, i: usize) -> f64 {
    let mut acc = NeumaierSum::new();
    for j in 0..m.ncols() {
        acc.add(m[(i, j)]);
    }
    acc.value()
}

fn check_entries(m: &DMatrix<f64>, name: &str, upper_one: bool) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !(v >= 0.0) || !v.is_finite() || (upper_one && v > 1.0) {
                return Err(Error::Validation(format!(
                    "{name}[{i},{j}] = {v} is outside [0, 1]"
                )));
            }
        }
    }
    Ok(())
}

fn check_row_stochastic(m: &DMatrix<f64>, name: &str, tol: f64) -> Result<()> {
    check_entries(m, name, true)?;
    for i in 0..m.nrows() {
        let s = row_sum(m, i);
        if (s - 1.0).abs() > tol {
            return Err(Error::Validation(format!(
                "{name} row {i} sums to {s}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Rows already summing to 1 up to rounding are left untouched so that a
/// written matrix reads back bit-for-bit.
fn renormalize_rows(m: &mut DMatrix<f64>) {
    let rounding = 4.0 * f64::EPSILON * m.ncols().max(1) as f64;
    for i in 0..m.nrows() {
        let s = row_sum(m, i);
        if (s - 1.0).abs() <= rounding {
            continue;
        }
        for j in 0..m.ncols() {
            m[(i, j)] /= s;
        }
    }
}

fn read_tsv<R: BufRead>(reader: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let row = content
            .split('\t')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("bad entry `{f}`: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn write_tsv<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:.16e}", m[(i, j)]))
            .collect();
        writeln!(out, "{}", line.join("\t"))?;
    }
    Ok(())
}

/// User–topic matrix `X` (n×k).
///
/// Constructed either strictly (row-stochastic) or relaxed (nonnegative
/// only). The objective and its gradient are defined for any nonnegative
/// `X`; the optimizers require the strict form.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicMatrixX {
    entries: DMatrix<f64>,
    row_stochastic: bool,
}

impl TopicMatrixX {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_row_stochastic(&entries, "X", ROW_SUM_TOL)?;
        Ok(Self {
            entries,
            row_stochastic: true,
        })
    }

    /// Nonnegative entries only; rows need not sum to one.
    pub fn relaxed(entries: DMatrix<f64>) -> Result<Self> {
        check_entries(&entries, "X", false)?;
        Ok(Self {
            entries,
            row_stochastic: false,
        })
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut m = read_tsv(reader)?;
        check_row_stochastic(&m, "X", FILE_ROW_SUM_TOL)?;
        renormalize_rows(&mut m);
        Self::new(m)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        write_tsv(&self.entries, out)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_row_stochastic(&self) -> bool {
        self.row_stochastic
    }

    /// Number of users.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of topics.
    pub fn k(&self) -> usize {
        self.entries.ncols()
    }
}

/// Influence–topic matrix `Y` (k×n).
#[derive(Clone, Debug, PartialEq)]
pub struct TopicMatrixY {
    entries: DMatrix<f64>,
}

impl TopicMatrixY {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_row_stochastic(&entries, "Y", ROW_SUM_TOL)?;
        Ok(Self { entries })
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut m = read_tsv(reader)?;
        check_row_stochastic(&m, "Y", FILE_ROW_SUM_TOL)?;
        renormalize_rows(&mut m);
        Self::new(m)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        write_tsv(&self.entries, out)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    /// `Y v`, length k.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.nrows()];
        for (u, &vu) in v.iter().enumerate().take(self.entries.ncols()) {
            if vu != 0.0 {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += self.entries[(j, u)] * vu;
                }
            }
        }
        out
    }

    /// `Yᵀ c`, length n.
    pub fn apply_t(&self, c: &[f64]) -> Vec<f64> {
        let (k, n) = self.entries.shape();
        (0..n)
            .map(|u| (0..k).map(|j| self.entries[(j, u)] * c[j]).sum())
            .collect()
    }

    /// Influence score `Σ_j Y_ju` per user.
    pub fn influence_scores(&self) -> Vec<f64> {
        (0..self.n())
            .map(|u| self.entries.column(u).iter().sum())
            .collect()
    }
}

/// Entry-wise bounds `X^(L) ≤ X ≤ X^(U)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    lower: DMatrix<f64>,
    upper: DMatrix<f64>,
}

impl Bounds {
    pub fn new(lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        if lower.shape() != upper.shape() {
            return Err(Error::Validation(format!(
                "bound shapes differ: {:?} vs {:?}",
                lower.shape(),
                upper.shape()
            )));
        }
        for i in 0..lower.nrows() {
            let mut lo_sum = NeumaierSum::new();
            let mut hi_sum = NeumaierSum::new();
            for j in 0..lower.ncols() {
                let (l, u) = (lower[(i, j)], upper[(i, j)]);
                if !(0.0 <= l && l <= u && u <= 1.0) {
                    return Err(Error::Infeasible {
                        row: i,
                        message: format!("column {j}: need 0 <= {l} <= {u} <= 1"),
                    });
                }
                lo_sum.add(l);
                hi_sum.add(u);
            }
            if lo_sum.value() > 1.0 + ROW_SUM_TOL || hi_sum.value() < 1.0 - ROW_SUM_TOL {
                return Err(Error::Infeasible {
                    row: i,
                    message: format!(
                        "bound sums [{}, {}] exclude 1",
                        lo_sum.value(),
                        hi_sum.value()
                    ),
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// `X^(U) = min(1, X + θ)`, `X^(L) = max(0, X − θ)`, with `frozen`
    /// columns pinned to `X`.
    pub fn from_theta(x: &TopicMatrixX, theta: f64, frozen: &[usize]) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Validation(format!(
                "theta must lie in [0, 1], got {theta}"
            )));
        }
        let m = x.matrix();
        if let Some(&j) = frozen.iter().find(|&&j| j >= m.ncols()) {
            return Err(Error::Validation(format!(
                "frozen topic {j} out of range 0..{}",
                m.ncols()
            )));
        }
        let mut lower = m.map(|v| (v - theta).max(0.0));
        let mut upper = m.map(|v| (v + theta).min(1.0));
        for &j in frozen {
            lower.set_column(j, &m.column(j));
            upper.set_column(j, &m.column(j));
        }
        Self::new(lower, upper)
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DMatrix<f64> {
        &self.upper
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lower.shape()
    }

    /// True when every row of `x` sums to 1 within `ROW_SUM_TOL` and lies
    /// within the bounds up to `slack`.
    pub fn contains(&self, x: &DMatrix<f64>, slack: f64) -> bool {
        self.violation(x, slack).is_none()
    }

    /// First row that is infeasible, with a description.
    pub fn violation(&self, x: &DMatrix<f64>, slack: f64) -> Option<(usize, String)> {
        if x.shape() != self.shape() {
            return Some((
                0,
                format!("shape {:?} vs bounds {:?}", x.shape(), self.shape()),
            ));
        }
        for i in 0..x.nrows() {
            let s = row_sum(x, i);
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Some((i, format!("row sums to {s}")));
            }
            for j in 0..x.ncols() {
                let v = x[(i, j)];
                if v < self.lower[(i, j)] - slack || v > self.upper[(i, j)] + slack {
                    return Some((
                        i,
                        format!(
                            "entry {j} = {v} outside [{}, {}]",
                            self.lower[(i, j)],
                            self.upper[(i, j)]
                        ),
                    ));
                }
            }
        }
        None
    }

    pub(crate) fn require_shape(&self, n: usize, k: usize) -> Result<()> {
        check_len("bounds rows", n, self.lower.nrows())?;
        check_len("bounds columns", k, self.lower.ncols())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x22() -> TopicMatrixX {
        TopicMatrixX::new(DMatrix::from_row_slice(2, 2, &[0.95, 0.05, 0.5, 0.5])).unwrap()
    }

    #[test]
    fn strict_and_relaxed_construction() {
        assert!(TopicMatrixX::new(DMatrix::from_row_slice(1, 2, &[0.5, 0.6])).is_err());
        assert!(TopicMatrixX::new(DMatrix::from_row_slice(1, 2, &[-0.1, 1.1])).is_err());
        let relaxed = TopicMatrixX::relaxed(DMatrix::from_row_slice(1, 2, &[0.5, 0.6])).unwrap();
        assert!(!relaxed.is_row_stochastic());
        assert!(TopicMatrixX::relaxed(DMatrix::from_row_slice(1, 1, &[-1.0])).is_err());
    }

    #[test]
    fn tsv_reader_renormalizes_within_tolerance() {
        let x = TopicMatrixX::read("0.3\t0.7000004\n1\t0\n".as_bytes()).unwrap();
        assert!((x.matrix().row(0).sum() - 1.0).abs() < 1e-15);
        assert!(x.matrix()[(0, 0)] < 0.3);
        assert!(TopicMatrixX::read("0.3\t0.71\n".as_bytes()).is_err());
        assert!(matches!(
            TopicMatrixY::read("0.5\t0.5\n1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let mut buf = Vec::new();
        x.write(&mut buf).unwrap();
        assert_eq!(TopicMatrixX::read(buf.as_slice()).unwrap(), x);
    }

    #[test]
    fn theta_bounds() {
        let x = x22();
        let b0 = Bounds::from_theta(&x, 0.0, &[]).unwrap();
        assert_eq!(b0.lower(), x.matrix());
        assert_eq!(b0.upper(), x.matrix());
        let b = Bounds::from_theta(&x, 0.1, &[]).unwrap();
        assert_eq!(b.upper()[(0, 0)], 1.0);
        assert!((b.lower()[(0, 0)] - 0.85).abs() < 1e-15);
        let b1 = Bounds::from_theta(&x, 1.0, &[]).unwrap();
        assert!(b1.lower().iter().all(|&v| v == 0.0));
        assert!(b1.upper().iter().all(|&v| v == 1.0));
        assert!(Bounds::from_theta(&x, 1.5, &[]).is_err());
        assert!(Bounds::from_theta(&x, -0.1, &[]).is_err());
    }

    #[test]
    fn frozen_columns_are_pinned() {
        let x = x22();
        let b = Bounds::from_theta(&x, 0.2, &[1]).unwrap();
        assert_eq!(b.lower().column(1), x.matrix().column(1));
        assert_eq!(b.upper().column(1), x.matrix().column(1));
        assert!(Bounds::from_theta(&x, 0.2, &[2]).is_err());
    }

    #[test]
    fn infeasible_bounds_rejected() {
        let lo = DMatrix::from_row_slice(1, 2, &[0.6, 0.6]);
        let hi = DMatrix::from_row_slice(1, 2, &[0.7, 0.7]);
        assert!(matches!(
            Bounds::new(lo, hi),
            Err(Error::Infeasible { row: 0, .. })
        ));
    }

    #[test]
    fn y_products() {
        let y = TopicMatrixY::new(DMatrix::from_row_slice(
            2,
            3,
            &[0.5, 0.5, 0.0, 0.0, 0.25, 0.75],
        ))
        .unwrap();
        assert_eq!(y.apply(&[1.0, 2.0, 4.0]), vec![1.5, 3.5]);
        assert_eq!(y.apply_t(&[2.0, 4.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(y.influence_scores(), vec![0.5, 0.75, 0.75]);
    }
}
