//! Friedkin–Johnsen dynamics on the original graph.
//!
//! Expressed opinions evolve as
//! `z_i ← (s_i + Σ_j w_ij z_j) / (1 + Σ_j w_ij)` and converge to
//! `z = (I + L)⁻¹ s`. At equilibrium the polarization `Σ z_i²` plus the
//! disagreement `Σ_{(i,j)∈E} w_ij (z_i − z_j)²` equals `sᵀ z`.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::graph::Graph;
use crate::numeric::{dot, max_abs, norm2, sum};
use crate::solver::{solve, SpdOperator};

const RANGE_SLACK: f64 = 1e-12;

/// Opinions in `[-1, 1]`, index-aligned with the graph's vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct OpinionVector {
    values: Vec<f64>,
    centered: bool,
}

impl OpinionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= 1.0 + RANGE_SLACK))
        {
            return Err(Error::Validation(format!(
                "opinion {i} = {v} lies outside [-1, 1]"
            )));
        }
        let centered = sum(&values).abs() <= 1e-9 * values.len() as f64;
        Ok(Self { values, centered })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            centered: true,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `|Σ s_i| ≤ 1e-9 n`.
    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }

    /// One decimal per line; blank lines and `#` comments are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut values = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let v = content.parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad opinion `{content}`: {e}"),
            })?;
            values.push(v);
        }
        Self::new(values)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for v in &self.values {
            writeln!(out, "{v:.16e}")?;
        }
        Ok(())
    }
}

/// One synchronous update of every expressed opinion.
pub fn fj_step(g: &Graph, s: &OpinionVector, z: &[f64]) -> Result<Vec<f64>> {
    check_len("fj_step innate", g.n(), s.len())?;
    check_len("fj_step expressed", g.n(), z.len())?;
    Ok((0..g.n())
        .map(|i| {
            let mut num = s.values[i];
            let mut den = 1.0;
            for (j, w) in g.neighbors(i) {
                num += w * z[j];
                den += w;
            }
            num / den
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EquilibriumMode {
    /// Iterative solve at `eps = 1e-12 · max(1, ‖s‖₂)`.
    #[default]
    Solver,
    /// Dense Cholesky, limited to `n ≤ DENSE_EQUILIBRIUM_CAP`.
    Dense,
}

pub const DENSE_EQUILIBRIUM_CAP: usize = 2000;

/// `(I + L)⁻¹ s`.
pub fn equilibrium(g: &Graph, s: &OpinionVector, mode: EquilibriumMode) -> Result<Vec<f64>> {
    g.require_connected()?;
    check_len("equilibrium", g.n(), s.len())?;
    match mode {
        EquilibriumMode::Solver => {
            let op = SpdOperator::identity_plus_laplacian(g);
            solve(&op, s.as_slice(), 1e-12 * s.norm().max(1.0))
        }
        EquilibriumMode::Dense => {
            dense::check_cap(g.n(), DENSE_EQUILIBRIUM_CAP)?;
            let mut m = dense::laplacian(g);
            for i in 0..g.n() {
                m[(i, i)] += 1.0;
            }
            dense::solve_spd(m, s.as_slice())
        }
    }
}

pub fn equilibrium_exact(g: &Graph, s: &OpinionVector) -> Result<Vec<f64>> {
    equilibrium(g, s, EquilibriumMode::Solver)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Indices {
    pub polarization: f64,
    pub disagreement: f64,
    pub index: f64,
}

/// Polarization, disagreement and their sum for an equilibrium `z`.
///
/// Fails when `P + D` and `sᵀ z` disagree by more than `1e-8 (1 + |I|)`,
/// which means `z` is not the equilibrium for `s`.
pub fn indices(g: &Graph, s: &OpinionVector, z: &[f64]) -> Result<Indices> {
    check_len("indices innate", g.n(), s.len())?;
    check_len("indices expressed", g.n(), z.len())?;
    let polarization = dot(z, z);
    let disagreement = g.laplacian_quadratic_form(z)?;
    let index = polarization + disagreement;
    let st_z = dot(s.as_slice(), z);
    if (index - st_z).abs() > 1e-8 * (1.0 + index.abs()) {
        return Err(Error::Validation(format!(
            "P + D = {index} but s^T z = {st_z}; z is not the equilibrium for s"
        )));
    }
    Ok(Indices {
        polarization,
        disagreement,
        index,
    })
}

/// Subtracts the mean, then divides by the largest magnitude.
pub fn mean_center_rescale(raw: &[f64]) -> Result<OpinionVector> {
    if raw.is_empty() {
        return Err(Error::Validation("cannot normalize an empty vector".into()));
    }
    let mean = sum(raw) / raw.len() as f64;
    let centered: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let scale = max_abs(&centered);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Validation(
            "vector is constant (or not finite) and cannot be rescaled".into(),
        ));
    }
    let values: Vec<f64> = centered
        .iter()
        .map(|v| (v / scale).clamp(-1.0, 1.0))
        .collect();
    let centered_flag = sum(&values).abs() <= 1e-9 * values.len() as f64;
    Ok(OpinionVector {
        values,
        centered: centered_flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i, 1.0)))
            .unwrap()
            .0
    }

    fn ov(v: &[f64]) -> OpinionVector {
        OpinionVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_step_on_two_nodes() {
        let g = path(2);
        let s = ov(&[1.0, -1.0]);
        assert_eq!(fj_step(&g, &s, s.as_slice()).unwrap(), vec![0.0, 0.0]);
        let zero = OpinionVector::zeros(2);
        assert_eq!(fj_step(&g, &zero, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn iteration_reaches_path_equilibrium() {
        let g = path(3);
        let s = ov(&[1.0, 0.0, -1.0]);
        let mut z = s.as_slice().to_vec();
        for _ in 0..10_000 {
            z = fj_step(&g, &s, &z).unwrap();
        }
        for (a, b) in z.iter().zip([0.5, 0.0, -0.5]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn equilibrium_small_cases() {
        let z = equilibrium_exact(&path(2), &ov(&[1.0, -1.0])).unwrap();
        assert!((z[0] - 1.0 / 3.0).abs() < 1e-12 && (z[1] + 1.0 / 3.0).abs() < 1e-12);
        for mode in [EquilibriumMode::Solver, EquilibriumMode::Dense] {
            let z = equilibrium(&path(3), &ov(&[1.0, 0.0, -1.0]), mode).unwrap();
            for (a, b) in z.iter().zip([0.5, 0.0, -0.5]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let z = equilibrium_exact(&path(4), &OpinionVector::zeros(4)).unwrap();
        assert_eq!(z, vec![0.0; 4]);
    }

    #[test]
    fn equilibrium_rejects_disconnected() {
        let (g, _) = Graph::from_edges(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(
            equilibrium_exact(&g, &OpinionVector::zeros(4)),
            Err(Error::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn indices_two_nodes() {
        let g = path(2);
        let s = ov(&[1.0, -1.0]);
        let z = equilibrium_exact(&g, &s).unwrap();
        let idx = indices(&g, &s, &z).unwrap();
        assert!((idx.polarization - 2.0 / 9.0).abs() < 1e-12);
        assert!((idx.disagreement - 4.0 / 9.0).abs() < 1e-12);
        assert!((idx.index - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn indices_three_nodes_and_zero() {
        let g = path(3);
        let s = ov(&[1.0, 0.0, -1.0]);
        let z = equilibrium_exact(&g, &s).unwrap();
        assert!((indices(&g, &s, &z).unwrap().index - 1.0).abs() < 1e-12);
        let zero = OpinionVector::zeros(3);
        let idx = indices(&g, &zero, &[0.0; 3]).unwrap();
        assert_eq!(
            (idx.polarization, idx.disagreement, idx.index),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn indices_flag_non_equilibrium() {
        let g = path(2);
        let s = ov(&[1.0, -1.0]);
        assert!(indices(&g, &s, s.as_slice()).is_err());
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(
            mean_center_rescale(&[0.0, 2.0]).unwrap().as_slice(),
            &[-1.0, 1.0]
        );
        assert_eq!(
            mean_center_rescale(&[1.0, 1.0, 4.0]).unwrap().as_slice(),
            &[-0.5, -0.5, 1.0]
        );
        let s = mean_center_rescale(&[-0.5, -0.5, 1.0]).unwrap();
        assert_eq!(s.as_slice(), &[-0.5, -0.5, 1.0]);
        assert!(s.is_centered());
        assert!(mean_center_rescale(&[3.0, 3.0]).is_err());
        assert!(mean_center_rescale(&[]).is_err());
    }

    #[test]
    fn opinion_range_and_file_format() {
        assert!(OpinionVector::new(vec![1.5]).is_err());
        assert!(OpinionVector::new(vec![f64::NAN]).is_err());
        let s = ov(&[0.25, -1.0, 0.75]);
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        assert_eq!(OpinionVector::read(buf.as_slice()).unwrap(), s);
        assert!(matches!(
            OpinionVector::read("0.1\nabc\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
