//! The timeline-augmented model.
//!
//! The timeline algorithm adds the low-rank adjacency
//! `A_X = (C W / 2n) (X Y + Yᵀ Xᵀ)` to the follow graph. Expressed opinions
//! become `z_X = (I + L + L_X)⁻¹ s` with `L_X = diag(A_X 1) − A_X`. Writing
//! `M = I + L + diag(A_X 1)`, `U = (X  Yᵀ)` (n×2k) and `V = (Y; Xᵀ)` (2k×n),
//! the Woodbury identity gives
//!
//! ```text
//! z_X = M⁻¹ s + c M⁻¹ U (I − c V M⁻¹ U)⁻¹ V M⁻¹ s,   c = C W / 2n
//! ```
//!
//! so `z_X` needs `2k + 2` sparse solves with `M` and one `2k × 2k` dense
//! solve; `A_X` itself is never formed.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::fj::OpinionVector;
use crate::graph::Graph;
use crate::lu::LuFactor;
use crate::numeric::{dot, power_norm, NeumaierSum};
use crate::solver::{solve, SpdOperator};
use crate::topics::{TopicMatrixX, TopicMatrixY};

/// Dense oracle paths refuse larger graphs.
pub const DENSE_CAP: usize = 3000;
/// Ratio bound in the spectral condition `‖V M⁻¹ U‖₂ ≤ 0.99 · 2n / (C W)`.
pub const SPECTRAL_RATIO: f64 = 0.99;

#[derive(Clone, Debug)]
pub struct LowRankModel {
    graph: Arc<Graph>,
    x: TopicMatrixX,
    y: Arc<TopicMatrixY>,
    c: f64,
    scale: f64,
    ax_degree: Vec<f64>,
}

impl LowRankModel {
    pub fn new(graph: Arc<Graph>, x: TopicMatrixX, y: Arc<TopicMatrixY>, c: f64) -> Result<Self> {
        graph.require_connected()?;
        let n = graph.n();
        check_len("X rows", n, x.n())?;
        check_len("Y columns", n, y.n())?;
        check_len("topic count of Y", x.k(), y.k())?;
        if x.k() > n {
            return Err(Error::Validation(format!("k = {} exceeds n = {n}", x.k())));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::Validation(format!(
                "C must be finite and >= 0, got {c}"
            )));
        }
        let scale = c * graph.total_weight() / (2.0 * n as f64);
        let mut model = Self {
            graph,
            x,
            y,
            c,
            scale,
            ax_degree: Vec::new(),
        };
        model.ax_degree = model.ax_matvec_unchecked(&vec![1.0; n]);
        Ok(model)
    }

    /// Same graph, `Y` and `C` with a replacement `X`.
    pub fn with_x(&self, x: TopicMatrixX) -> Result<Self> {
        Self::new(self.graph.clone(), x, self.y.clone(), self.c)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn x(&self) -> &TopicMatrixX {
        &self.x
    }

    pub fn y(&self) -> &TopicMatrixY {
        &self.y
    }

    pub fn y_arc(&self) -> &Arc<TopicMatrixY> {
        &self.y
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn k(&self) -> usize {
        self.x.k()
    }

    /// `W`, total edge weight of the follow graph.
    pub fn total_weight(&self) -> f64 {
        self.graph.total_weight()
    }

    /// `C W / 2n`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `A_X 1`.
    pub fn ax_degree(&self) -> &[f64] {
        &self.ax_degree
    }

    /// `‖A‖₁,₁ = 2W` and `‖A_X‖₁,₁` (equal to `C W` for row-stochastic inputs).
    pub fn adjacency_norms(&self) -> AdjacencyNorms {
        let mut acc = NeumaierSum::new();
        for &d in &self.ax_degree {
            acc.add(d.abs());
        }
        AdjacencyNorms {
            graph: 2.0 * self.total_weight(),
            low_rank: acc.value(),
        }
    }

    /// `M = I + L + diag(A_X 1)`.
    pub fn operator(&self) -> SpdOperator<'_> {
        let shift = self.ax_degree.iter().map(|d| 1.0 + d).collect();
        SpdOperator::new(&self.graph, shift).expect("A_X has nonnegative degrees")
    }

    /// `Xᵀ v`, length k.
    fn xt_apply(&self, v: &[f64]) -> Vec<f64> {
        let m = self.x.matrix();
        (0..m.ncols())
            .map(|j| dot(m.column(j).as_slice(), v))
            .collect()
    }

    /// `X c`, length n.
    fn x_apply(&self, c: &[f64]) -> Vec<f64> {
        let m = self.x.matrix();
        let mut out = vec![0.0; m.nrows()];
        for (j, &cj) in c.iter().enumerate() {
            if cj != 0.0 {
                for (o, xv) in out.iter_mut().zip(m.column(j).iter()) {
                    *o += xv * cj;
                }
            }
        }
        out
    }

    fn ax_matvec_unchecked(&self, v: &[f64]) -> Vec<f64> {
        if self.scale == 0.0 {
            return vec![0.0; v.len()];
        }
        let yv = self.y.apply(v);
        let xtv = self.xt_apply(v);
        let a = self.x_apply(&yv);
        let b = self.y.apply_t(&xtv);
        a.iter()
            .zip(&b)
            .map(|(p, q)| self.scale * (p + q))
            .collect()
    }

    /// `A_X v` in `O(nk)`.
    pub fn ax_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("ax_matvec", self.n(), v.len())?;
        Ok(self.ax_matvec_unchecked(v))
    }

    /// `V v = (Y v; Xᵀ v)`, length 2k.
    pub fn v_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.y.apply(v);
        out.extend(self.xt_apply(v));
        out
    }

    /// `U c = X c[..k] + Yᵀ c[k..]`, length n.
    pub fn u_apply(&self, c: &[f64]) -> Vec<f64> {
        let k = self.k();
        let mut out = self.x_apply(&c[..k]);
        for (o, b) in out.iter_mut().zip(self.y.apply_t(&c[k..])) {
            *o += b;
        }
        out
    }

    /// Column `j` of `U`.
    pub fn u_column(&self, j: usize) -> Vec<f64> {
        let k = self.k();
        if j < k {
            self.x.matrix().column(j).iter().copied().collect()
        } else {
            self.y.matrix().row(j - k).iter().copied().collect()
        }
    }

    /// `‖U‖_F = ‖V‖_F = (‖X‖_F² + ‖Y‖_F²)^{1/2}`.
    pub fn uv_frobenius(&self) -> f64 {
        (self.x.matrix().norm_squared() + self.y.matrix().norm_squared()).sqrt()
    }

    /// `R = M⁻¹ U` by independent column solves, run in parallel.
    pub fn solve_u_columns(&self, op: &SpdOperator<'_>, eps: f64) -> Result<Vec<Vec<f64>>> {
        (0..2 * self.k())
            .into_par_iter()
            .map(|j| solve(op, &self.u_column(j), eps))
            .collect()
    }

    /// `V R` as a dense `2k × 2k` matrix.
    fn v_times_columns(&self, cols: &[Vec<f64>]) -> DMatrix<f64> {
        let dim = cols.len();
        let mut p = DMatrix::zeros(dim, dim);
        for (j, col) in cols.iter().enumerate() {
            let vc = self.v_apply(col);
            for (i, v) in vc.into_iter().enumerate() {
                p[(i, j)] = v;
            }
        }
        p
    }

    /// Threshold `0.99 · 2n / (C W)`; infinite when `C W = 0`.
    pub fn spectral_threshold(&self) -> f64 {
        let cw = self.c * self.total_weight();
        if cw > 0.0 {
            SPECTRAL_RATIO * 2.0 * self.n() as f64 / cw
        } else {
            f64::INFINITY
        }
    }

    /// Estimates `‖V M⁻¹ U‖₂` from high-accuracy column solves.
    pub fn spectral_condition(&self) -> Result<SpectralCondition> {
        let op = self.operator();
        let cols = self.solve_u_columns(&op, 1e-10)?;
        let p = self.v_times_columns(&cols);
        Ok(self.condition_from(&p))
    }

    fn condition_from(&self, p: &DMatrix<f64>) -> SpectralCondition {
        let norm_estimate = matrix_norm2(p);
        let threshold = self.spectral_threshold();
        SpectralCondition {
            norm_estimate,
            threshold,
            satisfied: norm_estimate <= threshold,
        }
    }

    /// Woodbury estimate of `z_X` with `‖z̃ − z_X‖₂ ≤ eps` when the spectral
    /// condition holds.
    pub fn approx_opinions(&self, s: &OpinionVector, eps: f64) -> Result<ApproxOpinions> {
        check_len("approx_opinions", self.n(), s.len())?;
        if !(eps > 0.0) {
            return Err(Error::Validation(format!(
                "eps must be positive, got {eps}"
            )));
        }
        let n = self.n();
        let s_norm = s.norm();
        if s_norm == 0.0 {
            return Ok(ApproxOpinions {
                z: vec![0.0; n],
                condition: None,
                verified: true,
            });
        }
        let op = self.operator();
        let cw = self.c * self.total_weight();
        if cw == 0.0 {
            // A_X = 0, M = I + L
            let z = solve(&op, s.as_slice(), eps)?;
            return Ok(ApproxOpinions {
                z,
                condition: None,
                verified: true,
            });
        }

        let budget = ErrorBudget::new(n, self.k(), cw, self.uv_frobenius(), s_norm, eps);
        let z1 = solve(&op, s.as_slice(), budget.z1)?;
        let y1 = self.v_apply(&z1);
        let cols = self.solve_u_columns(&op, budget.columns)?;
        let p = self.v_times_columns(&cols);
        let condition = self.condition_from(&p);
        let capacitance = DMatrix::identity(p.nrows(), p.ncols()) - p * self.scale;
        let y2 = LuFactor::new(capacitance)?.solve(&y1)?;
        let y3 = self.u_apply(&y2);
        let z2 = solve(&op, &y3, budget.z2)?;
        let z = z1
            .iter()
            .zip(&z2)
            .map(|(a, b)| a + self.scale * b)
            .collect();
        Ok(ApproxOpinions {
            z,
            verified: condition.satisfied,
            condition: Some(condition),
        })
    }

    /// `f̃ = sᵀ z̃` with `z̃` at accuracy `eps / √n`, so `|f̃ − f(X)| ≤ eps`.
    pub fn approx_objective(&self, s: &OpinionVector, eps: f64) -> Result<f64> {
        let inner = eps / (self.n() as f64).sqrt();
        let approx = self.approx_opinions(s, inner)?;
        Ok(dot(s.as_slice(), &approx.z))
    }

    /// Dense `A_X`; oracle use only.
    pub fn ax_dense(&self) -> Result<DMatrix<f64>> {
        dense::check_cap(self.n(), DENSE_CAP)?;
        let xy = self.x.matrix() * self.y.matrix();
        Ok((&xy + xy.transpose()) * self.scale)
    }

    /// Dense `I + L + L_X`; oracle use only.
    pub fn system_dense(&self) -> Result<DMatrix<f64>> {
        let ax = self.ax_dense()?;
        let mut m = dense::laplacian(&self.graph) - &ax;
        for i in 0..self.n() {
            m[(i, i)] += 1.0 + ax.row(i).sum();
        }
        Ok(m)
    }

    /// `z_X` by dense Cholesky of `I + L + L_X`.
    pub fn exact_opinions_dense(&self, s: &OpinionVector) -> Result<Vec<f64>> {
        check_len("exact_opinions_dense", self.n(), s.len())?;
        dense::solve_spd(self.system_dense()?, s.as_slice())
    }

    /// `f(X) = sᵀ z_X` by the dense path.
    pub fn exact_objective_dense(&self, s: &OpinionVector) -> Result<f64> {
        let z = self.exact_opinions_dense(s)?;
        Ok(dot(s.as_slice(), &z))
    }
}

/// Per-solve tolerances of the Woodbury path, with Frobenius norms standing
/// in for spectral norms of `U` and `V`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBudget {
    pub z1: f64,
    pub columns: f64,
    pub z2: f64,
}

impl ErrorBudget {
    pub fn new(n: usize, k: usize, cw: f64, uv_norm: f64, s_norm: f64, eps: f64) -> Self {
        let ratio = 2.0 * n as f64 / cw;
        let uv = uv_norm * uv_norm;
        let z1 = eps / 4.0 * (ratio / (200.0 * uv)).min(1.0);
        let inner = (ratio * (eps / 4.0) / (uv * s_norm)).min(100.0);
        let columns =
            (0.009 * ratio / uv_norm).min(ratio / (1e5 * uv_norm) * inner) / (2.0 * k as f64);
        let z2 = ratio * eps / 4.0;
        Self { z1, columns, z2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralCondition {
    pub norm_estimate: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdjacencyNorms {
    pub graph: f64,
    pub low_rank: f64,
}

#[derive(Clone, Debug)]
pub struct ApproxOpinions {
    pub z: Vec<f64>,
    /// Present whenever the Woodbury correction was computed.
    pub condition: Option<SpectralCondition>,
    /// False when the accuracy guarantee is not backed by the spectral condition.
    pub verified: bool,
}

/// `‖XY + YᵀXᵀ‖₁,₁` for nonnegative `X`, `Y`, without forming the product.
///
/// Entries are nonnegative, so the norm is the plain sum, which is
/// `2 Σ_i X_i · (Y 1)`.
pub fn weight_identity(x: &TopicMatrixX, y: &TopicMatrixY) -> Result<f64> {
    check_len("weight_identity topics", x.k(), y.k())?;
    let ym = y.matrix();
    let y_row_sums: Vec<f64> = (0..ym.nrows()).map(|j| ym.row(j).sum()).collect();
    let xm = x.matrix();
    let mut acc = NeumaierSum::new();
    for i in 0..xm.nrows() {
        for (j, ys) in y_row_sums.iter().enumerate() {
            acc.add(xm[(i, j)] * ys);
        }
    }
    Ok(2.0 * acc.value())
}

/// Spectral norm of a small dense matrix from its singular values.
pub fn matrix_norm2(p: &DMatrix<f64>) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    p.clone().singular_values().max()
}

/// Spectral norm of `Y` by 100-step power iteration, capped by `‖Y‖_F`.
pub fn y_spectral_norm(y: &TopicMatrixY) -> f64 {
    let m = y.matrix();
    let est = power_norm(m.ncols(), |v| y.apply(v), |c| y.apply_t(c), 100, 0.0);
    est.min(m.norm())
}
