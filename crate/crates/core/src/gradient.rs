//! Gradient of `f(X) = sᵀ (I + L + L_X)⁻¹ s` with respect to `X`.
//!
//! With `z = z_X`, `∇f = c (2 z (Yz)ᵀ − (z⊙z) 1ᵀ − 1 (Y(z⊙z))ᵀ)` where
//! `c = C W / 2n`. Assembly uses the two k-vectors `Yz` and `Y(z⊙z)`, so it
//! costs `O(nk)`.

use nalgebra::DMatrix;

use crate::error::{check_len, Result};
use crate::fj::OpinionVector;
use crate::lowrank::{y_spectral_norm, LowRankModel};

/// Gradient assembled from a given opinion vector.
pub fn gradient_from_opinions(model: &LowRankModel, z: &[f64]) -> Result<DMatrix<f64>> {
    let n = model.n();
    let k = model.k();
    check_len("gradient opinions", n, z.len())?;
    let scale = model.scale();
    if scale == 0.0 {
        return Ok(DMatrix::zeros(n, k));
    }
    let h: Vec<f64> = z.iter().map(|v| v * v).collect();
    let a = model.y().apply(z);
    let b = model.y().apply(&h);
    Ok(DMatrix::from_fn(n, k, |i, j| {
        scale * (2.0 * z[i] * a[j] - h[i] - b[j])
    }))
}

/// Gradient at the exact dense opinions; oracle use.
pub fn gradient_exact(model: &LowRankModel, s: &OpinionVector) -> Result<DMatrix<f64>> {
    let z = model.exact_opinions_dense(s)?;
    gradient_from_opinions(model, &z)
}

/// Opinion accuracy that makes the assembled gradient `eps`-accurate in
/// Frobenius norm.
pub fn opinion_tolerance(model: &LowRankModel, eps: f64) -> f64 {
    let cw = model.c() * model.total_weight();
    let y_f = model.y().matrix().norm();
    eps.min(eps.sqrt()) * (model.n() as f64).sqrt() / (8.0 * (1.0 + cw) * (1.0 + y_f))
}

/// Gradient at the Woodbury opinions, within `eps` of the exact gradient in
/// Frobenius norm. Also returns whether the opinion estimate was verified.
pub fn gradient_approx(
    model: &LowRankModel,
    s: &OpinionVector,
    eps: f64,
) -> Result<(DMatrix<f64>, bool)> {
    let approx = model.approx_opinions(s, opinion_tolerance(model, eps))?;
    Ok((gradient_from_opinions(model, &approx.z)?, approx.verified))
}

/// Smoothness constant `(8 C W / √n) ‖s‖₂ ‖Y‖₂²`.
pub fn lipschitz_bound(model: &LowRankModel, s: &OpinionVector) -> f64 {
    let cw = model.c() * model.total_weight();
    if cw == 0.0 {
        return 0.0;
    }
    let y2 = y_spectral_norm(model.y());
    8.0 * cw / (model.n() as f64).sqrt() * s.norm() * y2 * y2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::topics::{TopicMatrixX, TopicMatrixY};
    use std::sync::Arc;

    fn model(c: f64) -> LowRankModel {
        let (g, _) = Graph::from_edges(3, vec![(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let x = TopicMatrixX::new(DMatrix::from_row_slice(
            3,
            2,
            &[0.7, 0.3, 0.2, 0.8, 0.5, 0.5],
        ))
        .unwrap();
        let y = TopicMatrixY::new(DMatrix::from_row_slice(
            2,
            3,
            &[0.6, 0.4, 0.0, 0.1, 0.2, 0.7],
        ))
        .unwrap();
        LowRankModel::new(Arc::new(g), x, Arc::new(y), c).unwrap()
    }

    #[test]
    fn zero_cases() {
        let m = model(0.4);
        assert!(gradient_from_opinions(&m, &[0.0; 3])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let s0 = OpinionVector::zeros(3);
        assert!(gradient_exact(&m, &s0).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(lipschitz_bound(&m, &s0), 0.0);
        let m0 = model(0.0);
        let s = OpinionVector::new(vec![1.0, 0.0, -1.0]).unwrap();
        assert!(gradient_exact(&m0, &s).unwrap().iter().all(|&v| v == 0.0));
        assert!(gradient_approx(&m0, &s, 1e-6)
            .unwrap()
            .0
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(lipschitz_bound(&m0, &s), 0.0);
    }

    #[test]
    fn matches_dense_outer_products() {
        let m = model(0.4);
        let z = [0.3, -0.1, 0.25];
        let g = gradient_from_opinions(&m, &z).unwrap();
        let zv = nalgebra::DVector::from_column_slice(&z);
        let y = m.y().matrix();
        let zz = &zv * zv.transpose();
        let h = zv.component_mul(&zv);
        let ones_k = nalgebra::DVector::from_element(2, 1.0);
        let ones_n = nalgebra::DVector::from_element(3, 1.0);
        let dense =
            (&zz * y.transpose() * 2.0 - &h * ones_k.transpose() - &ones_n * (y * &h).transpose())
                * m.scale();
        assert!((g - dense).abs().max() < 1e-15);
    }
}
