//! Shared instance builders and dense reference computations for the
//! integration tests. The references rebuild every matrix from raw edges and
//! solve with LU, sharing no code with the library's fast paths.

#![allow(dead_code)]

use std::sync::Arc;

use fjtl::synth::{
    gen_graph, gen_opinions, gen_random_connected, gen_x, gen_y, OpinionDistribution, SynthConfig,
};
use fjtl::{Graph, LowRankModel, OpinionVector, TopicMatrixX, TopicMatrixY};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i, 1.0)))
        .unwrap()
        .0
}

/// `D − A` assembled from the edge list.
pub fn ref_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let mut a = DMatrix::zeros(n, n);
    for (u, v, w) in g.edges() {
        a[(u, v)] += w;
        a[(v, u)] += w;
    }
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] += a.row(i).sum();
    }
    l
}

/// `(C W / 2n)(XY + YᵀXᵀ)` with `W` summed from the edge list.
pub fn ref_ax(g: &Graph, x: &DMatrix<f64>, y: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    let w: f64 = g.edges().map(|(_, _, w)| w).sum();
    let xy = x * y;
    (&xy + xy.transpose()) * (c * w / (2.0 * g.n() as f64))
}

/// `I + L + L_X`.
pub fn ref_system(g: &Graph, x: &DMatrix<f64>, y: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    let ax = ref_ax(g, x, y, c);
    let mut m = ref_laplacian(g) - &ax;
    for i in 0..g.n() {
        m[(i, i)] += 1.0 + ax.row(i).sum();
    }
    m
}

pub fn ref_solve(m: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    m.clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .expect("nonsingular")
        .as_slice()
        .to_vec()
}

pub fn ref_opinions(g: &Graph, x: &DMatrix<f64>, y: &DMatrix<f64>, c: f64, s: &[f64]) -> Vec<f64> {
    ref_solve(&ref_system(g, x, y, c), s)
}

pub fn ref_objective(g: &Graph, x: &DMatrix<f64>, y: &DMatrix<f64>, c: f64, s: &[f64]) -> f64 {
    let z = ref_opinions(g, x, y, c, s);
    s.iter().zip(&z).map(|(a, b)| a * b).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Row-stochastic matrix with random sparsity.
pub fn random_stochastic(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let keep = rng.random_range(1..=cols);
        let mut total = 0.0;
        for _ in 0..keep {
            let j = rng.random_range(0..cols);
            let v: f64 = rng.random_range(0.05..1.0);
            m[(i, j)] += v;
            total += v;
        }
        for j in 0..cols {
            m[(i, j)] /= total;
        }
    }
    m
}

pub fn random_opinions(n: usize, rng: &mut ChaCha8Rng) -> OpinionVector {
    OpinionVector::new((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()).unwrap()
}

/// Random connected instance with topic matrices drawn independently of the
/// synthetic generators.
pub struct Instance {
    pub model: LowRankModel,
    pub s: OpinionVector,
}

pub fn random_instance(n: usize, k: usize, c: f64, w_max: f64, seed: u64) -> Instance {
    let mut r = rng(seed);
    let extra = r.random_range(0..=2 * n);
    let g = gen_random_connected(n, extra, w_max / 10.0, w_max, seed).unwrap();
    let x = TopicMatrixX::new(random_stochastic(n, k, &mut r)).unwrap();
    let y = TopicMatrixY::new(random_stochastic(k, n, &mut r)).unwrap();
    let s = random_opinions(n, &mut r);
    Instance {
        model: LowRankModel::new(Arc::new(g), x, Arc::new(y), c).unwrap(),
        s,
    }
}

/// Synthetic instance from the library's generators.
pub fn synthetic(n: usize, k: usize, c: f64, seed: u64, dist: OpinionDistribution) -> Instance {
    let cfg = SynthConfig {
        seed,
        opinion_dist: dist,
        k,
        ..Default::default()
    };
    let g = Arc::new(gen_graph(n, &cfg).unwrap());
    let s = gen_opinions(n, &cfg).unwrap();
    let x = gen_x(n, &cfg).unwrap();
    let y = Arc::new(gen_y(n, &cfg, &s).unwrap());
    Instance {
        model: LowRankModel::new(g, x, y, c).unwrap(),
        s,
    }
}
