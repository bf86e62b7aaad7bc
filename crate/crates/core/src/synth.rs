//! Deterministic synthetic instances: innate opinions, topic matrices and
//! follow graphs.
//!
//! All randomness comes from ChaCha8 seeded with the configured seed. Every
//! unit of work draws from its own stream (`set_stream`), so rows and topics
//! can be generated in parallel and the output depends only on the seed and
//! the sizes.
//!
//! | stream            | use                          |
//! |-------------------|------------------------------|
//! | `1`               | innate opinions              |
//! | `2`               | preferential-attachment graph|
//! | `3`               | random connected graph       |
//! | `(1 << 32) + i`   | row `i` of `X`               |
//! | `(2 << 32) + j`   | topic `j` of `Y`             |

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fj::{mean_center_rescale, OpinionVector};
use crate::graph::Graph;
use crate::topics::{TopicMatrixX, TopicMatrixY};

const OPINION_STREAM: u64 = 1;
const PA_GRAPH_STREAM: u64 = 2;
const RANDOM_GRAPH_STREAM: u64 = 3;
const X_STREAM_BASE: u64 = 1 << 32;
const Y_STREAM_BASE: u64 = 2 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpinionDistribution {
    Uniform,
    Powerlaw,
    Exponential,
    Polarized,
}

impl std::str::FromStr for OpinionDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "powerlaw" => Ok(Self::Powerlaw),
            "exponential" => Ok(Self::Exponential),
            "polarized" => Ok(Self::Polarized),
            other => Err(Error::Validation(format!(
                "unknown opinion distribution `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub opinion_dist: OpinionDistribution,
    pub k: usize,
    pub powerlaw_alpha: f64,
    pub exponential_rate: f64,
    pub x_sparsity_threshold: f64,
    pub chunk_weights: Vec<f64>,
    pub per_topic_user_fraction: f64,
    /// Edges added per new vertex by the preferential-attachment generator.
    pub edges_per_node: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            opinion_dist: OpinionDistribution::Powerlaw,
            k: 20,
            powerlaw_alpha: 2.5,
            exponential_rate: 1.0,
            x_sparsity_threshold: 0.25,
            chunk_weights: vec![0.3, 0.4, 0.3],
            per_topic_user_fraction: 0.02,
            edges_per_node: 5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        if !(self.powerlaw_alpha > 1.0) {
            return bad(format!(
                "power-law alpha must exceed 1, got {}",
                self.powerlaw_alpha
            ));
        }
        if !(self.exponential_rate > 0.0) || !self.exponential_rate.is_finite() {
            return bad(format!(
                "exponential rate must be positive, got {}",
                self.exponential_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.x_sparsity_threshold) {
            return bad(format!(
                "sparsity threshold must lie in [0, 1], got {}",
                self.x_sparsity_threshold
            ));
        }
        if self.chunk_weights.is_empty() || self.chunk_weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("chunk weights must be nonempty and nonnegative".into());
        }
        let total: f64 = self.chunk_weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("chunk weights sum to {total}, expected 1"));
        }
        if !(self.per_topic_user_fraction > 0.0 && self.per_topic_user_fraction <= 1.0) {
            return bad(format!(
                "per-topic user fraction must lie in (0, 1], got {}",
                self.per_topic_user_fraction
            ));
        }
        if self.edges_per_node < 1 {
            return bad("edges per node must be at least 1".into());
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Pareto sample with `x_min = 1` by inverse CDF.
pub fn pareto<R: Rng>(rng: &mut R, alpha: f64) -> f64 {
    let u: f64 = rng.random();
    (1.0 - u).powf(-1.0 / (alpha - 1.0))
}

/// Exponential sample truncated to `[0, 1]` by inverse CDF.
pub fn truncated_exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    let mass = -(-rate).exp_m1();
    (-(-u * mass).ln_1p() / rate).clamp(0.0, 1.0)
}

/// Maps values affinely onto `[0, 1]`, preserving their order.
fn min_max_rescale(v: &mut [f64]) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for x in v.iter_mut() {
        *x = if span > 0.0 { (*x - lo) / span } else { 0.0 };
    }
}

/// Innate opinions, centered and scaled to unit maximum magnitude.
pub fn gen_opinions(n: usize, config: &SynthConfig) -> Result<OpinionVector> {
    config.validate()?;
    if n < 2 {
        return Err(Error::Validation(format!("need at least 2 users, got {n}")));
    }
    let mut rng = config.rng(OPINION_STREAM);
    let raw: Vec<f64> = match config.opinion_dist {
        OpinionDistribution::Uniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        OpinionDistribution::Powerlaw => {
            let mut v: Vec<f64> = (0..n)
                .map(|_| pareto(&mut rng, config.powerlaw_alpha))
                .collect();
            min_max_rescale(&mut v);
            v
        }
        OpinionDistribution::Exponential => (0..n)
            .map(|_| truncated_exponential(&mut rng, config.exponential_rate))
            .collect(),
        OpinionDistribution::Polarized => {
            let half = n.div_ceil(2);
            (0..n)
                .map(|i| {
                    let x = truncated_exponential(&mut rng, config.exponential_rate);
                    if i < half {
                        x
                    } else {
                        1.0 - x
                    }
                })
                .collect()
        }
    };
    mean_center_rescale(&raw)
}

/// Sparse power-law user–topic matrix.
///
/// Each row draws `k` Pareto values, divides by the row maximum, zeroes the
/// entries below the sparsity threshold and renormalizes to sum one.
pub fn gen_x(n: usize, config: &SynthConfig) -> Result<TopicMatrixX> {
    config.validate()?;
    let k = config.k;
    if k < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 topics, got {k}"
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = config.rng(X_STREAM_BASE + i as u64);
            let mut row: Vec<f64> = (0..k)
                .map(|_| pareto(&mut rng, config.powerlaw_alpha))
                .collect();
            let max = row.iter().copied().fold(0.0, f64::max);
            let argmax = row.iter().position(|&v| v == max).unwrap_or(0);
            for v in row.iter_mut() {
                *v /= max;
                if *v < config.x_sparsity_threshold {
                    *v = 0.0;
                }
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[argmax] = 1.0;
            }
            row
        })
        .collect();
    TopicMatrixX::new(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}

/// Interval `[lo, hi]` of chunk `c` when `[-1, 1]` is split into `d` equal parts.
pub fn chunk_interval(c: usize, d: usize) -> (f64, f64) {
    let width = 2.0 / d as f64;
    (
        -1.0 + width * c as f64,
        (-1.0 + width * (c + 1) as f64).min(1.0),
    )
}

fn chunk_of(v: f64, d: usize) -> usize {
    let c = ((v + 1.0) / 2.0 * d as f64).floor();
    (c.max(0.0) as usize).min(d - 1)
}

/// Influence–topic matrix: each topic is voiced by a few users drawn from
/// one chunk of the opinion spectrum. Also returns the chunk of each topic.
pub fn gen_y_with_chunks(
    n: usize,
    config: &SynthConfig,
    s: &OpinionVector,
) -> Result<(TopicMatrixY, Vec<usize>)> {
    config.validate()?;
    crate::error::check_len("gen_y opinions", n, s.len())?;
    let d = config.chunk_weights.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (u, &v) in s.as_slice().iter().enumerate() {
        members[chunk_of(v, d)].push(u);
    }
    let usable: f64 = (0..d)
        .filter(|&c| !members[c].is_empty())
        .map(|c| config.chunk_weights[c])
        .sum();
    if !(usable > 0.0) {
        return Err(Error::Validation(
            "no opinion chunk with positive weight contains any user".into(),
        ));
    }
    let target = ((config.per_topic_user_fraction * n as f64).ceil() as usize).max(1);
    let topics: Vec<(Vec<(usize, f64)>, usize)> = (0..config.k)
        .into_par_iter()
        .map(|j| {
            let mut rng = config.rng(Y_STREAM_BASE + j as u64);
            // redraw until a nonempty chunk comes up
            let chunk = loop {
                let r: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = d - 1;
                for (c, w) in config.chunk_weights.iter().enumerate() {
                    acc += w;
                    if r < acc {
                        pick = c;
                        break;
                    }
                }
                if !members[pick].is_empty() && config.chunk_weights[pick] > 0.0 {
                    break pick;
                }
            };
            let pool = &members[chunk];
            let count = target.min(pool.len());
            let mut chosen: Vec<usize> = sample(&mut rng, pool.len(), count)
                .into_iter()
                .map(|idx| pool[idx])
                .collect();
            chosen.sort_unstable();
            let weights: Vec<f64> = chosen
                .iter()
                .map(|_| pareto(&mut rng, config.powerlaw_alpha))
                .collect();
            let total: f64 = weights.iter().sum();
            (
                chosen
                    .into_iter()
                    .zip(weights.into_iter().map(|w| w / total))
                    .collect(),
                chunk,
            )
        })
        .collect();
    let mut m = DMatrix::zeros(config.k, n);
    let mut chunks = Vec::with_capacity(config.k);
    for (j, (entries, chunk)) in topics.into_iter().enumerate() {
        for (u, w) in entries {
            m[(j, u)] = w;
        }
        chunks.push(chunk);
    }
    Ok((TopicMatrixY::new(m)?, chunks))
}

pub fn gen_y(n: usize, config: &SynthConfig, s: &OpinionVector) -> Result<TopicMatrixY> {
    gen_y_with_chunks(n, config, s).map(|(y, _)| y)
}

/// Preferential-attachment graph with unit weights.
///
/// Starts from a clique on `edges_per_node + 1` vertices; each later vertex
/// links to `edges_per_node` distinct earlier vertices chosen with
/// probability proportional to degree. The result is connected with about
/// `edges_per_node · n` edges.
pub fn gen_graph(n: usize, config: &SynthConfig) -> Result<Graph> {
    config.validate()?;
    if n < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 vertices, got {n}"
        )));
    }
    let m = config.edges_per_node.min(n - 1);
    let mut rng = config.rng(PA_GRAPH_STREAM);
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(m * n);
    // every edge endpoint once, so uniform picks are degree-proportional
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * m * n);
    let seed_size = m + 1;
    for u in 0..seed_size {
        for v in u + 1..seed_size {
            edges.push((u, v, 1.0));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut targets: Vec<usize> = Vec::with_capacity(m);
    for u in seed_size..n {
        targets.clear();
        while targets.len() < m {
            let v = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&v) {
                targets.push(v);
            }
        }
        for &v in &targets {
            edges.push((v, u, 1.0));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    Graph::from_edges(n, edges).map(|(g, _)| g)
}

/// Random connected graph: a random spanning tree plus `extra_edges`
/// uniformly drawn extra pairs, each with a weight uniform in
/// `[w_min, w_max]`. A pair drawn twice keeps the sum of its weights.
pub fn gen_random_connected(
    n: usize,
    extra_edges: usize,
    w_min: f64,
    w_max: f64,
    seed: u64,
) -> Result<Graph> {
    if n < 1 {
        return Err(Error::EmptyGraph);
    }
    if !(w_min > 0.0 && w_min <= w_max && w_max.is_finite()) {
        return Err(Error::Validation(format!(
            "weight range [{w_min}, {w_max}] must be positive and ordered"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RANDOM_GRAPH_STREAM);
    let weight = |rng: &mut ChaCha8Rng| {
        if w_max > w_min {
            rng.random_range(w_min..=w_max)
        } else {
            w_min
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut edges = Vec::with_capacity(n + extra_edges);
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        let w = weight(&mut rng);
        edges.push((parent, order[i], w));
    }
    if n >= 2 {
        for _ in 0..extra_edges {
            let u = rng.random_range(0..n);
            let mut v = rng.random_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            let w = weight(&mut rng);
            edges.push((u, v, w));
        }
    }
    Graph::from_edges(n, edges).map(|(g, _)| g)
}
