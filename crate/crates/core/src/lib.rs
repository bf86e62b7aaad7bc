//! Polarization-aware timeline optimization for Friedkin–Johnsen opinion
//! dynamics with a low-rank, topic-based timeline graph.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod dense;
pub mod error;
pub mod fj;
pub mod gdpm;
pub mod gradient;
pub mod graph;
pub mod lowrank;
pub mod lu;
pub mod numeric;
pub mod projection;
pub mod solver;
pub mod synth;
pub mod topics;

pub use error::{Error, Result};
pub use fj::{
    equilibrium, equilibrium_exact, fj_step, indices, mean_center_rescale, Indices, OpinionVector,
};
pub use graph::Graph;
pub use lowrank::{weight_identity, LowRankModel};
pub use topics::{Bounds, TopicMatrixX, TopicMatrixY};
