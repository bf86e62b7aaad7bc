//! Greedy timeline re-weighting heuristics.
//!
//! Each iteration estimates the expressed opinions, derives the mean opinion
//! `z̄` and the topic signals `τ_j = Σ_u Y_ju z(u)`, then moves as much weight
//! as the bounds allow in every row from a penalized topic `j'` to a
//! strengthened topic `j`.
//!
//! * BL-1 strengthens the topic whose signal is closest to `z̄`.
//! * BL-2 strengthens the topic that most opposes the user's own opinion.
//!
//! Ties are broken towards the lowest column index.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fj::OpinionVector;
use crate::gdpm::{reduction_ratio, IterationRecord};
use crate::lowrank::LowRankModel;
use crate::numeric::{dot, mean};
use crate::topics::{Bounds, TopicMatrixX};

const START_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Bl1,
    Bl2,
}

/// How BL-1 picks the penalized topic `j'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bl1Selection {
    /// `j'` minimizes `|τ_j' − z̄|` among columns other than `j`.
    #[default]
    AsListed,
    /// `j'` maximizes `|τ_j' − z̄|`.
    AsProse,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineConfig {
    pub variant: Variant,
    pub t_max: usize,
    /// Objective accuracy of each opinion estimate.
    pub eps: f64,
    pub bl1_selection: Bl1Selection,
}

impl BaselineConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            t_max: 10,
            eps: 1e-6,
            bl1_selection: Bl1Selection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopicSignals {
    pub z_bar: f64,
    pub tau: Vec<f64>,
}

pub fn topic_signals(model: &LowRankModel, z: &[f64]) -> Result<TopicSignals> {
    crate::error::check_len("topic_signals", model.n(), z.len())?;
    Ok(TopicSignals {
        z_bar: mean(z),
        tau: model.y().apply(z),
    })
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub x_best: TopicMatrixX,
    pub best_objective: f64,
    pub best_iter: usize,
    pub initial_objective: f64,
    /// Objectives of `X^0, …, X^{t_max}`; `grad_norm` is not computed and
    /// recorded as NaN.
    pub trace: Vec<IterationRecord>,
    /// Rows with no eligible topic pair, per iteration.
    pub skipped_rows: Vec<usize>,
    pub unverified_iterations: usize,
}

impl BaselineResult {
    pub fn reduction_ratio(&self) -> Result<f64> {
        reduction_ratio(self.initial_objective, self.best_objective)
    }
}

/// Index minimizing `key` over `candidates`, lowest index on ties.
fn arg_best<I, F>(candidates: I, key: F, maximize: bool) -> Option<usize>
where
    I: Iterator<Item = usize>,
    F: Fn(usize) -> f64,
{
    let mut best: Option<(usize, f64)> = None;
    for j in candidates {
        let v = key(j);
        let better = match best {
            None => true,
            Some((_, b)) => {
                if maximize {
                    v > b
                } else {
                    v < b
                }
            }
        };
        if better {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

/// Chooses `(j, j')` for one row, or `None` when no pair is eligible.
pub fn choose_pair(
    variant: Variant,
    selection: Bl1Selection,
    row: &[f64],
    lower: &[f64],
    upper: &[f64],
    signals: &TopicSignals,
    z_i: f64,
) -> Option<(usize, usize)> {
    let k = row.len();
    let headroom = |j: usize| row[j] < upper[j];
    let slack = |j: usize| row[j] > lower[j];
    let dist = |j: usize| (signals.tau[j] - signals.z_bar).abs();
    match variant {
        Variant::Bl1 => {
            let j = arg_best((0..k).filter(|&j| headroom(j)), dist, false)?;
            let jp = match selection {
                Bl1Selection::AsListed => {
                    arg_best((0..k).filter(|&c| c != j && slack(c)), dist, false)?
                }
                Bl1Selection::AsProse => {
                    arg_best((0..k).filter(|&c| c != j && slack(c)), dist, true)?
                }
            };
            Some((j, jp))
        }
        Variant::Bl2 => {
            if z_i == 0.0 {
                return None;
            }
            let j = arg_best(
                (0..k).filter(|&j| headroom(j)),
                |j| -z_i * signals.tau[j],
                true,
            )?;
            let jp = arg_best(
                (0..k).filter(|&c| c != j && slack(c) && z_i * signals.tau[c] > 0.0),
                dist,
                false,
            )?;
            Some((j, jp))
        }
    }
}

/// Moves `δ = min(U_ij − X_ij, X_ij' − L_ij')` from column `jp` to `j`.
pub fn transfer(row: &mut [f64], lower: &[f64], upper: &[f64], j: usize, jp: usize) -> f64 {
    let delta = (upper[j] - row[j]).min(row[jp] - lower[jp]).max(0.0);
    row[j] += delta;
    row[jp] -= delta;
    delta
}

fn estimate(model: &LowRankModel, s: &OpinionVector, eps: f64) -> Result<(Vec<f64>, f64, bool)> {
    let approx = model.approx_opinions(s, eps / (model.n() as f64).sqrt())?;
    let f = dot(s.as_slice(), &approx.z);
    Ok((approx.z, f, approx.verified))
}

pub fn run_baseline(
    model: &LowRankModel,
    s: &OpinionVector,
    bounds: &Bounds,
    config: &BaselineConfig,
) -> Result<BaselineResult> {
    let (n, k) = (model.n(), model.k());
    bounds.require_shape(n, k)?;
    if !(config.eps > 0.0) {
        return Err(Error::Validation(format!(
            "eps must be positive, got {}",
            config.eps
        )));
    }
    if let Some((row, message)) = bounds.violation(model.x().matrix(), START_SLACK) {
        return Err(Error::Infeasible { row, message });
    }
    let start = Instant::now();
    let mut current = model.clone();
    let (mut z, f0, ok) = estimate(&current, s, config.eps).map_err(|e| e.at_iteration(0))?;
    let mut unverified = usize::from(!ok);
    let mut trace = vec![IterationRecord {
        iter: 0,
        objective: f0,
        grad_norm: f64::NAN,
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut best = (f0, model.x().clone(), 0);
    let mut skipped_rows = Vec::with_capacity(config.t_max);

    for t in 1..=config.t_max {
        let signals = topic_signals(&current, &z)?;
        let mut x: DMatrix<f64> = current.x().matrix().clone();
        let mut skipped = 0;
        for i in 0..n {
            let mut row: Vec<f64> = x.row(i).iter().copied().collect();
            let lower: Vec<f64> = bounds.lower().row(i).iter().copied().collect();
            let upper: Vec<f64> = bounds.upper().row(i).iter().copied().collect();
            match choose_pair(
                config.variant,
                config.bl1_selection,
                &row,
                &lower,
                &upper,
                &signals,
                z[i],
            ) {
                Some((j, jp)) => {
                    transfer(&mut row, &lower, &upper, j, jp);
                    for (c, v) in row.into_iter().enumerate() {
                        x[(i, c)] = v;
                    }
                }
                None => skipped += 1,
            }
        }
        skipped_rows.push(skipped);
        let x_next = TopicMatrixX::new(x).map_err(|e| e.at_iteration(t))?;
        current = current.with_x(x_next).map_err(|e| e.at_iteration(t))?;
        let (z_next, f, ok) = estimate(&current, s, config.eps).map_err(|e| e.at_iteration(t))?;
        unverified += usize::from(!ok);
        trace.push(IterationRecord {
            iter: t,
            objective: f,
            grad_norm: f64::NAN,
            seconds: start.elapsed().as_secs_f64(),
        });
        if f < best.0 {
            best = (f, current.x().clone(), t);
        }
        z = z_next;
    }

    Ok(BaselineResult {
        x_best: best.1,
        best_objective: best.0,
        best_iter: best.2,
        initial_objective: f0,
        trace,
        skipped_rows,
        unverified_iterations: unverified,
    })
}
