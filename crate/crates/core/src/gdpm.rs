//! Accelerated projected gradient descent over the feasible user–topic
//! matrices, with inexact gradients from the Woodbury path.
//!
//! Iteration `T` computes `∇̃ = ∇̃f(X^T)` and
//!
//! ```text
//! V^T     = Π_Q(X^T − ∇̃ / L)
//! G       = Σ_{t ≤ T} α_t ∇̃f(X^t),   α_t = (t + 1) / 2
//! W^T     = Π_Q(X^0 − G / 2L)
//! X^{T+1} = τ V^T + (1 − τ) W^T,     τ = α_T / Σ_{t ≤ T} α_t
//! ```
//!
//! The run stops after `max_iters` steps or once `f̃(X^T) / f̃(X^{T−1})`
//! exceeds the convergence ratio, and returns the best of all `X^t` and
//! `V^t` seen.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fj::OpinionVector;
use crate::gradient::{gradient_from_opinions, opinion_tolerance};
use crate::lowrank::LowRankModel;
use crate::numeric::dot;
use crate::projection::project_matrix;
use crate::topics::{Bounds, TopicMatrixX};

/// Slack used when checking that the starting point is feasible.
const START_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GdpmConfig {
    /// Step constant `L`.
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Frobenius accuracy of each inexact gradient.
    pub grad_eps: f64,
    /// Stop once consecutive objectives have a ratio above this;
    /// `f64::INFINITY` disables the rule.
    pub convergence_ratio: f64,
    /// Also evaluate every `V^T` as a candidate output (one extra opinion
    /// estimate per iteration).
    pub track_objective: bool,
    pub gradients: GradientSource,
}

/// Where opinions (and hence objectives and gradients) come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientSource {
    /// Woodbury estimate at the accuracy implied by `grad_eps`.
    #[default]
    Approximate,
    /// Dense solve; limited to small graphs.
    Dense,
}

impl Default for GdpmConfig {
    fn default() -> Self {
        Self {
            learning_rate: 10.0,
            max_iters: 100,
            grad_eps: 1e-6,
            convergence_ratio: 0.99999,
            track_objective: true,
            gradients: GradientSource::Approximate,
        }
    }
}

impl GdpmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Validation(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.grad_eps > 0.0) {
            return Err(Error::Validation(format!(
                "gradient accuracy must be positive, got {}",
                self.grad_eps
            )));
        }
        if !(self.convergence_ratio > 0.0) {
            return Err(Error::Validation(format!(
                "convergence ratio must be positive, got {}",
                self.convergence_ratio
            )));
        }
        Ok(())
    }
}

/// One row of the optimization trace, describing `X^iter`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub seconds: f64,
}

/// Which sequence the returned matrix came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BestSource {
    /// `X^t`
    Iterate,
    /// `V^t`, the projected gradient step
    GradientStep,
}

#[derive(Clone, Debug)]
pub struct GdpmResult {
    pub x_best: TopicMatrixX,
    pub best_objective: f64,
    pub best_iter: usize,
    pub best_source: BestSource,
    pub initial_objective: f64,
    pub trace: Vec<IterationRecord>,
    /// True when the ratio rule stopped the run before `max_iters`.
    pub converged: bool,
    /// Iterations whose opinion estimate lacked the spectral-condition backing.
    pub unverified_iterations: usize,
}

impl GdpmResult {
    pub fn reduction_ratio(&self) -> Result<f64> {
        reduction_ratio(self.initial_objective, self.best_objective)
    }
}

/// `f_after / f_before`.
pub fn reduction_ratio(f_before: f64, f_after: f64) -> Result<f64> {
    if !(f_before > 0.0) {
        return Err(Error::Validation(format!(
            "reduction ratio needs a positive baseline objective, got {f_before}"
        )));
    }
    Ok(f_after / f_before)
}

struct Evaluation {
    objective: f64,
    gradient: DMatrix<f64>,
    verified: bool,
}

fn opinions(
    model: &LowRankModel,
    s: &OpinionVector,
    config: &GdpmConfig,
) -> Result<(Vec<f64>, bool)> {
    match config.gradients {
        GradientSource::Approximate => {
            let approx = model.approx_opinions(s, opinion_tolerance(model, config.grad_eps))?;
            Ok((approx.z, approx.verified))
        }
        GradientSource::Dense => Ok((model.exact_opinions_dense(s)?, true)),
    }
}

fn evaluate(model: &LowRankModel, s: &OpinionVector, config: &GdpmConfig) -> Result<Evaluation> {
    let (z, verified) = opinions(model, s, config)?;
    Ok(Evaluation {
        objective: dot(s.as_slice(), &z),
        gradient: gradient_from_opinions(model, &z)?,
        verified,
    })
}

fn objective_only(
    model: &LowRankModel,
    s: &OpinionVector,
    config: &GdpmConfig,
) -> Result<(f64, bool)> {
    let (z, verified) = opinions(model, s, config)?;
    Ok((dot(s.as_slice(), &z), verified))
}

/// Clamps a convex combination back into the box, which rounding can leave
/// by one ulp.
fn clamp_to(bounds: &Bounds, x: &mut DMatrix<f64>) {
    for ((v, l), u) in x
        .iter_mut()
        .zip(bounds.lower().iter())
        .zip(bounds.upper().iter())
    {
        *v = v.clamp(*l, *u);
    }
}

/// Row-stochastic matrix from an iterate that is feasible up to rounding.
fn as_topic_matrix(x: DMatrix<f64>) -> Result<TopicMatrixX> {
    TopicMatrixX::new(x)
}

pub fn optimize(
    model: &LowRankModel,
    s: &OpinionVector,
    bounds: &Bounds,
    config: &GdpmConfig,
) -> Result<GdpmResult> {
    optimize_observed(model, s, bounds, config, |_| {})
}

/// Matrices produced by one iteration.
pub struct Step<'a> {
    pub iter: usize,
    pub x: &'a DMatrix<f64>,
    pub v: &'a DMatrix<f64>,
    pub w: &'a DMatrix<f64>,
    pub next: &'a DMatrix<f64>,
}

/// `optimize`, calling `observer` after every iteration.
pub fn optimize_observed<F>(
    model: &LowRankModel,
    s: &OpinionVector,
    bounds: &Bounds,
    config: &GdpmConfig,
    mut observer: F,
) -> Result<GdpmResult>
where
    F: FnMut(Step<'_>),
{
    config.validate()?;
    let (n, k) = (model.n(), model.k());
    bounds.require_shape(n, k)?;
    if let Some((row, message)) = bounds.violation(model.x().matrix(), START_SLACK) {
        return Err(Error::Infeasible { row, message });
    }
    let start = Instant::now();
    let lr = config.learning_rate;
    let x0 = model.x().matrix().clone();

    let first = evaluate(model, s, config).map_err(|e| e.at_iteration(0))?;
    let initial_objective = first.objective;
    let mut unverified = usize::from(!first.verified);
    let mut trace = vec![IterationRecord {
        iter: 0,
        objective: first.objective,
        grad_norm: first.gradient.norm(),
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut best = (first.objective, model.x().clone(), 0, BestSource::Iterate);

    let mut x = x0.clone();
    let mut current = first;
    let mut previous_objective: Option<f64> = None;
    let mut accumulated = DMatrix::<f64>::zeros(n, k);
    let mut alpha_sum = 0.0;
    let mut converged = false;

    for t in 0..config.max_iters {
        if let Some(prev) = previous_objective {
            if prev <= 0.0 || current.objective / prev > config.convergence_ratio {
                converged = true;
                break;
            }
        }
        let step = |e: Error| e.at_iteration(t);

        let v = project_matrix(&(&x - &current.gradient / lr), bounds).map_err(step)?;
        let alpha = (t as f64 + 1.0) / 2.0;
        accumulated += &current.gradient * alpha;
        let w = project_matrix(&(&x0 - &accumulated / (2.0 * lr)), bounds).map_err(step)?;
        alpha_sum += alpha;
        let tau = alpha / alpha_sum;
        let mut next = &v * tau + &w * (1.0 - tau);
        clamp_to(bounds, &mut next);
        observer(Step {
            iter: t,
            x: &x,
            v: &v,
            w: &w,
            next: &next,
        });

        if config.track_objective {
            let v_matrix = as_topic_matrix(v).map_err(step)?;
            let v_model = model.with_x(v_matrix.clone()).map_err(step)?;
            let (fv, ok) = objective_only(&v_model, s, config).map_err(step)?;
            unverified += usize::from(!ok);
            if fv < best.0 {
                best = (fv, v_matrix, t, BestSource::GradientStep);
            }
        }

        let next_x = as_topic_matrix(next.clone()).map_err(|e| e.at_iteration(t + 1))?;
        let next_model = model
            .with_x(next_x.clone())
            .map_err(|e| e.at_iteration(t + 1))?;
        let eval = evaluate(&next_model, s, config).map_err(|e| e.at_iteration(t + 1))?;
        unverified += usize::from(!eval.verified);
        trace.push(IterationRecord {
            iter: t + 1,
            objective: eval.objective,
            grad_norm: eval.gradient.norm(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if eval.objective < best.0 {
            best = (eval.objective, next_x, t + 1, BestSource::Iterate);
        }
        previous_objective = Some(current.objective);
        current = eval;
        x = next;
    }

    Ok(GdpmResult {
        x_best: best.1,
        best_objective: best.0,
        best_iter: best.2,
        best_source: best.3,
        initial_objective,
        trace,
        converged,
        unverified_iterations: unverified,
    })
}

/// Writes the trace as CSV with header `iter,objective,grad_norm`, plus a
/// `seconds` column when `with_seconds` is set. Without it the output is
/// reproducible byte for byte.
pub fn write_trace_csv<W: Write>(
    trace: &[IterationRecord],
    with_seconds: bool,
    mut out: W,
) -> Result<()> {
    if with_seconds {
        writeln!(out, "iter,objective,grad_norm,seconds")?;
    } else {
        writeln!(out, "iter,objective,grad_norm")?;
    }
    for r in trace {
        write!(out, "{},{:.17e},{:.17e}", r.iter, r.objective, r.grad_norm)?;
        if with_seconds {
            write!(out, ",{:.6}", r.seconds)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
