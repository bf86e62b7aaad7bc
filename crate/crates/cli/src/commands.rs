//! The four subcommands. Each returns a JSON-serializable report; reports
//! carry no timings so a fixed seed reproduces them byte for byte. Wall
//! times go to a separate `timings.json`.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use fjtl::analysis::{analyze, AnalysisReport};
use fjtl::baselines::{run_baseline, BaselineConfig, Bl1Selection, Variant};
use fjtl::fj::{equilibrium, EquilibriumMode};
use fjtl::gdpm::{optimize, write_trace_csv, BestSource, GdpmConfig, IterationRecord};
use fjtl::lowrank::{AdjacencyNorms, SpectralCondition};
use fjtl::synth::{gen_graph, gen_opinions, gen_x, gen_y};
use fjtl::{indices, Bounds, Indices, LowRankModel};
use serde::Serialize;

use crate::io::{
    ensure_dir, read_x, write_file, write_json, CliError, CliResult, InputArgs, Provenance,
    SynthArgs,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Accuracy of the timeline-augmented index.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Directory for `report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub c: f64,
    pub eps: f64,
    pub inputs: Provenance,
    /// Polarization, disagreement and index on the follow graph alone.
    pub graph_only: Indices,
    /// The same quantities on the graph plus the timeline edges.
    pub augmented: Indices,
    pub adjacency_norms: AdjacencyNorms,
    pub spectral_condition: SpectralCondition,
    /// False when the augmented estimate is not backed by the spectral condition.
    pub verified: bool,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<SimulateReport> {
    positive("--eps", args.eps)?;
    let loaded = args.input.load()?;
    let (model, s) = (&loaded.model, &loaded.s);
    let z_graph = equilibrium(model.graph(), s, EquilibriumMode::Solver)?;
    let graph_only = indices(model.graph(), s, &z_graph)?;

    let approx = model.approx_opinions(s, args.eps / (model.n() as f64).sqrt())?;
    let augmented = augmented_indices(model, &approx.z)?;
    let spectral_condition = match approx.condition {
        Some(c) => c,
        None => model.spectral_condition()?,
    };
    let report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        n: model.n(),
        m: model.graph().m(),
        k: model.k(),
        c: model.c(),
        eps: args.eps,
        inputs: loaded.provenance.clone(),
        graph_only,
        augmented,
        adjacency_norms: model.adjacency_norms(),
        spectral_condition,
        verified: approx.verified,
    };
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

/// `P = ‖z‖²` and `D = zᵀ (L + L_X) z`, with `L_X = diag(A_X 1) − A_X`.
fn augmented_indices(model: &LowRankModel, z: &[f64]) -> CliResult<Indices> {
    let polarization: f64 = z.iter().map(|v| v * v).sum();
    let ax_z = model.ax_matvec(z)?;
    let timeline: f64 = z
        .iter()
        .zip(model.ax_degree())
        .zip(&ax_z)
        .map(|((zi, d), a)| d * zi * zi - zi * a)
        .sum();
    let disagreement = model.graph().laplacian_quadratic_form(z)? + timeline;
    Ok(Indices {
        polarization,
        disagreement,
        index: polarization + disagreement,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Gdpm,
    Bl1,
    Bl2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Bl1Rule {
    AsListed,
    AsProse,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Per-entry budget: each X_ij may move by at most theta.
    #[arg(long, default_value_t = 0.1)]
    pub theta: f64,
    #[arg(long, value_enum, default_value_t = Algo::Gdpm)]
    pub algo: Algo,
    /// Step constant of the projected-gradient method.
    #[arg(long, default_value_t = 10.0)]
    pub learning_rate: f64,
    /// Iteration cap; defaults to 100 for gdpm and 10 for the baselines.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Accuracy of each gradient (gdpm) or objective (baselines).
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Topic columns that must not change, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub frozen_topics: Vec<usize>,
    /// Penalized-topic rule for bl1.
    #[arg(long, value_enum, default_value_t = Bl1Rule::AsListed)]
    pub bl1_rule: Bl1Rule,
    /// Directory for `report.json`, `trace.csv`, `x_best.tsv` and `timings.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
pub struct OptimizeReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub algo: Algo,
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub theta: f64,
    pub learning_rate: f64,
    pub iters: usize,
    pub eps: f64,
    pub frozen_topics: Vec<usize>,
    pub inputs: Provenance,
    pub initial_objective: f64,
    pub best_objective: f64,
    pub reduction_ratio: f64,
    pub best_iter: usize,
    /// `iterate` or `gradient_step` for gdpm; absent for the baselines.
    pub best_source: Option<BestSource>,
    pub iterations_run: usize,
    pub converged: Option<bool>,
    pub unverified_iterations: usize,
}

#[derive(Serialize)]
struct Timings {
    total_seconds: f64,
    iteration_seconds: Vec<f64>,
}

pub fn optimize_cmd(args: &OptimizeArgs) -> CliResult<OptimizeReport> {
    if !(0.0..=1.0).contains(&args.theta) {
        return Err(CliError::Usage(format!(
            "--theta must lie in [0, 1], got {}",
            args.theta
        )));
    }
    positive("--eps", args.eps)?;
    positive("--learning-rate", args.learning_rate)?;
    let loaded = args.input.load()?;
    let (model, s) = (&loaded.model, &loaded.s);
    if let Some(&j) = args.frozen_topics.iter().find(|&&j| j >= model.k()) {
        return Err(CliError::Usage(format!(
            "frozen topic {j} out of range for {} topics",
            model.k()
        )));
    }
    let bounds = Bounds::from_theta(model.x(), args.theta, &args.frozen_topics)?;
    let start = Instant::now();

    struct Outcome {
        x_best: fjtl::TopicMatrixX,
        initial: f64,
        best: f64,
        best_iter: usize,
        best_source: Option<BestSource>,
        trace: Vec<IterationRecord>,
        converged: Option<bool>,
        unverified: usize,
        iters: usize,
    }
    let outcome = match args.algo {
        Algo::Gdpm => {
            let config = GdpmConfig {
                learning_rate: args.learning_rate,
                max_iters: args.iters.unwrap_or(100),
                grad_eps: args.eps,
                ..Default::default()
            };
            let r = optimize(model, s, &bounds, &config)?;
            Outcome {
                x_best: r.x_best,
                initial: r.initial_objective,
                best: r.best_objective,
                best_iter: r.best_iter,
                best_source: Some(r.best_source),
                trace: r.trace,
                converged: Some(r.converged),
                unverified: r.unverified_iterations,
                iters: config.max_iters,
            }
        }
        Algo::Bl1 | Algo::Bl2 => {
            let variant = if args.algo == Algo::Bl1 {
                Variant::Bl1
            } else {
                Variant::Bl2
            };
            let config = BaselineConfig {
                t_max: args.iters.unwrap_or(10),
                eps: args.eps,
                bl1_selection: match args.bl1_rule {
                    Bl1Rule::AsListed => Bl1Selection::AsListed,
                    Bl1Rule::AsProse => Bl1Selection::AsProse,
                },
                ..BaselineConfig::new(variant)
            };
            let r = run_baseline(model, s, &bounds, &config)?;
            Outcome {
                x_best: r.x_best,
                initial: r.initial_objective,
                best: r.best_objective,
                best_iter: r.best_iter,
                best_source: None,
                trace: r.trace,
                converged: None,
                unverified: r.unverified_iterations,
                iters: config.t_max,
            }
        }
    };
    let total_seconds = start.elapsed().as_secs_f64();
    let report = OptimizeReport {
        schema_version: SCHEMA_VERSION,
        command: "optimize",
        algo: args.algo,
        n: model.n(),
        k: model.k(),
        c: model.c(),
        theta: args.theta,
        learning_rate: args.learning_rate,
        iters: outcome.iters,
        eps: args.eps,
        frozen_topics: args.frozen_topics.clone(),
        inputs: loaded.provenance.clone(),
        initial_objective: outcome.initial,
        best_objective: outcome.best,
        reduction_ratio: fjtl::gdpm::reduction_ratio(outcome.initial, outcome.best)?,
        best_iter: outcome.best_iter,
        best_source: outcome.best_source,
        iterations_run: outcome.trace.len().saturating_sub(1),
        converged: outcome.converged,
        unverified_iterations: outcome.unverified,
    };
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("report.json"), &report)?;
        write_file(&dir.join("trace.csv"), |w| {
            write_trace_csv(&outcome.trace, false, w)
        })?;
        write_file(&dir.join("x_best.tsv"), |w| outcome.x_best.write(w))?;
        let timings = Timings {
            total_seconds,
            iteration_seconds: outcome.trace.iter().map(|r| r.seconds).collect(),
        };
        write_json(&dir.join("timings.json"), &timings)?;
    }
    Ok(report)
}

#[derive(Args, Debug)]
pub struct SynthCmdArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Directory for `graph.txt`, `opinions.txt`, `x.tsv`, `y.tsv` and `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
pub struct SynthManifest {
    pub schema_version: u32,
    pub command: &'static str,
    pub n: usize,
    pub m: usize,
    pub config: fjtl::synth::SynthConfig,
    pub files: Vec<&'static str>,
}

pub fn synth(args: &SynthCmdArgs) -> CliResult<SynthManifest> {
    let n = args
        .synth
        .n
        .ok_or_else(|| CliError::Usage("--n is required".into()))?;
    let cfg = args.synth.config();
    let g = gen_graph(n, &cfg)?;
    let s = gen_opinions(n, &cfg)?;
    let x = gen_x(n, &cfg)?;
    let y = gen_y(n, &cfg, &s)?;
    let dir = &args.out;
    ensure_dir(dir)?;
    write_file(&dir.join("graph.txt"), |w| g.write_edge_list(w))?;
    write_file(&dir.join("opinions.txt"), |w| s.write(w))?;
    write_file(&dir.join("x.tsv"), |w| x.write(w))?;
    write_file(&dir.join("y.tsv"), |w| y.write(w))?;
    let manifest = SynthManifest {
        schema_version: SCHEMA_VERSION,
        command: "synth",
        n,
        m: g.m(),
        config: cfg,
        files: vec!["graph.txt", "opinions.txt", "x.tsv", "y.tsv"],
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Inputs describing the model before optimization; `--x` is the original matrix.
    #[command(flatten)]
    pub input: InputArgs,
    /// User-topic matrix after optimization.
    #[arg(long)]
    pub after: PathBuf,
    /// Accuracy of the opinion estimates.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Number of equal-size user groups for the degree statistics.
    #[arg(long, default_value_t = 5)]
    pub groups: usize,
    /// Directory for `report.json` and `topics.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub inputs: Provenance,
    pub after: String,
    #[serde(flatten)]
    pub analysis: AnalysisReport,
}

pub fn analyze_cmd(args: &AnalyzeArgs) -> CliResult<AnalyzeReport> {
    positive("--eps", args.eps)?;
    if !args.after.is_file() {
        return Err(CliError::Usage(format!(
            "{}: no such file",
            args.after.display()
        )));
    }
    let loaded = args.input.load()?;
    let after = read_x(&args.after)?;
    let analysis = analyze(&loaded.model, &after, &loaded.s, args.eps, args.groups)?;
    let report = AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        command: "analyze",
        inputs: loaded.provenance.clone(),
        after: args.after.display().to_string(),
        analysis,
    };
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("report.json"), &report)?;
        write_file(&dir.join("topics.csv"), |w| {
            use std::io::Write;
            writeln!(w, "topic,delta,tau_s,tau_z_before,tau_z_after")?;
            for t in &report.analysis.topics {
                writeln!(
                    w,
                    "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                    t.topic, t.delta, t.tau_s, t.tau_z_before, t.tau_z_after
                )?;
            }
            Ok(())
        })?;
    }
    Ok(report)
}

fn positive(flag: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag} must be positive, got {v}")))
    }
}
