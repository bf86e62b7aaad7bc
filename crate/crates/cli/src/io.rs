//! File loading and writing with path context, plus synthesis of any input
//! that was not supplied as a file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use fjtl::synth::{gen_graph, gen_opinions, gen_x, gen_y, OpinionDistribution, SynthConfig};
use fjtl::{Graph, LowRankModel, OpinionVector, TopicMatrixX, TopicMatrixY};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: fjtl::Error },

    #[error(transparent)]
    Core(#[from] fjtl::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl CliError {
    /// 3 for solver and conditioning failures, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::File { source, .. } | CliError::Core(source) if source.is_numerical() => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn at(path: &Path) -> impl FnOnce(fjtl::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| at(path)(e.into()))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| at(path)(e.into()))
}

/// Runs `write` against a fresh file at `path` and flushes it.
pub fn write_file<F>(path: &Path, write: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> fjtl::Result<()>,
{
    let mut out = create(path)?;
    write(&mut out).map_err(at(path))?;
    out.flush().map_err(|e| at(path)(e.into()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = create(path)?;
    let json_err = |source| CliError::Json {
        path: path.to_path_buf(),
        source,
    };
    serde_json::to_writer_pretty(&mut out, value).map_err(json_err)?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| at(path)(e.into()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| at(dir)(e.into()))
}

pub fn read_graph(path: &Path) -> CliResult<Graph> {
    Graph::read_edge_list(open(path)?)
        .map(|(g, _)| g)
        .map_err(at(path))
}

pub fn read_opinions(path: &Path) -> CliResult<OpinionVector> {
    OpinionVector::read(open(path)?).map_err(at(path))
}

pub fn read_x(path: &Path) -> CliResult<TopicMatrixX> {
    TopicMatrixX::read(open(path)?).map_err(at(path))
}

pub fn read_y(path: &Path) -> CliResult<TopicMatrixY> {
    TopicMatrixY::read(open(path)?).map_err(at(path))
}

/// Inputs shared by every command that builds a model. Anything not given
/// as a file is generated from the synthetic settings.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Edge list, one `u v [w]` per line.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Innate opinions, one per line.
    #[arg(long)]
    pub opinions: Option<PathBuf>,
    /// User-topic matrix (n rows, k columns, tab separated).
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Influence-topic matrix (k rows, n columns, tab separated).
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Timeline strength.
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    #[command(flatten)]
    pub synth: SynthArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// Users to generate when no graph file is given.
    #[arg(long)]
    pub n: Option<usize>,
    /// Topics to generate when no topic matrices are given.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Innate opinion distribution for generated opinions.
    #[arg(long, default_value = "powerlaw", value_parser = parse_dist)]
    pub dist: OpinionDistribution,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

fn parse_dist(s: &str) -> Result<OpinionDistribution, String> {
    s.parse().map_err(|e: fjtl::Error| e.to_string())
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            opinion_dist: self.dist,
            k: self.k,
            ..Default::default()
        }
    }
}

/// Where each input came from.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub graph: String,
    pub opinions: String,
    pub x: String,
    pub y: String,
}

fn origin(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map_or_else(|| "synthetic".to_string(), |p| p.display().to_string())
}

pub struct Loaded {
    pub model: LowRankModel,
    pub s: OpinionVector,
    pub provenance: Provenance,
}

impl InputArgs {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(CliError::Usage(format!(
                "--c must be finite and nonnegative, got {}",
                self.c
            )));
        }
        for path in [&self.graph, &self.opinions, &self.x, &self.y]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(CliError::Usage(format!("{}: no such file", path.display())));
            }
        }
        Ok(())
    }

    pub fn load(&self) -> CliResult<Loaded> {
        self.validate()?;
        let cfg = self.synth.config();
        let graph = match &self.graph {
            Some(p) => read_graph(p)?,
            None => {
                let n = self
                    .synth
                    .n
                    .ok_or_else(|| CliError::Usage("either --graph or --n must be given".into()))?;
                gen_graph(n, &cfg)?
            }
        };
        let n = graph.n();
        if let Some(requested) = self.synth.n {
            if requested != n {
                return Err(CliError::Usage(format!(
                    "--n {requested} disagrees with the graph's {n} vertices"
                )));
            }
        }
        let s = match &self.opinions {
            Some(p) => read_opinions(p)?,
            None => gen_opinions(n, &cfg)?,
        };
        let x = match &self.x {
            Some(p) => read_x(p)?,
            None => gen_x(n, &cfg)?,
        };
        let y = match &self.y {
            Some(p) => read_y(p)?,
            None => gen_y(n, &cfg, &s)?,
        };
        if s.len() != n {
            return Err(CliError::Usage(format!(
                "{} opinions for a graph with {n} vertices",
                s.len()
            )));
        }
        let model = LowRankModel::new(Arc::new(graph), x, Arc::new(y), self.c)?;
        Ok(Loaded {
            model,
            s,
            provenance: Provenance {
                graph: origin(&self.graph),
                opinions: origin(&self.opinions),
                x: origin(&self.x),
                y: origin(&self.y),
            },
        })
    }
}
