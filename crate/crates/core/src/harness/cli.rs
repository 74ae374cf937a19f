//! The `rml` command line. Every subcommand builds a [`RunConfig`] (optionally
//! starting from `--config`) and hands it to [`run`].

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{run, Family, GeneratorKind, ObjectiveKind, RunConfig, Task, OUT_ENV};
use crate::error::{Error, Result};
use crate::geo::{DistanceMethod, TransportMethod, DEFAULT_BASIS_SIZE};
use crate::metrics::ConstantParametrization;
use crate::objectives::DistanceBackend;

#[derive(Debug, Parser)]
#[command(name = "rml", version, about = "Riemannian metric fields: geodesics, transport, sampling and metric learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Base RunConfig (TOML); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Metric document (TOML).
    #[arg(long)]
    pub metric: Option<PathBuf>,
    /// Integration steps for geodesics.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Shooting,
    Bvp,
    Curve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportArg {
    Ode,
    Schild,
    Pole,
    Fanning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    Factor,
    Direct,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        kind: GeneratorKind,
        /// Points per class (spiral), grid side (aniso-grid) or trajectories.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        turns: Option<f64>,
        #[arg(long)]
        scale_x: Option<f64>,
        #[arg(long)]
        scale_y: Option<f64>,
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long)]
        samples_per: Option<usize>,
    },
    /// Fit a metric family to a dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        family: Option<Family>,
        #[arg(long, value_enum)]
        parametrization: Option<ParamArg>,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveKind>,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        squared: bool,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        line_search: bool,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        n_centers: Option<usize>,
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Use the kNN-graph distance backend with this many neighbors.
        #[arg(long)]
        graph_k: Option<usize>,
    },
    /// Leave-one-out k-NN accuracy of a metric on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        graph_k: Option<usize>,
    },
    /// Geodesic distance between two points.
    Dist {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Geodesic path from `x` with velocity `v`, or from `x` to `y`.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Parallel transport of `w` along the geodesic from `x` with velocity `v`.
    Transport {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        method: Option<TransportArg>,
        /// Rungs (ladders) or steps (fanning).
        #[arg(long, default_value_t = 16)]
        rungs: usize,
    },
    /// Sample points with density ∝ √det g in a box.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lower: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        upper: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Plot tables: the loss curve of a fit report (`--input`), or a geodesic.
    ExportPlot {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Option<Vec<f64>>,
    },
    /// Run the task described by a RunConfig file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
}

fn base(common: &Common, task: Task) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.task = task;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.out.is_some() {
        cfg.output = common.out.clone();
    }
    if common.input.is_some() {
        cfg.input = common.input.clone();
    }
    if common.metric.is_some() {
        cfg.metric_file = common.metric.clone();
        cfg.metric = None;
    }
    if let Some(s) = common.steps {
        cfg.solver.steps = s;
    }
    Ok(cfg)
}

fn method(m: Option<MethodArg>, current: DistanceMethod) -> DistanceMethod {
    match m {
        None => current,
        Some(MethodArg::Shooting) => DistanceMethod::Shooting,
        Some(MethodArg::Bvp) => DistanceMethod::Bvp,
        Some(MethodArg::Curve) => DistanceMethod::Curve { basis_size: DEFAULT_BASIS_SIZE },
    }
}

fn set(slot: &mut Vec<f64>, v: Option<Vec<f64>>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Translates parsed arguments into the [`RunConfig`] they describe.
pub fn to_config(command: Command) -> Result<RunConfig> {
    Ok(match command {
        Command::Gen { common, kind, n, noise, turns, scale_x, scale_y, jitter, samples_per } => {
            let mut cfg = base(&common, Task::Gen)?;
            let g = &mut cfg.generator;
            g.kind = kind;
            if let Some(n) = n {
                g.spiral.n_per_class = n;
                g.grid.n = n;
                g.trajectories.n_traj = n;
            }
            if let Some(x) = noise {
                g.spiral.noise = x;
                g.trajectories.noise = x;
            }
            if let Some(x) = turns {
                g.spiral.turns = x;
            }
            if let Some(x) = scale_x {
                g.grid.scale_x = x;
            }
            if let Some(x) = scale_y {
                g.grid.scale_y = x;
            }
            if let Some(x) = jitter {
                g.grid.jitter = x;
            }
            if let Some(x) = samples_per {
                g.trajectories.samples_per = x;
            }
            cfg
        }
        Command::Fit {
            common,
            family,
            parametrization,
            objective,
            margin,
            squared,
            max_iter,
            step_size,
            line_search,
            batch_size,
            n_centers,
            bandwidth,
            graph_k,
        } => {
            let mut cfg = base(&common, Task::Fit)?;
            if let Some(f) = family {
                cfg.family.kind = f;
            }
            if let Some(p) = parametrization {
                cfg.family.parametrization = match p {
                    ParamArg::Factor => ConstantParametrization::Factor,
                    ParamArg::Direct => ConstantParametrization::Direct,
                };
            }
            if let Some(o) = objective {
                cfg.objective.kind = o;
            }
            if let Some(m) = margin {
                cfg.objective.margin = m;
            }
            cfg.objective.squared |= squared;
            if let Some(m) = max_iter {
                cfg.fit.max_iter = m;
            }
            if let Some(s) = step_size {
                cfg.fit.step_size = s;
            }
            cfg.fit.line_search |= line_search;
            if batch_size.is_some() {
                cfg.fit.batch_size = batch_size;
            }
            if let Some(n) = n_centers {
                cfg.family.n_centers = n;
            }
            if bandwidth.is_some() {
                cfg.family.bandwidth = bandwidth;
            }
            if let Some(k) = graph_k {
                cfg.objective.backend = DistanceBackend::graph(k);
            }
            cfg
        }
        Command::Eval { common, k, graph_k } => {
            let mut cfg = base(&common, Task::Eval)?;
            if let Some(k) = k {
                cfg.query.k = k;
            }
            if let Some(k) = graph_k {
                cfg.objective.backend = DistanceBackend::graph(k);
            }
            cfg
        }
        Command::Dist { common, x, y, method: m } => {
            let mut cfg = base(&common, Task::Dist)?;
            set(&mut cfg.query.x, x);
            set(&mut cfg.query.y, y);
            cfg.query.distance = method(m, cfg.query.distance);
            cfg
        }
        Command::Geodesic { common, x, v, y, method: m } => {
            let mut cfg = base(&common, Task::Geodesic)?;
            set(&mut cfg.query.x, x);
            set(&mut cfg.query.v, v);
            set(&mut cfg.query.y, y);
            cfg.query.distance = method(m, cfg.query.distance);
            cfg
        }
        Command::Transport { common, x, v, w, method: m, rungs } => {
            let mut cfg = base(&common, Task::Transport)?;
            set(&mut cfg.query.x, x);
            set(&mut cfg.query.v, v);
            set(&mut cfg.query.w, w);
            if let Some(m) = m {
                cfg.query.transport = match m {
                    TransportArg::Ode => TransportMethod::Ode,
                    TransportArg::Schild => TransportMethod::Schild { rungs },
                    TransportArg::Pole => TransportMethod::Pole { rungs },
                    TransportArg::Fanning => TransportMethod::Fanning { steps: rungs },
                };
            }
            cfg
        }
        Command::Sample { common, lower, upper, n } => {
            let mut cfg = base(&common, Task::Sample)?;
            set(&mut cfg.query.lower, lower);
            set(&mut cfg.query.upper, upper);
            if let Some(n) = n {
                cfg.query.n = n;
            }
            cfg
        }
        Command::ExportPlot { common, x, v, y } => {
            let mut cfg = base(&common, Task::ExportPlot)?;
            set(&mut cfg.query.x, x);
            set(&mut cfg.query.v, v);
            set(&mut cfg.query.y, y);
            cfg
        }
        Command::Run { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if out.is_some() {
                cfg.output = out;
            }
            cfg
        }
    })
}

/// 0 on success, 2 on validation errors, 3 when a solver did not converge,
/// 1 for any other failure.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_no_convergence() {
        return 3;
    }
    let mut e = err;
    while let Error::Pair { source, .. } = e {
        e = source;
    }
    match e {
        Error::InvalidArgument(_) | Error::Shape(_) | Error::DimensionMismatch { .. } | Error::Parse(_) | Error::Domain(_) => 2,
        _ => 1,
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match to_config(cli.command).and_then(|cfg| run(&cfg)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
