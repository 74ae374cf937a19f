use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{gen_aniso_grid, gen_spiral, gen_trajectories, AnisoGridParams, LabeledDataset, SpiralParams, TrajectoryParams};
use super::io::{self, check_version, FORMAT_VERSION};
use super::knn::loo_accuracy;
use crate::error::{Error, Result};
use crate::geo::{
    exp_map, fanning_scheme, fmt_f64, geodesic_bvp, geodesic_regression_curve, log_map_shooting, parallel_transport_ode,
    pole_ladder, riemannian_distance, sample_by_volume, schild_ladder, BoundingBox, DistanceMethod, GeodesicPath,
    SolverConfig, TransportMethod,
};
use crate::learn::{fit, FitConfig, FitReport, Loss, Objective, Termination};
use crate::manifold::{MetricField, SpdMatrix};
use crate::metrics::{ConstantMetric, ConstantParametrization, DensityMetric, KernelMetric, MetricSpec, Parametrized, VoronoiMetric};
use crate::objectives::{ContrastiveVariant, DistanceBackend, PairSets, TripletSet};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "RML_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[default]
    Gen,
    Fit,
    Eval,
    Dist,
    Geodesic,
    Transport,
    Sample,
    ExportPlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    #[default]
    Spiral,
    AnisoGrid,
    Trajectories,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub spiral: SpiralParams,
    pub grid: AnisoGridParams,
    pub trajectories: TrajectoryParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Constant,
    Voronoi,
    Kernel,
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    pub kind: Family,
    pub parametrization: ConstantParametrization,
    /// Centers drawn from the data for Voronoi/kernel families.
    pub n_centers: usize,
    /// Median pairwise distance of the centers when unset.
    pub bandwidth: Option<f64>,
    pub floor: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig { kind: Family::Constant, parametrization: ConstantParametrization::Factor, n_centers: 10, bandwidth: None, floor: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    #[default]
    Triplet,
    Contrastive,
    Regression,
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    pub margin: f64,
    pub variant: ContrastiveVariant,
    pub squared: bool,
    pub backend: DistanceBackend,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            kind: ObjectiveKind::Triplet,
            margin: 1.0,
            variant: ContrastiveVariant::SumDiff,
            squared: false,
            backend: DistanceBackend::Auto,
        }
    }
}

/// Inputs of the point-wise tasks (`dist`, `geodesic`, `transport`,
/// `sample`, `eval`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryConfig {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Geodesic initial velocity.
    pub v: Vec<f64>,
    /// Vector to transport.
    pub w: Vec<f64>,
    pub distance: DistanceMethod,
    pub transport: TransportMethod,
    pub k: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n: usize,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            x: Vec::new(),
            y: Vec::new(),
            v: Vec::new(),
            w: Vec::new(),
            distance: DistanceMethod::Shooting,
            transport: TransportMethod::Ode,
            k: 1,
            lower: Vec::new(),
            upper: Vec::new(),
            n: 1000,
        }
    }
}

/// Everything one CLI invocation does, as a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub format_version: u32,
    pub task: Task,
    pub seed: u64,
    /// Dataset, observations, trajectories or fit report, depending on the task.
    pub input: Option<PathBuf>,
    /// Output directory; falls back to `$RML_OUT`, then `.`.
    pub output: Option<PathBuf>,
    /// Metric document (`format_version` + `[metric]`).
    pub metric_file: Option<PathBuf>,
    /// Inline metric; takes precedence over `metric_file`.
    pub metric: Option<MetricSpec>,
    pub generator: GeneratorConfig,
    pub family: FamilyConfig,
    pub objective: ObjectiveConfig,
    pub solver: SolverConfig,
    pub fit: FitConfig,
    pub query: QueryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format_version: FORMAT_VERSION,
            task: Task::default(),
            seed: 0,
            input: None,
            output: None,
            metric_file: None,
            metric: None,
            generator: GeneratorConfig::default(),
            family: FamilyConfig::default(),
            objective: ObjectiveConfig::default(),
            solver: SolverConfig::default(),
            fit: FitConfig::default(),
            query: QueryConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        check_version(cfg.format_version)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn input_path(&self) -> Result<&Path> {
        let p = self.input.as_deref().ok_or_else(|| Error::InvalidArgument(format!("task {:?} needs an input file", self.task)))?;
        if !p.exists() {
            return Err(Error::InvalidArgument(format!("input {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn metric_spec(&self) -> Result<MetricSpec> {
        if let Some(m) = &self.metric {
            return Ok(m.clone());
        }
        let p = self
            .metric_file
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("task {:?} needs a metric", self.task)))?;
        if !p.exists() {
            return Err(Error::InvalidArgument(format!("metric file {} does not exist", p.display())));
        }
        io::metric_from_toml(&fs::read_to_string(p)?)
    }

    fn build_metric(&self) -> Result<Arc<dyn MetricField>> {
        self.metric_spec()?.build()
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.format_version)?;
        self.solver.validate()?;
        self.fit.validate()
    }
}

fn vector(name: &str, v: &[f64], dim: usize) -> Result<DVector<f64>> {
    if v.len() != dim {
        return Err(Error::InvalidArgument(format!("--{name} needs {dim} coordinates, got {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

fn path_csv(path: &GeodesicPath) -> Result<String> {
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// `t,x0,…` rows only.
fn plot_table(path: &GeodesicPath) -> String {
    let mut out = String::from("t");
    for i in 0..path.dim() {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (t, p) in path.times.iter().zip(&path.points) {
        out.push_str(&fmt_f64(*t));
        for c in p.iter() {
            out.push(',');
            out.push_str(&fmt_f64(*c));
        }
        out.push('\n');
    }
    out
}

fn vector_json(key: &str, v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|c| fmt_f64(*c)).collect();
    format!("{{\n  \"{key}\": [{}]\n}}\n", parts.join(", "))
}

/// Geodesic from `x` with velocity `v`, or between `x` and `y` by the
/// configured distance method.
fn geodesic(cfg: &RunConfig, field: &dyn MetricField) -> Result<GeodesicPath> {
    let d = field.dim();
    let q = &cfg.query;
    let x = vector("x", &q.x, d)?;
    if !q.v.is_empty() {
        return exp_map(field, &x, &vector("v", &q.v, d)?, &cfg.solver);
    }
    let y = vector("y", &q.y, d)?;
    match q.distance {
        DistanceMethod::Shooting => exp_map(field, &x, &log_map_shooting(field, &x, &y, &cfg.solver)?, &cfg.solver),
        DistanceMethod::Bvp => geodesic_bvp(field, &x, &y, &cfg.solver),
        DistanceMethod::Curve { basis_size } => geodesic_regression_curve(field, &x, &y, basis_size, &cfg.solver),
    }
}

fn median_pairwise(points: &[DVector<f64>]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push((&points[i] - &points[j]).norm());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d[d.len() / 2];
    if m > 0.0 { m } else { 1.0 }
}

fn centers(points: &[DVector<f64>], count: usize, seed: u64) -> Vec<DVector<f64>> {
    let count = count.clamp(1, points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, points.len(), count).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i].clone()).collect()
}

fn fit_family<F>(family: &F, objective: &Objective, cfg: &FitConfig) -> Result<(MetricSpec, FitReport)>
where
    F: Parametrized + MetricField,
    for<'a> MetricSpec: From<&'a F>,
{
    let report = fit(family, objective, cfg)?;
    let fitted = family.unpack(&family.project(&report.params, cfg.spd_floor))?;
    Ok((MetricSpec::from(&fitted), report))
}

fn load_loss(cfg: &RunConfig) -> Result<(Loss, Vec<DVector<f64>>, usize)> {
    let input = cfg.input_path()?;
    let text = fs::read_to_string(input)?;
    let oc = &cfg.objective;
    Ok(match oc.kind {
        ObjectiveKind::Triplet | ObjectiveKind::Contrastive => {
            let data = io::dataset_from_str(&text)?;
            let loss = if oc.kind == ObjectiveKind::Triplet {
                Loss::Triplet { triplets: TripletSet::nearest_from_labels(&data.points, &data.labels)?, margin: oc.margin }
            } else {
                Loss::Contrastive { pairs: PairSets::from_labels(&data.points, &data.labels)?, variant: oc.variant }
            };
            let d = data.dim();
            (loss, data.points, d)
        }
        ObjectiveKind::Regression => {
            let obs = io::observations_from_str(&text)?;
            let pts = obs.observations.iter().flat_map(|o| [o.x.clone(), o.y.clone()]).collect::<Vec<_>>();
            let d = pts.first().map_or(0, |p| p.len());
            (Loss::DistanceRegression { observations: obs, squared: oc.squared }, pts, d)
        }
        ObjectiveKind::Trajectory => {
            let set = io::trajectories_from_str(&text)?;
            let pts = set.trajectories.iter().flat_map(|t| t.points.clone()).collect::<Vec<_>>();
            let d = pts.first().map_or(0, |p| p.len());
            (Loss::Trajectory { trajectories: set }, pts, d)
        }
    })
}

fn run_fit(cfg: &RunConfig, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let (loss, pts, d) = load_loss(cfg)?;
    if pts.is_empty() {
        return Err(Error::InvalidArgument("fit input holds no points".into()));
    }
    let objective = Objective { loss, backend: cfg.objective.backend.clone(), solver: cfg.solver.clone() };
    let fit_cfg = FitConfig { seed: cfg.seed, ..cfg.fit.clone() };
    let fc = &cfg.family;
    let (spec, report) = match fc.kind {
        Family::Constant => {
            let fam = match fc.parametrization {
                ConstantParametrization::Factor => ConstantMetric::identity(d),
                ConstantParametrization::Direct => ConstantMetric::direct(DMatrix::identity(d, d))?,
            };
            fit_family(&fam, &objective, &fit_cfg)?
        }
        Family::Voronoi => {
            let cs = centers(&pts, fc.n_centers, cfg.seed);
            let locals = vec![SpdMatrix::identity(d); cs.len()];
            fit_family(&VoronoiMetric::new(cs, locals)?, &objective, &fit_cfg)?
        }
        Family::Kernel => {
            let cs = centers(&pts, fc.n_centers, cfg.seed);
            let bw = fc.bandwidth.unwrap_or_else(|| median_pairwise(&cs));
            let locals = vec![SpdMatrix::identity(d); cs.len()];
            fit_family(&KernelMetric::new(cs, locals, bw, fc.floor)?, &objective, &fit_cfg)?
        }
        Family::Density => {
            let cs = centers(&pts, fc.n_centers, cfg.seed);
            let bw = fc.bandwidth.unwrap_or_else(|| median_pairwise(&cs));
            fit_family(&DensityMetric::new(cs, bw, fc.floor)?, &objective, &fit_cfg)?
        }
    };
    write(dir, "metric.toml", &io::metric_to_toml(&spec)?, written)?;
    write(dir, "fit_report.json", &io::fit_report_to_json(&spec, &report)?, written)?;
    write(dir, "loss.csv", &report.loss_csv(), written)?;
    // outputs stay on disk for inspection, but a diverged fit is a failure
    match &report.termination {
        Termination::Error { message } => Err(Error::Diverged(message.clone())),
        _ => Ok(()),
    }
}

/// Runs one task and returns the files it wrote.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let q = &cfg.query;
    match cfg.task {
        Task::Gen => {
            let g = &cfg.generator;
            match g.kind {
                GeneratorKind::Spiral | GeneratorKind::AnisoGrid => {
                    let data: LabeledDataset = if g.kind == GeneratorKind::Spiral {
                        gen_spiral(&SpiralParams { seed: cfg.seed, ..g.spiral })?
                    } else {
                        gen_aniso_grid(&AnisoGridParams { seed: cfg.seed, ..g.grid })?
                    };
                    write(&dir, "dataset.csv", &io::dataset_to_string(&data), &mut written)?;
                    let meta = toml::to_string(&data.metadata).map_err(|e| Error::Parse(e.to_string()))?;
                    write(&dir, "metadata.toml", &meta, &mut written)?;
                }
                GeneratorKind::Trajectories => {
                    let field = cfg.build_metric()?;
                    let p = TrajectoryParams { seed: cfg.seed, ..g.trajectories.clone() };
                    let set = gen_trajectories(&*field, &p, &cfg.solver)?;
                    write(&dir, "trajectories.jsonl", &io::trajectories_to_string(&set), &mut written)?;
                }
            }
        }
        Task::Fit => run_fit(cfg, &dir, &mut written)?,
        Task::Eval => {
            let field = cfg.build_metric()?;
            let data = io::read_dataset(cfg.input_path()?)?;
            let rep = loo_accuracy(&*field, &data, q.k, &cfg.objective.backend, &cfg.solver)?;
            let json = serde_json::to_string_pretty(&rep).map_err(|e| Error::Parse(e.to_string()))?;
            write(&dir, "eval.json", &(json + "\n"), &mut written)?;
        }
        Task::Dist => {
            let field = cfg.build_metric()?;
            let d = field.dim();
            let dist = riemannian_distance(&*field, &vector("x", &q.x, d)?, &vector("y", &q.y, d)?, q.distance, &cfg.solver)?;
            write(&dir, "dist.json", &format!("{{\n  \"distance\": {}\n}}\n", fmt_f64(dist)), &mut written)?;
        }
        Task::Geodesic => {
            let field = cfg.build_metric()?;
            write(&dir, "geodesic.csv", &path_csv(&geodesic(cfg, &*field)?)?, &mut written)?;
        }
        Task::Transport => {
            let field = cfg.build_metric()?;
            let d = field.dim();
            let (x, v, w) = (vector("x", &q.x, d)?, vector("v", &q.v, d)?, vector("w", &q.w, d)?);
            let moved = match q.transport {
                TransportMethod::Fanning { steps } => fanning_scheme(&*field, &x, &v, &w, steps, &cfg.solver)?,
                method => {
                    let curve = exp_map(&*field, &x, &v, &cfg.solver)?;
                    match method {
                        TransportMethod::Ode => parallel_transport_ode(&*field, &curve, &w)?,
                        TransportMethod::Schild { rungs } => schild_ladder(&*field, &curve, &w, rungs, &cfg.solver)?,
                        TransportMethod::Pole { rungs } => pole_ladder(&*field, &curve, &w, rungs, &cfg.solver)?,
                        TransportMethod::Fanning { .. } => unreachable!("handled above"),
                    }
                }
            };
            write(&dir, "transport.json", &vector_json("vector", &moved), &mut written)?;
        }
        Task::Sample => {
            let field = cfg.build_metric()?;
            let d = field.dim();
            let bbox = BoundingBox::new(vector("lower", &q.lower, d)?, vector("upper", &q.upper, d)?)?;
            let pts = sample_by_volume(&*field, &bbox, q.n, cfg.seed)?;
            write(&dir, "samples.csv", &io::points_to_string(&pts), &mut written)?;
        }
        Task::ExportPlot => match &cfg.input {
            Some(_) => {
                let (_, report) = io::fit_report_from_json(&fs::read_to_string(cfg.input_path()?)?)?;
                write(&dir, "loss_curve.csv", &report.loss_csv(), &mut written)?;
            }
            None => {
                let field = cfg.build_metric()?;
                write(&dir, "geodesic_plot.csv", &plot_table(&geodesic(cfg, &*field)?), &mut written)?;
            }
        },
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = RunConfig { task: Task::Dist, seed: 9, ..Default::default() };
        cfg.metric = Some(MetricSpec::HalfPlane);
        cfg.query.x = vec![-1.0, 1.0];
        cfg.query.y = vec![1.0, 1.0];
        cfg.query.distance = DistanceMethod::Bvp;
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert!(RunConfig::from_toml("format_version = 2").is_err());
        // every field has a default
        assert_eq!(RunConfig::from_toml("format_version = 1").unwrap(), RunConfig::default());
    }

    #[test]
    fn missing_inputs_are_validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { task: Task::Eval, output: Some(dir.path().into()), ..Default::default() };
        assert!(matches!(run(&cfg), Err(Error::InvalidArgument(_))));
    }
}
