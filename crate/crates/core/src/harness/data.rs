use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{BoundingBox, SolverConfig};
use crate::manifold::{check_dim, MetricField};
use crate::objectives::{geodesic_at_times, Trajectory, TrajectorySet};

/// Points with integer class labels and free-form generator metadata.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub points: Vec<DVector<f64>>,
    pub labels: Vec<usize>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl LabeledDataset {
    pub fn new(points: Vec<DVector<f64>>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Shape(format!("{} points but {} labels", points.len(), labels.len())));
        }
        if let Some(p) = points.first() {
            let d = p.len();
            for q in &points {
                check_dim(d, q)?;
            }
        }
        Ok(LabeledDataset { points, labels, metadata: BTreeMap::new() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    /// `1 + max label` (0 when empty).
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Every point mapped through `x ↦ A x`; metadata records the map.
    pub fn transformed(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: a.ncols() });
        }
        let mut out = LabeledDataset::new(self.points.iter().map(|p| a * p).collect(), self.labels.clone())?;
        out.metadata = self.metadata.clone();
        out.metadata.insert("transform".into(), format!("{:?}", a.transpose().as_slice()));
        Ok(out)
    }
}

/// Two interleaved Archimedean spirals `r = a·θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpiralParams {
    pub n_per_class: usize,
    pub turns: f64,
    pub a: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        SpiralParams { n_per_class: 100, turns: 2.0, a: 0.5, noise: 0.05, seed: 0 }
    }
}

/// First angle on each arm; starting away from the origin keeps the two
/// arms from touching.
pub const SPIRAL_START_ANGLE: f64 = PI / 2.0;

/// Class 0 at `(aθ cos θ, aθ sin θ)` for `θ` evenly spaced over `turns` full
/// turns from [`SPIRAL_START_ANGLE`]; class 1 is the same arm rotated by π.
/// Isotropic Gaussian noise of standard deviation `noise` is added.
pub fn gen_spiral(p: &SpiralParams) -> Result<LabeledDataset> {
    if p.n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be ≥ 1".into()));
    }
    if !(p.noise >= 0.0) || !(p.turns > 0.0) || !(p.a > 0.0) {
        return Err(Error::InvalidArgument("spiral needs noise ≥ 0, turns > 0 and a > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let normal = Normal::new(0.0, p.noise).expect("noise checked");
    let n = p.n_per_class;
    let mut points = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for class in 0..2 {
        let phase = class as f64 * PI;
        for j in 0..n {
            let frac = if n == 1 { 0.0 } else { j as f64 / (n - 1) as f64 };
            let theta = SPIRAL_START_ANGLE + 2.0 * PI * p.turns * frac;
            let r = p.a * theta;
            let mut x = DVector::from_column_slice(&[r * (theta + phase).cos(), r * (theta + phase).sin()]);
            if p.noise > 0.0 {
                x[0] += normal.sample(&mut rng);
                x[1] += normal.sample(&mut rng);
            }
            points.push(x);
            labels.push(class);
        }
    }
    let mut data = LabeledDataset::new(points, labels)?;
    let meta = [
        ("generator", "spiral".to_string()),
        ("n_per_class", n.to_string()),
        ("turns", p.turns.to_string()),
        ("a", p.a.to_string()),
        ("noise", p.noise.to_string()),
        ("seed", p.seed.to_string()),
        ("start_angle", SPIRAL_START_ANGLE.to_string()),
    ];
    data.metadata.extend(meta.into_iter().map(|(k, v)| (k.to_string(), v)));
    Ok(data)
}

/// `n × n` grid with columns `scale_x` apart and rows `scale_y / 2` apart,
/// labelled by column parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnisoGridParams {
    pub n: usize,
    pub scale_x: f64,
    pub scale_y: f64,
    /// Uniform jitter as a fraction of the smaller spacing (0 = noiseless).
    pub jitter: f64,
    pub seed: u64,
}

impl Default for AnisoGridParams {
    fn default() -> Self {
        AnisoGridParams { n: 10, scale_x: 1.0, scale_y: 3.0, jitter: 0.0, seed: 0 }
    }
}

impl AnisoGridParams {
    /// `diag(scale_x⁻², scale_y⁻²)`: unit column spacing, half-unit row
    /// spacing, so same-class rows are always nearer than other-class columns.
    pub fn separating_metric(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&[self.scale_x.powi(-2), self.scale_y.powi(-2)]))
    }
}

/// Points `(i·scale_x, j·scale_y/2)`, label `i mod 2`. With
/// `scale_x < scale_y / 2` a Euclidean 1-NN picks the adjacent column (the
/// other class); under the separating metric stored in the metadata it
/// picks the adjacent row. The default `scale_y / 2 < 2·scale_x` also keeps
/// the adjacent row strictly nearer than the same-class column two over.
pub fn gen_aniso_grid(p: &AnisoGridParams) -> Result<LabeledDataset> {
    if p.n < 2 {
        return Err(Error::InvalidArgument("grid needs n ≥ 2".into()));
    }
    if !(p.scale_x > 0.0 && p.scale_y > 0.0) || !(0.0..0.5).contains(&p.jitter) {
        return Err(Error::InvalidArgument("grid needs positive scales and jitter in [0, 0.5)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (dx, dy) = (p.scale_x, p.scale_y / 2.0);
    let amp = p.jitter * dx.min(dy);
    let mut points = Vec::with_capacity(p.n * p.n);
    let mut labels = Vec::with_capacity(p.n * p.n);
    for i in 0..p.n {
        for j in 0..p.n {
            let mut x = DVector::from_column_slice(&[i as f64 * dx, j as f64 * dy]);
            if amp > 0.0 {
                x[0] += rng.random_range(-amp..amp);
                x[1] += rng.random_range(-amp..amp);
            }
            points.push(x);
            labels.push(i % 2);
        }
    }
    let mut data = LabeledDataset::new(points, labels)?;
    let g = p.separating_metric();
    let meta = [
        ("generator", "aniso-grid".to_string()),
        ("n", p.n.to_string()),
        ("scale_x", p.scale_x.to_string()),
        ("scale_y", p.scale_y.to_string()),
        ("jitter", p.jitter.to_string()),
        ("seed", p.seed.to_string()),
        ("separating_metric", format!("{:?}", g.as_slice())),
    ];
    data.metadata.extend(meta.into_iter().map(|(k, v)| (k.to_string(), v)));
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryParams {
    pub n_traj: usize,
    pub samples_per: usize,
    pub noise: f64,
    pub seed: u64,
    /// Start points are uniform in this box.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Initial velocities are Gaussian with this standard deviation per
    /// coordinate.
    pub speed: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        TrajectoryParams { n_traj: 5, samples_per: 10, noise: 0.0, seed: 0, lower: vec![-1.0, 0.5], upper: vec![1.0, 1.5], speed: 0.3 }
    }
}

/// Random `(q, v)` per trajectory; samples are the geodesic
/// `t ↦ Exp_q((t − t₀)·v)` at sorted uniform times in `[0, 1]` plus
/// Gaussian noise.
pub fn gen_trajectories(field: &dyn MetricField, p: &TrajectoryParams, cfg: &SolverConfig) -> Result<TrajectorySet> {
    if p.n_traj == 0 || p.samples_per < 2 {
        return Err(Error::InvalidArgument("need n_traj ≥ 1 and samples_per ≥ 2".into()));
    }
    if !(p.noise >= 0.0) || !(p.speed >= 0.0) {
        return Err(Error::InvalidArgument("noise and speed must be non-negative".into()));
    }
    let bbox = BoundingBox::new(DVector::from_column_slice(&p.lower), DVector::from_column_slice(&p.upper))?;
    if bbox.dim() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: bbox.dim() });
    }
    let d = field.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let gauss = |rng: &mut ChaCha8Rng, s: f64| if s > 0.0 { Normal::new(0.0, s).expect("s > 0").sample(rng) } else { 0.0 };
    let mut trajectories = Vec::with_capacity(p.n_traj);
    for _ in 0..p.n_traj {
        let q = DVector::from_fn(d, |i, _| rng.random_range(bbox.lower[i]..bbox.upper[i]));
        let v = DVector::from_fn(d, |_, _| gauss(&mut rng, p.speed));
        let mut times: Vec<f64> = Vec::with_capacity(p.samples_per);
        while times.len() < p.samples_per {
            let t: f64 = rng.random();
            if !times.contains(&t) {
                times.push(t);
            }
        }
        times.sort_by(f64::total_cmp);
        let mut points = geodesic_at_times(field, &q, &v, &times, cfg)?;
        for x in &mut points {
            for c in x.iter_mut() {
                *c += gauss(&mut rng, p.noise);
            }
        }
        trajectories.push(Trajectory::new(times, points)?);
    }
    Ok(TrajectorySet { trajectories })
}
