//! Losses over a metric field: contrastive, triplet, distance regression and
//! geodesic trajectory regression.

use std::collections::HashMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{riemannian_distance, rollout, DistanceMethod, SolverConfig};
use crate::graph::build_knn_graph;
use crate::linalg;
use crate::manifold::{check_dim, InverseMetric, MetricField};
use crate::optim::{levenberg_marquardt, Status};

/// Neighbor count of the graph backend when none is given.
pub const DEFAULT_GRAPH_K: usize = 10;

/// How losses turn a metric field into distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistanceBackend {
    /// Closed form for constant fields, the graph backend otherwise.
    #[default]
    Auto,
    /// `√(ΔᵀGΔ)`; constant fields only.
    ClosedForm,
    /// Shortest paths on a kNN graph over the queried points plus `support`.
    Graph {
        k: usize,
        #[serde(default)]
        support: Vec<Vec<f64>>,
    },
    Shooting,
    Bvp,
    Curve {
        basis_size: usize,
    },
}

impl DistanceBackend {
    pub fn graph(k: usize) -> Self {
        DistanceBackend::Graph { k, support: Vec::new() }
    }

    fn resolve(&self, field: &dyn MetricField) -> DistanceBackend {
        match self {
            DistanceBackend::Auto if field.constant_matrix().is_some() => DistanceBackend::ClosedForm,
            DistanceBackend::Auto => DistanceBackend::graph(DEFAULT_GRAPH_K),
            other => other.clone(),
        }
    }
}

fn key(p: &DVector<f64>) -> Vec<u64> {
    p.iter().map(|x| x.to_bits()).collect()
}

fn pair_error(i: usize, e: Error) -> Error {
    Error::Pair { context: format!("pair {i}"), source: Box::new(e) }
}

/// Distances for a batch of point pairs, in order.
pub fn pairwise_distances(
    field: &dyn MetricField,
    pairs: &[(DVector<f64>, DVector<f64>)],
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    for (a, b) in pairs {
        check_dim(field.dim(), a)?;
        check_dim(field.dim(), b)?;
    }
    match backend.resolve(field) {
        DistanceBackend::ClosedForm => {
            let Some(g) = field.constant_matrix() else {
                return Err(Error::InvalidArgument("closed-form distances need a constant metric".into()));
            };
            let g = linalg::symmetrize(&g);
            Ok(pairs
                .iter()
                .map(|(a, b)| {
                    let d = b - a;
                    linalg::quad(&g, &d, &d).max(0.0).sqrt()
                })
                .collect())
        }
        DistanceBackend::Graph { k, support } => {
            let mut nodes: Vec<DVector<f64>> = Vec::new();
            let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
            let mut intern = |p: &DVector<f64>| -> usize {
                *index.entry(key(p)).or_insert_with(|| {
                    nodes.push(p.clone());
                    nodes.len() - 1
                })
            };
            let ids: Vec<(usize, usize)> = pairs.iter().map(|(a, b)| (intern(a), intern(b))).collect();
            for s in &support {
                intern(&DVector::from_column_slice(s));
            }
            if nodes.len() < 2 {
                return Ok(vec![0.0; pairs.len()]);
            }
            let graph = build_knn_graph(&nodes, k.min(nodes.len() - 1), Some(field))?;
            let mut cache: HashMap<usize, Vec<Option<f64>>> = HashMap::new();
            ids.iter()
                .enumerate()
                .map(|(i, &(a, b))| {
                    let (s, t) = (a.min(b), a.max(b));
                    if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(s) {
                        e.insert(graph.distances_from(s)?);
                    }
                    cache[&s][t].ok_or_else(|| pair_error(i, Error::Unreachable { from: a, to: b }))
                })
                .collect()
        }
        other => {
            let method = match other {
                DistanceBackend::Shooting => DistanceMethod::Shooting,
                DistanceBackend::Bvp => DistanceMethod::Bvp,
                DistanceBackend::Curve { basis_size } => DistanceMethod::Curve { basis_size },
                _ => unreachable!("resolved above"),
            };
            pairs
                .iter()
                .enumerate()
                .map(|(i, (a, b))| riemannian_distance(field, a, b, method, cfg).map_err(|e| pair_error(i, e)))
                .collect()
        }
    }
}

fn points(rows: &[Vec<f64>]) -> Vec<DVector<f64>> {
    rows.iter().map(|r| DVector::from_column_slice(r)).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairSets {
    pub similar: Vec<(DVector<f64>, DVector<f64>)>,
    pub dissimilar: Vec<(DVector<f64>, DVector<f64>)>,
}

impl PairSets {
    pub fn new(similar: Vec<(DVector<f64>, DVector<f64>)>, dissimilar: Vec<(DVector<f64>, DVector<f64>)>) -> Result<Self> {
        if dissimilar.iter().any(|(a, b)| a == b) {
            return Err(Error::InvalidArgument("a dissimilar pair repeats the same point".into()));
        }
        Ok(PairSets { similar, dissimilar })
    }

    /// All pairs `(i, j)`, `i < j`, split by label agreement.
    pub fn from_labels(pts: &[DVector<f64>], labels: &[usize]) -> Result<Self> {
        let mut similar = Vec::new();
        let mut dissimilar = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let pair = (pts[i].clone(), pts[j].clone());
                if labels[i] == labels[j] {
                    similar.push(pair);
                } else {
                    dissimilar.push(pair);
                }
            }
        }
        Self::new(similar, dissimilar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ContrastiveVariant {
    /// `Σ_p d − Σ_n d` (unbounded below).
    #[default]
    SumDiff,
    /// `Σ_p d + Σ_n d_{g⁻¹}`, negatives measured under the pointwise inverse field.
    InverseNegatives,
}

pub fn contrastive_loss(
    field: &dyn MetricField,
    pairs: &PairSets,
    variant: ContrastiveVariant,
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<f64> {
    let pos: f64 = pairwise_distances(field, &pairs.similar, backend, cfg)?.iter().sum();
    let neg: f64 = match variant {
        ContrastiveVariant::SumDiff => -pairwise_distances(field, &pairs.dissimilar, backend, cfg)?.iter().sum::<f64>(),
        ContrastiveVariant::InverseNegatives => {
            let inv = InverseMetric(field);
            pairwise_distances(&inv, &pairs.dissimilar, backend, cfg)?.iter().sum()
        }
    };
    Ok(pos + neg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: DVector<f64>,
    pub positive: DVector<f64>,
    pub negative: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
}

impl TripletSet {
    pub fn new(triplets: Vec<Triplet>) -> Result<Self> {
        if triplets.iter().any(|t| t.positive == t.negative) {
            return Err(Error::InvalidArgument("a triplet's positive equals its negative".into()));
        }
        Ok(TripletSet { triplets })
    }

    /// For every point, its nearest same-label point as positive and its
    /// nearest other-label point as negative, both under the Euclidean chart
    /// distance (ties by index).
    pub fn nearest_from_labels(pts: &[DVector<f64>], labels: &[usize]) -> Result<Self> {
        let mut triplets = Vec::new();
        for i in 0..pts.len() {
            let closest = |same: bool| {
                (0..pts.len())
                    .filter(|&j| j != i && (labels[j] == labels[i]) == same)
                    .min_by(|&a, &b| (&pts[a] - &pts[i]).norm().total_cmp(&(&pts[b] - &pts[i]).norm()).then(a.cmp(&b)))
            };
            if let (Some(p), Some(n)) = (closest(true), closest(false)) {
                triplets.push(Triplet { anchor: pts[i].clone(), positive: pts[p].clone(), negative: pts[n].clone() });
            }
        }
        Self::new(triplets)
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

fn triplet_distances(
    field: &dyn MetricField,
    set: &TripletSet,
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<Vec<(f64, f64)>> {
    let mut pairs = Vec::with_capacity(2 * set.len());
    for t in &set.triplets {
        pairs.push((t.anchor.clone(), t.positive.clone()));
        pairs.push((t.anchor.clone(), t.negative.clone()));
    }
    let d = pairwise_distances(field, &pairs, backend, cfg)?;
    Ok(d.chunks(2).map(|c| (c[0], c[1])).collect())
}

/// `Σ d(q, q⁺) + max(0, margin + d(q, q⁺) − d(q, q⁻))`
pub fn triplet_loss(
    field: &dyn MetricField,
    set: &TripletSet,
    margin: f64,
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<f64> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be non-negative, got {margin}")));
    }
    Ok(triplet_distances(field, set, backend, cfg)?
        .into_iter()
        .map(|(dp, dn)| dp + (margin + dp - dn).max(0.0))
        .sum())
}

/// Triplets whose hinge is active: `d(q, q⁻) < d(q, q⁺) + margin`.
pub fn triplet_violations(
    field: &dyn MetricField,
    set: &TripletSet,
    margin: f64,
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<usize> {
    Ok(triplet_distances(field, set, backend, cfg)?.into_iter().filter(|(dp, dn)| *dn < dp + margin).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceObservation {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub distance: f64,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DistanceObservations {
    pub observations: Vec<DistanceObservation>,
}

impl DistanceObservations {
    pub fn new(observations: Vec<DistanceObservation>) -> Result<Self> {
        for o in &observations {
            if !(o.distance.is_finite() && o.distance >= 0.0) {
                return Err(Error::InvalidArgument(format!("observed distance {} must be finite and ≥ 0", o.distance)));
            }
            if !(o.weight > 0.0) {
                return Err(Error::InvalidArgument(format!("observation weight {} must be positive", o.weight)));
            }
        }
        Ok(DistanceObservations { observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// `Σ w (d_obs − d_g)²`, or with `squared`, `Σ w (d_obs² − d_g²)²` — the
/// latter is linear least squares in `G` for constant metrics.
pub fn distance_regression_loss(
    field: &dyn MetricField,
    obs: &DistanceObservations,
    squared: bool,
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<f64> {
    let pairs: Vec<_> = obs.observations.iter().map(|o| (o.x.clone(), o.y.clone())).collect();
    let d = pairwise_distances(field, &pairs, backend, cfg)?;
    Ok(obs
        .observations
        .iter()
        .zip(d)
        .map(|(o, d)| {
            let r = if squared { o.distance * o.distance - d * d } else { o.distance - d };
            o.weight * r * r
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, points: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != points.len() {
            return Err(Error::Shape("a trajectory needs ≥ 2 samples with one time each".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("trajectory times must be strictly increasing".into()));
        }
        Ok(Trajectory { times, points })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn from_rows(rows: Vec<(Vec<f64>, Vec<Vec<f64>>)>) -> Result<Self> {
        let trajectories = rows.into_iter().map(|(t, p)| Trajectory::new(t, points(&p))).collect::<Result<_>>()?;
        Ok(TrajectorySet { trajectories })
    }
}

/// Best geodesic `t ↦ Exp_q((t − t₀)·v)` for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFit {
    pub start: DVector<f64>,
    pub velocity: DVector<f64>,
    /// `Σ_j ‖x_j − γ(t_j)‖²`
    pub residual: f64,
    pub converged: bool,
}

/// `γ(t_j)` for `γ(t) = Exp_q((t − t₀)·v)`, integrating between consecutive
/// sample times.
pub fn geodesic_at_times(
    field: &dyn MetricField,
    q: &DVector<f64>,
    v: &DVector<f64>,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<DVector<f64>>> {
    let span = times[times.len() - 1] - times[0];
    let mut out = vec![q.clone()];
    let (mut x, mut vel) = (q.clone(), v.clone());
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let steps = ((cfg.steps as f64 * dt / span).ceil() as usize).max(4);
        let seg = rollout(field, &x, &vel, dt, &SolverConfig { steps, ..cfg.clone() })?;
        x = seg.end().clone();
        vel = seg.velocities.last().expect("rollout has nodes") / dt;
        out.push(x.clone());
    }
    Ok(out)
}

const TRAJECTORY_RESTARTS: usize = 3;

fn fit_one(field: &dyn MetricField, tr: &Trajectory, cfg: &SolverConfig, rng: &mut ChaCha8Rng) -> Result<TrajectoryFit> {
    let d = field.dim();
    let n = tr.points.len();
    let span = tr.times[n - 1] - tr.times[0];
    let q0 = tr.points[0].clone();
    let v0 = (&tr.points[n - 1] - &tr.points[0]) / span;
    let residual = |theta: &DVector<f64>| -> Result<DVector<f64>> {
        let q = theta.rows(0, d).into_owned();
        let v = theta.rows(d, d).into_owned();
        let gamma = geodesic_at_times(field, &q, &v, &tr.times, cfg)?;
        let mut r = DVector::zeros(n * d);
        for (j, (x, g)) in tr.points.iter().zip(&gamma).enumerate() {
            r.rows_mut(j * d, d).copy_from(&(x - g));
        }
        Ok(r)
    };
    let scale = (&tr.points[n - 1] - &tr.points[0]).norm().max(1e-3);
    let mut best: Option<TrajectoryFit> = None;
    for attempt in 0..TRAJECTORY_RESTARTS {
        let mut theta = DVector::zeros(2 * d);
        theta.rows_mut(0, d).copy_from(&q0);
        theta.rows_mut(d, d).copy_from(&v0);
        if attempt > 0 {
            for i in 0..2 * d {
                let z: f64 = StandardNormal.sample(rng);
                theta[i] += 0.1 * scale * z * if i < d { 1.0 } else { 1.0 / span };
            }
        }
        let Ok(out) = levenberg_marquardt(residual, theta, cfg.max_iter, cfg.tol) else { continue };
        let fit = TrajectoryFit {
            start: out.x.rows(0, d).into_owned(),
            velocity: out.x.rows(d, d).into_owned(),
            residual: out.residual_norm * out.residual_norm,
            converged: out.status != Status::MaxIter,
        };
        if best.as_ref().is_none_or(|b| fit.residual < b.residual) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("every trajectory fit failed to evaluate".into()))
}

/// `Σ_k min_{q,v} Σ_j ‖x_kʲ − γ(t_kʲ)‖²` with the per-trajectory fits.
/// Fits that hit the iteration cap are flagged (`converged = false`) and
/// contribute their best residual.
pub fn trajectory_loss(field: &dyn MetricField, set: &TrajectorySet, cfg: &SolverConfig) -> Result<(f64, Vec<TrajectoryFit>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut fits = Vec::with_capacity(set.trajectories.len());
    for (k, tr) in set.trajectories.iter().enumerate() {
        for p in &tr.points {
            check_dim(field.dim(), p)?;
        }
        let fit = fit_one(field, tr, cfg, &mut rng)
            .map_err(|e| Error::Pair { context: format!("trajectory {k}"), source: Box::new(e) })?;
        fits.push(fit);
    }
    Ok((fits.iter().map(|f| f.residual).sum(), fits))
}
