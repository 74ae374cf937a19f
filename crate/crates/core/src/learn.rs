//! Fitting metric parameters: finite-difference gradients, Adam with an
//! optional backtracking line search, and projection onto the SPD cone.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::SolverConfig;
use crate::linalg;
use crate::manifold::{MetricField, SpdMatrix};
use crate::metrics::Parametrized;
use crate::objectives::{
    contrastive_loss, distance_regression_loss, trajectory_loss, triplet_loss, ContrastiveVariant, DistanceBackend,
    DistanceObservations, PairSets, TrajectorySet, TripletSet,
};

/// Nearest matrix (Frobenius) to the symmetric part of `m` whose eigenvalues
/// are all at least `floor`.
pub fn project_spd(m: &DMatrix<f64>, floor: f64) -> SpdMatrix {
    let s = linalg::symmetrize(m);
    let p = linalg::symmetrize(&linalg::sym_apply(&s, |l| l.max(floor)));
    SpdMatrix::new(p).expect("clamped eigenvalues are positive")
}

/// Central differences of `loss` at `theta`, one coordinate at a time. The
/// default step is `1e-5 · (1 + ‖θ‖_∞)`.
pub fn fd_gradient(
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
    theta: &[f64],
    fd_step: Option<f64>,
) -> Result<Vec<f64>> {
    let h = fd_step.unwrap_or_else(|| linalg::fd_step(&nalgebra::DVector::from_column_slice(theta)));
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("fd_step must be positive, got {h}")));
    }
    let mut x = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        x[i] = theta[i] + h;
        let fp = loss(&x)?;
        x[i] = theta[i] - h;
        let fm = loss(&x)?;
        x[i] = theta[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFiniteLoss { coordinate: i });
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once `‖∇L‖₂ ≤ tol`.
    pub tol: f64,
    pub seed: u64,
    /// Eigenvalue floor for directly stored metric matrices.
    pub spd_floor: f64,
    pub fd_step: Option<f64>,
    /// Backtrack each Adam step until the loss does not increase.
    pub line_search: bool,
    /// Items per mini-batch; full batch when unset.
    pub batch_size: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            step_size: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iter: 2000,
            tol: 1e-6,
            seed: 0,
            spd_floor: 1e-6,
            fd_step: None,
            line_search: false,
            batch_size: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_size", self.step_size),
            ("epsilon", self.epsilon),
            ("tol", self.tol),
            ("spd_floor", self.spd_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!("fd_step must be positive, got {h}")));
            }
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIter,
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: Vec<f64>,
    /// Loss at the start and after every accepted step.
    pub loss_history: Vec<f64>,
    /// Gradient norm at every iterate in `loss_history` that had one computed.
    pub grad_norm_history: Vec<f64>,
    pub termination: Termination,
    /// Not serialized, so reports of identical runs are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl FitReport {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history starts with the initial loss")
    }

    pub fn iterations(&self) -> usize {
        self.loss_history.len() - 1
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// `iteration,loss,grad_norm` rows.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("iteration,loss,grad_norm\n");
        for (i, l) in self.loss_history.iter().enumerate() {
            let g = self.grad_norm_history.get(i).map(|g| crate::geo::fmt_f64(*g)).unwrap_or_default();
            out.push_str(&format!("{i},{},{g}\n", crate::geo::fmt_f64(*l)));
        }
        out
    }
}

/// A loss with its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "loss", rename_all = "kebab-case")]
pub enum Loss {
    Contrastive { pairs: PairSets, variant: ContrastiveVariant },
    Triplet { triplets: TripletSet, margin: f64 },
    DistanceRegression { observations: DistanceObservations, squared: bool },
    Trajectory { trajectories: TrajectorySet },
}

impl Loss {
    /// Number of independent terms (pairs, triplets, observations or
    /// trajectories) available for mini-batching.
    pub fn n_items(&self) -> usize {
        match self {
            Loss::Contrastive { pairs, .. } => pairs.similar.len() + pairs.dissimilar.len(),
            Loss::Triplet { triplets, .. } => triplets.len(),
            Loss::DistanceRegression { observations, .. } => observations.len(),
            Loss::Trajectory { trajectories } => trajectories.trajectories.len(),
        }
    }

    /// The same loss restricted to the given item indices.
    pub fn subset(&self, idx: &[usize]) -> Loss {
        fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
            idx.iter().map(|&i| v[i].clone()).collect()
        }
        match self {
            Loss::Contrastive { pairs, variant } => {
                let ns = pairs.similar.len();
                let similar = idx.iter().filter(|&&i| i < ns).map(|&i| pairs.similar[i].clone()).collect();
                let dissimilar = idx.iter().filter(|&&i| i >= ns).map(|&i| pairs.dissimilar[i - ns].clone()).collect();
                Loss::Contrastive { pairs: PairSets { similar, dissimilar }, variant: *variant }
            }
            Loss::Triplet { triplets, margin } => {
                Loss::Triplet { triplets: TripletSet { triplets: pick(&triplets.triplets, idx) }, margin: *margin }
            }
            Loss::DistanceRegression { observations, squared } => Loss::DistanceRegression {
                observations: DistanceObservations { observations: pick(&observations.observations, idx) },
                squared: *squared,
            },
            Loss::Trajectory { trajectories } => {
                Loss::Trajectory { trajectories: TrajectorySet { trajectories: pick(&trajectories.trajectories, idx) } }
            }
        }
    }
}

/// A loss plus the distance machinery it is evaluated with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub loss: Loss,
    #[serde(default)]
    pub backend: DistanceBackend,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Objective {
    pub fn new(loss: Loss) -> Self {
        Objective { loss, backend: DistanceBackend::Auto, solver: SolverConfig::default() }
    }

    pub fn with_backend(mut self, backend: DistanceBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn evaluate(&self, field: &dyn MetricField) -> Result<f64> {
        evaluate_loss(&self.loss, field, &self.backend, &self.solver)
    }
}

fn evaluate_loss(loss: &Loss, field: &dyn MetricField, backend: &DistanceBackend, solver: &SolverConfig) -> Result<f64> {
    match loss {
        Loss::Contrastive { pairs, variant } => contrastive_loss(field, pairs, *variant, backend, solver),
        Loss::Triplet { triplets, margin } => triplet_loss(field, triplets, *margin, backend, solver),
        Loss::DistanceRegression { observations, squared } => {
            distance_regression_loss(field, observations, *squared, backend, solver)
        }
        Loss::Trajectory { trajectories } => Ok(trajectory_loss(field, trajectories, solver)?.0),
    }
}

/// Adam on the packed parameters of `family` with finite-difference
/// gradients. Parameters (and every finite-difference stencil point) are
/// mapped through [`Parametrized::project`] before evaluation, so directly
/// stored metric matrices stay SPD with eigenvalues ≥ `cfg.spd_floor`.
///
/// Objective errors at the initial point are returned; later errors, and a
/// loss above 10⁶ × the initial loss, end the run with
/// [`Termination::Error`] and the last good parameters.
pub fn fit<F: Parametrized + MetricField>(family: &F, objective: &Objective, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    let started = Instant::now();
    let floor = cfg.spd_floor;
    let project = |theta: &[f64]| family.project(theta, floor);
    let eval = |loss: &Loss, theta: &[f64]| -> Result<f64> {
        let f = family.unpack(&project(theta))?;
        evaluate_loss(loss, &f, &objective.backend, &objective.solver)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_items = objective.loss.n_items();
    let mut order: Vec<usize> = (0..n_items).collect();
    let mut cursor = n_items;
    let mut next_batch = |rng: &mut ChaCha8Rng| -> Option<Loss> {
        let b = cfg.batch_size.filter(|&b| b < n_items)?;
        if cursor + b > n_items {
            order.shuffle(rng);
            cursor = 0;
        }
        let mut idx = order[cursor..cursor + b].to_vec();
        idx.sort_unstable();
        cursor += b;
        Some(objective.loss.subset(&idx))
    };

    let mut theta = project(&family.pack());
    let initial = eval(&objective.loss, &theta)?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteLoss { coordinate: usize::MAX });
    }
    let mut loss = initial;
    let mut loss_history = vec![loss];
    let mut grad_norm_history = Vec::new();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut termination = Termination::MaxIter;
    let limit = 1e6 * initial.abs().max(f64::MIN_POSITIVE);

    for it in 1..=cfg.max_iter {
        let batch = next_batch(&mut rng);
        let batch_loss = batch.as_ref().unwrap_or(&objective.loss);
        let grad = match fd_gradient(|t| eval(batch_loss, t), &theta, cfg.fd_step) {
            Ok(g) => g,
            Err(e) => {
                termination = Termination::Error { message: e.to_string() };
                break;
            }
        };
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        grad_norm_history.push(gnorm);
        if gnorm <= cfg.tol {
            termination = Termination::Converged;
            break;
        }
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let mut dir = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            let mh = m[i] / (1.0 - b1.powi(it as i32));
            let vh = v[i] / (1.0 - b2.powi(it as i32));
            dir[i] = -mh / (vh.sqrt() + cfg.epsilon);
        }
        let mut scale = cfg.step_size;
        let mut accepted = None;
        for _ in 0..if cfg.line_search { 40 } else { 1 } {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + scale * d).collect();
            let trial = project(&trial);
            match eval(&objective.loss, &trial) {
                Ok(l) if !cfg.line_search || l <= loss => {
                    accepted = Some((trial, l));
                    break;
                }
                Ok(_) => scale *= 0.5,
                Err(e) => {
                    if !cfg.line_search {
                        termination = Termination::Error { message: e.to_string() };
                        break;
                    }
                    scale *= 0.5;
                }
            }
        }
        let Some((trial, l)) = accepted else {
            if cfg.line_search {
                // no decrease along the Adam direction at any scale: a
                // numerical stationary point for this loss
                termination = Termination::Converged;
            }
            break;
        };
        if !(l.is_finite()) || l > limit {
            termination = Termination::Error { message: format!("diverged: loss {l:e} exceeds 1e6 × initial {initial:e}") };
            break;
        }
        theta = trial;
        loss = l;
        loss_history.push(loss);
    }

    Ok(FitReport { params: theta, loss_history, grad_norm_history, termination, wall_time: started.elapsed() })
}
