use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::SolverConfig;
use super::exp::exp_point;
use crate::error::{BestIterate, Error, Result};
use crate::linalg;
use crate::manifold::{check_dim, metric, MetricField};
use crate::optim::{levenberg_marquardt, Status};

/// Relative size of the random perturbations of `v₀` used by restarts.
const RESTART_SCALE: f64 = 0.5;

/// `Log_x(y)` by shooting: solves `Exp_x(v) = y` for `v` starting from the
/// chart difference `y − x`, then from seeded random perturbations of it.
///
/// Succeeds when `‖Exp_x(v) − y‖ ≤ cfg.tol`; otherwise reports no convergence
/// carrying the best `v` seen.
pub fn log_map_shooting(field: &dyn MetricField, x: &DVector<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<DVector<f64>> {
    cfg.validate()?;
    check_dim(field.dim(), x)?;
    check_dim(field.dim(), y)?;
    // endpoints outside the domain are input errors, not solver failures
    metric(field, x)?;
    metric(field, y)?;
    let v0 = y - x;
    if v0.amax() == 0.0 {
        return Ok(v0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = RESTART_SCALE * v0.norm();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut iterations = 0;
    for attempt in 0..=cfg.restarts {
        let start = if attempt == 0 {
            v0.clone()
        } else {
            v0.map(|c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                c + scale * z
            })
        };
        let outcome = levenberg_marquardt(|v| Ok(exp_point(field, x, v, cfg)? - y), start, cfg.max_iter, cfg.tol);
        let Ok(outcome) = outcome else { continue };
        iterations += outcome.iterations;
        if outcome.status == Status::Converged {
            return Ok(outcome.x);
        }
        if best.as_ref().is_none_or(|(r, _)| outcome.residual_norm < *r) {
            best = Some((outcome.residual_norm, outcome.x));
        }
    }
    let (residual, v) = best.unwrap_or((f64::INFINITY, v0));
    Err(Error::no_convergence(iterations, residual, BestIterate::Vector(v)))
}

/// `√(g_x(v, v))` with `v = Log_x(y)` from shooting.
pub fn shooting_distance(field: &dyn MetricField, x: &DVector<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<f64> {
    let v = log_map_shooting(field, x, y, cfg)?;
    Ok(linalg::quad(&metric(field, x)?, &v, &v).max(0.0).sqrt())
}
