use nalgebra::DVector;

use super::config::{BvpStencil, SolverConfig};
use super::path::GeodesicPath;
use crate::error::{BestIterate, Error, Result};
use crate::linalg;
use crate::manifold::{check_dim, metric, metric_derivatives, MetricField};
use crate::optim::{lbfgs, Status};

/// Gradient norm below which a stalled line search counts as converged:
/// below it, energy decreases are lost in rounding.
const STALL_ACCEPT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub path: GeodesicPath,
    /// Discrete energy after every accepted optimizer step.
    pub energy_history: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

impl BvpSolution {
    pub fn energy(&self) -> f64 {
        *self.energy_history.last().expect("history holds the initial energy")
    }
}

fn stencil_point(a: &DVector<f64>, b: &DVector<f64>, stencil: BvpStencil) -> DVector<f64> {
    match stencil {
        BvpStencil::Midpoint => (a + b) * 0.5,
        BvpStencil::LeftEndpoint => a.clone(),
    }
}

/// `(N − 1) Σ_k Δ_kᵀ g(m_k) Δ_k` over nodes including endpoints, with its
/// gradient with respect to every node.
pub fn discrete_energy(
    field: &dyn MetricField,
    nodes: &[DVector<f64>],
    stencil: BvpStencil,
) -> Result<(f64, Vec<DVector<f64>>)> {
    let n = nodes.len();
    let d = field.dim();
    let scale = (n - 1) as f64;
    let constant = field.constant_matrix();
    let mut energy = 0.0;
    let mut grad = vec![DVector::zeros(d); n];
    for k in 0..n - 1 {
        let delta = &nodes[k + 1] - &nodes[k];
        let at = stencil_point(&nodes[k], &nodes[k + 1], stencil);
        let g = match &constant {
            Some(g) => g.clone(),
            None => metric(field, &at)?,
        };
        let gd = &g * &delta;
        energy += delta.dot(&gd);
        grad[k + 1] += &gd * 2.0;
        grad[k] -= &gd * 2.0;
        if constant.is_none() {
            let dg = metric_derivatives(field, &at, None)?;
            let dm = DVector::from_iterator(d, dg.iter().map(|m| linalg::quad(m, &delta, &delta)));
            match stencil {
                BvpStencil::Midpoint => {
                    grad[k] += &dm * 0.5;
                    grad[k + 1] += &dm * 0.5;
                }
                BvpStencil::LeftEndpoint => grad[k] += &dm,
            }
        }
    }
    for gk in &mut grad {
        *gk *= scale;
    }
    Ok((energy * scale, grad))
}

/// `Σ_k √(Δ_kᵀ g(m_k) Δ_k)`
pub fn discrete_length(field: &dyn MetricField, nodes: &[DVector<f64>], stencil: BvpStencil) -> Result<f64> {
    nodes
        .windows(2)
        .map(|w| {
            let delta = &w[1] - &w[0];
            let g = metric(field, &stencil_point(&w[0], &w[1], stencil))?;
            Ok(linalg::quad(&g, &delta, &delta).max(0.0).sqrt())
        })
        .sum()
}

fn path_from_nodes(nodes: Vec<DVector<f64>>) -> GeodesicPath {
    let n = nodes.len();
    let scale = (n - 1) as f64;
    let times: Vec<f64> = (0..n).map(|k| if k == n - 1 { 1.0 } else { k as f64 / scale }).collect();
    let velocities = (0..n)
        .map(|k| match k {
            0 => (&nodes[1] - &nodes[0]) * scale,
            k if k == n - 1 => (&nodes[n - 1] - &nodes[n - 2]) * scale,
            k => (&nodes[k + 1] - &nodes[k - 1]) * (0.5 * scale),
        })
        .collect();
    GeodesicPath { times, points: nodes, velocities }
}

/// Minimizes the discrete path energy over interior nodes with endpoints
/// fixed, starting from the straight chart segment.
pub fn geodesic_bvp_solve(field: &dyn MetricField, x: &DVector<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<BvpSolution> {
    cfg.validate()?;
    check_dim(field.dim(), x)?;
    check_dim(field.dim(), y)?;
    let n = cfg.bvp_nodes;
    let d = field.dim();
    let start = GeodesicPath::straight(x, y, n).points;
    let assemble = |theta: &DVector<f64>| -> Vec<DVector<f64>> {
        let mut nodes = Vec::with_capacity(n);
        nodes.push(x.clone());
        for k in 0..n - 2 {
            nodes.push(theta.rows(k * d, d).into_owned());
        }
        nodes.push(y.clone());
        nodes
    };
    let theta0 = DVector::from_iterator((n - 2) * d, start[1..n - 1].iter().flat_map(|p| p.iter().copied()));
    let stencil = cfg.bvp_stencil;
    let outcome = lbfgs(
        |theta| {
            let (e, g) = discrete_energy(field, &assemble(theta), stencil)?;
            let flat = DVector::from_iterator(theta.len(), g[1..n - 1].iter().flat_map(|p| p.iter().copied()));
            Ok((e, flat))
        },
        theta0,
        cfg.energy_max_iter,
        cfg.grad_tol,
        cfg.step_size,
    )?;
    let path = path_from_nodes(assemble(&outcome.x));
    let converged = outcome.status == Status::Converged
        || (outcome.status == Status::Stalled && outcome.grad_norm <= STALL_ACCEPT);
    let solution = BvpSolution {
        path,
        energy_history: outcome.history,
        grad_norm: outcome.grad_norm,
        iterations: outcome.iterations,
    };
    if !converged {
        return Err(Error::no_convergence(solution.iterations, solution.grad_norm, BestIterate::Path(solution.path)));
    }
    Ok(solution)
}

/// Discrete geodesic between `x` and `y`; see [`geodesic_bvp_solve`].
pub fn geodesic_bvp(field: &dyn MetricField, x: &DVector<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<GeodesicPath> {
    Ok(geodesic_bvp_solve(field, x, y, cfg)?.path)
}
