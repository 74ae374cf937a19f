use nalgebra::DVector;

use super::config::{Integrator, SolverConfig};
use super::path::GeodesicPath;
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{christoffel, check_dim, metric, metric_derivatives, metric_inverse, MetricField};

/// States beyond this magnitude abort the integration.
pub const BLOW_UP_LIMIT: f64 = 1e12;

fn guard(t: f64, parts: &[&DVector<f64>]) -> Result<()> {
    for p in parts {
        if p.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_LIMIT) {
            return Err(Error::BlowUp { t });
        }
    }
    Ok(())
}

/// `γ̈ = −Γ(γ̇, γ̇)`
pub(crate) fn geodesic_acceleration(field: &dyn MetricField, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(-christoffel(field, x)?.contract(v, v))
}

fn rk4_step(field: &dyn MetricField, x: &DVector<f64>, v: &DVector<f64>, h: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let a1 = geodesic_acceleration(field, x, v)?;
    let (x2, v2) = (x + v * (0.5 * h), v + &a1 * (0.5 * h));
    let a2 = geodesic_acceleration(field, &x2, &v2)?;
    let (x3, v3) = (x + &v2 * (0.5 * h), v + &a2 * (0.5 * h));
    let a3 = geodesic_acceleration(field, &x3, &v3)?;
    let (x4, v4) = (x + &v3 * h, v + &a3 * h);
    let a4 = geodesic_acceleration(field, &x4, &v4)?;
    let xn = x + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
    let vn = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    Ok((xn, vn))
}

/// `H(x, p) = ½ pᵀ g_x⁻¹ p`
pub fn hamiltonian(field: &dyn MetricField, x: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
    let g_inv = metric_inverse(field, x)?;
    Ok(0.5 * linalg::quad(&g_inv, p, p))
}

/// `(∂H/∂p, ∂H/∂x) = (u, −½ uᵀ ∂_k g u)` with `u = g⁻¹p`.
fn hamiltonian_gradients(field: &dyn MetricField, x: &DVector<f64>, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let u = metric_inverse(field, x)? * p;
    if field.constant_matrix().is_some() {
        return Ok((u, DVector::zeros(x.len())));
    }
    let dg = metric_derivatives(field, x, None)?;
    let dx = DVector::from_iterator(x.len(), dg.iter().map(|d| -0.5 * linalg::quad(d, &u, &u)));
    Ok((u, dx))
}

const IMPLICIT_ITERS: usize = 100;

fn converged(new: &DVector<f64>, old: &DVector<f64>) -> bool {
    (new - old).amax() <= 1e-15 * (1.0 + new.amax())
}

/// One generalized Störmer–Verlet step (symplectic, second order, symmetric).
fn verlet_step(field: &dyn MetricField, x: &DVector<f64>, p: &DVector<f64>, h: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    // p½ = p − h/2 ∂ₓH(x, p½)
    let mut half = p.clone();
    for _ in 0..IMPLICIT_ITERS {
        let next = p - hamiltonian_gradients(field, x, &half)?.1 * (0.5 * h);
        let done = converged(&next, &half);
        half = next;
        if done {
            break;
        }
    }
    // x' = x + h/2 (∂ₚH(x, p½) + ∂ₚH(x', p½))
    let u0 = hamiltonian_gradients(field, x, &half)?.0;
    let mut xn = x + &u0 * h;
    for _ in 0..IMPLICIT_ITERS {
        let next = x + (&u0 + hamiltonian_gradients(field, &xn, &half)?.0) * (0.5 * h);
        let done = converged(&next, &xn);
        xn = next;
        if done {
            break;
        }
    }
    // p' = p½ − h/2 ∂ₓH(x', p½)
    let pn = &half - hamiltonian_gradients(field, &xn, &half)?.1 * (0.5 * h);
    Ok((xn, pn))
}

/// Yoshida's triple jump of Störmer–Verlet steps: symplectic, symmetric and
/// fourth order.
fn leapfrog_step(field: &dyn MetricField, x: &DVector<f64>, p: &DVector<f64>, h: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let cbrt2 = 2f64.cbrt();
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 * w1;
    let (x1, p1) = verlet_step(field, x, p, w1 * h)?;
    let (x2, p2) = verlet_step(field, &x1, &p1, w0 * h)?;
    verlet_step(field, &x2, &p2, w1 * h)
}

/// Geodesic with `γ(0) = x`, `γ̇(0) = v` integrated over unit time.
pub fn exp_map(field: &dyn MetricField, x: &DVector<f64>, v: &DVector<f64>, cfg: &SolverConfig) -> Result<GeodesicPath> {
    rollout(field, x, v, 1.0, cfg)
}

/// `Exp_x(v)`, the time-one endpoint.
pub fn exp_point(field: &dyn MetricField, x: &DVector<f64>, v: &DVector<f64>, cfg: &SolverConfig) -> Result<DVector<f64>> {
    Ok(exp_map(field, x, v, cfg)?.end().clone())
}

/// Geodesic from `(x, v)` over `[0, duration]`, stored on rescaled times
/// `[0, 1]` with velocities scaled by `duration` (so the path is
/// `s ↦ γ(s·duration)` and its endpoint is `Exp_x(duration·v)`).
pub fn rollout(field: &dyn MetricField, x: &DVector<f64>, v: &DVector<f64>, duration: f64, cfg: &SolverConfig) -> Result<GeodesicPath> {
    cfg.validate()?;
    check_dim(field.dim(), x)?;
    check_dim(field.dim(), v)?;
    let n = cfg.steps;
    let h = duration / n as f64;
    let times: Vec<f64> = (0..=n).map(|k| if k == n { 1.0 } else { k as f64 / n as f64 }).collect();
    let mut points = Vec::with_capacity(n + 1);
    let mut velocities = Vec::with_capacity(n + 1);
    guard(0.0, &[x, v])?;
    if field.constant_matrix().is_some() {
        // straight lines, exactly
        let points = times.iter().map(|&t| x + v * (t * duration)).collect();
        return Ok(GeodesicPath { times, points, velocities: vec![v * duration; n + 1] });
    }
    points.push(x.clone());
    velocities.push(v * duration);
    match cfg.integrator {
        Integrator::ChristoffelRk4 => {
            let (mut xc, mut vc) = (x.clone(), v.clone());
            for k in 1..=n {
                (xc, vc) = rk4_step(field, &xc, &vc, h)?;
                guard(k as f64 * h, &[&xc, &vc])?;
                points.push(xc.clone());
                velocities.push(&vc * duration);
            }
        }
        Integrator::HamiltonianLeapfrog => {
            let mut xc = x.clone();
            let mut pc = metric(field, x)? * v;
            for k in 1..=n {
                (xc, pc) = leapfrog_step(field, &xc, &pc, h)?;
                let vc = metric_inverse(field, &xc)? * &pc;
                guard(k as f64 * h, &[&xc, &vc])?;
                points.push(xc.clone());
                velocities.push(vc * duration);
            }
        }
    }
    Ok(GeodesicPath { times, points, velocities })
}

/// `½ g(γ̇, γ̇)` at every node — the Hamiltonian along the path.
pub fn energy_profile(field: &dyn MetricField, path: &GeodesicPath) -> Result<Vec<f64>> {
    path.points
        .iter()
        .zip(&path.velocities)
        .map(|(p, v)| Ok(0.5 * linalg::quad(&metric(field, p)?, v, v)))
        .collect()
}
