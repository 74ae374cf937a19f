use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use super::exp::{exp_point, rollout, BLOW_UP_LIMIT};
use super::log::log_map_shooting;
use super::path::GeodesicPath;
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{check_dim, christoffel, metric, ChristoffelTensor, MetricField};

/// Perturbation size of the fanning scheme.
pub const FANNING_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum TransportMethod {
    Ode,
    Schild { rungs: usize },
    Pole { rungs: usize },
    /// Only valid along geodesics.
    Fanning { steps: usize },
}

fn guard(t: f64, v: &DVector<f64>) -> Result<()> {
    if v.iter().any(|c| !c.is_finite() || c.abs() > BLOW_UP_LIMIT) {
        return Err(Error::BlowUp { t });
    }
    Ok(())
}

/// `V̇ = −Γ(γ̇, V)`
fn transport_rate(gamma: &ChristoffelTensor, velocity: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    -gamma.contract(velocity, v)
}

/// Transports `v` from `curve(t_from)` to `curve(t_to)` (either direction) with
/// one RK4 step per stretch between the curve's own nodes; off-node positions
/// and velocities come from cubic Hermite interpolation.
pub fn transport_interval(
    field: &dyn MetricField,
    curve: &GeodesicPath,
    v: &DVector<f64>,
    t_from: f64,
    t_to: f64,
) -> Result<DVector<f64>> {
    curve.validate()?;
    check_dim(field.dim(), v)?;
    if !(0.0..=1.0).contains(&t_from) || !(0.0..=1.0).contains(&t_to) {
        return Err(Error::InvalidArgument(format!("transport times must lie in [0, 1], got {t_from} → {t_to}")));
    }
    let (lo, hi) = (t_from.min(t_to), t_from.max(t_to));
    let mut breaks = vec![t_from];
    let inner: Vec<f64> = curve.times.iter().copied().filter(|&t| t > lo && t < hi).collect();
    if t_to >= t_from {
        breaks.extend(inner);
    } else {
        breaks.extend(inner.into_iter().rev());
    }
    breaks.push(t_to);

    let eval = |t: f64| -> Result<(ChristoffelTensor, DVector<f64>)> {
        let (p, vel) = curve.sample(t);
        Ok((christoffel(field, &p)?, vel))
    };
    let mut w = v.clone();
    let mut start = eval(t_from)?;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a == b {
            continue;
        }
        let h = b - a;
        let mid = eval(0.5 * (a + b))?;
        let end = eval(b)?;
        let k1 = transport_rate(&start.0, &start.1, &w);
        let k2 = transport_rate(&mid.0, &mid.1, &(&w + &k1 * (0.5 * h)));
        let k3 = transport_rate(&mid.0, &mid.1, &(&w + &k2 * (0.5 * h)));
        let k4 = transport_rate(&end.0, &end.1, &(&w + &k3 * h));
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        guard(b, &w)?;
        start = end;
    }
    Ok(w)
}

/// Parallel transport of `v0` from the start to the end of `curve`.
pub fn parallel_transport_ode(field: &dyn MetricField, curve: &GeodesicPath, v0: &DVector<f64>) -> Result<DVector<f64>> {
    transport_interval(field, curve, v0, 0.0, 1.0)
}

fn check_rungs(rungs: usize) -> Result<()> {
    if rungs == 0 {
        return Err(Error::InvalidArgument("rungs must be ≥ 1".into()));
    }
    Ok(())
}

/// Rungs are short, so each one integrates with a proportional share of the
/// configured steps.
fn rung_config(cfg: &SolverConfig, rungs: usize) -> SolverConfig {
    SolverConfig { steps: cfg.steps.div_ceil(rungs).max(MIN_RUNG_STEPS), ..cfg.clone() }
}

const MIN_RUNG_STEPS: usize = 16;

fn rung_points(curve: &GeodesicPath, rungs: usize) -> Vec<DVector<f64>> {
    (0..=rungs).map(|i| curve.sample(i as f64 / rungs as f64).0).collect()
}

/// Schild's ladder: each rung closes a geodesic parallelogram through the
/// midpoint of its diagonal. The transported vector is scaled by `1/rungs`
/// while climbing.
pub fn schild_ladder(
    field: &dyn MetricField,
    curve: &GeodesicPath,
    v0: &DVector<f64>,
    rungs: usize,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    check_rungs(rungs)?;
    check_dim(field.dim(), v0)?;
    let s = 1.0 / rungs as f64;
    let pts = rung_points(curve, rungs);
    let cfg = &rung_config(cfg, rungs);
    let mut w = v0.clone();
    for i in 0..rungs {
        let (a, b) = (&pts[i], &pts[i + 1]);
        let x = exp_point(field, a, &(&w * s), cfg)?;
        let to_b = log_map_shooting(field, &x, b, cfg)?;
        let m = exp_point(field, &x, &(to_b * 0.5), cfg)?;
        let to_m = log_map_shooting(field, a, &m, cfg)?;
        let x2 = exp_point(field, a, &(to_m * 2.0), cfg)?;
        w = log_map_shooting(field, b, &x2, cfg)? / s;
        guard((i + 1) as f64 * s, &w)?;
    }
    Ok(w)
}

/// Pole ladder: each rung reflects the scaled vector's tip through the
/// midpoint of the main-curve segment.
pub fn pole_ladder(
    field: &dyn MetricField,
    curve: &GeodesicPath,
    v0: &DVector<f64>,
    rungs: usize,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    check_rungs(rungs)?;
    check_dim(field.dim(), v0)?;
    let s = 1.0 / rungs as f64;
    let pts = rung_points(curve, rungs);
    let cfg = &rung_config(cfg, rungs);
    let mut w = v0.clone();
    for i in 0..rungs {
        let (a, b) = (&pts[i], &pts[i + 1]);
        let m = curve.sample((i as f64 + 0.5) * s).0;
        let x = exp_point(field, a, &(&w * s), cfg)?;
        let to_x = log_map_shooting(field, &m, &x, cfg)?;
        let y = exp_point(field, &m, &(-to_x), cfg)?;
        w = -log_map_shooting(field, b, &y, cfg)? / s;
        guard((i + 1) as f64 * s, &w)?;
    }
    Ok(w)
}

/// Fanning scheme along `t ↦ Exp_x(t·v_geo)`: at each step of size `h` the
/// transported vector is the difference quotient
/// `(Exp(h(v + εW)) − Exp(h v)) / (εh)`, rescaled to the initial `g`-norm.
pub fn fanning_scheme(
    field: &dyn MetricField,
    x: &DVector<f64>,
    v_geo: &DVector<f64>,
    v0: &DVector<f64>,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be ≥ 1".into()));
    }
    check_dim(field.dim(), x)?;
    check_dim(field.dim(), v_geo)?;
    check_dim(field.dim(), v0)?;
    let h = 1.0 / steps as f64;
    let sub = SolverConfig { steps: cfg.steps.div_ceil(steps).max(2), ..cfg.clone() };
    let norm0 = linalg::quad(&metric(field, x)?, v0, v0);
    if norm0 == 0.0 {
        return Ok(DVector::zeros(v0.len()));
    }
    let (mut p, mut v, mut w) = (x.clone(), v_geo.clone(), v0.clone());
    for k in 0..steps {
        let main = rollout(field, &p, &v, h, &sub)?;
        let perturbed = rollout(field, &p, &(&v + &w * FANNING_EPSILON), h, &sub)?;
        let q = main.end().clone();
        w = (perturbed.end() - &q) / (FANNING_EPSILON * h);
        let n = linalg::quad(&metric(field, &q)?, &w, &w);
        if !(n > 0.0) {
            return Err(Error::BlowUp { t: (k + 1) as f64 * h });
        }
        w *= (norm0 / n).sqrt();
        guard((k + 1) as f64 * h, &w)?;
        v = main.velocities.last().expect("rollout has nodes") / h;
        p = q;
    }
    Ok(w)
}

/// `Exp_{γ(t)}(T_{t0→t} w)`: transports `w` along `geo` and shoots from there.
pub fn exp_parallelize(
    field: &dyn MetricField,
    geo: &GeodesicPath,
    t0: f64,
    w: &DVector<f64>,
    t: f64,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    let moved = transport_interval(field, geo, w, t0, t)?;
    let base = geo.sample(t).0;
    exp_point(field, &base, &moved, cfg)
}
