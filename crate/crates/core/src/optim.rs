//! Inner optimizers used by the geodesic solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Residual (or gradient) below the requested tolerance.
    Converged,
    /// No further decrease is possible at working precision.
    Stalled,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub status: Status,
}

/// Damped Gauss–Newton on `‖r(x)‖²` with a central-difference Jacobian.
///
/// `residual` returning `Err` at a trial point rejects that trial (as if the
/// residual were infinite); an error at the starting point is propagated.
pub fn levenberg_marquardt(
    mut residual: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    x0: DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<LmOutcome> {
    let mut x = x0;
    let mut r = residual(&x)?;
    let mut norm = r.norm();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < max_iter {
        if norm <= tol {
            return Ok(LmOutcome { x, residual_norm: norm, iterations, status: Status::Converged });
        }
        iterations += 1;
        let j = fd_jacobian(&mut residual, &x, r.len())?;
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * &r;
        let scale = jtj.diagonal().max().max(1e-300);
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * scale;
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &x + &step;
            match residual(&trial) {
                Ok(rt) if rt.norm().is_finite() && rt.norm() < norm => {
                    let rel = step.norm() / (1.0 + x.norm());
                    x = trial;
                    r = rt;
                    let old = norm;
                    norm = r.norm();
                    lambda = (lambda / 3.0).max(1e-15);
                    accepted = true;
                    if rel < 1e-15 || (old - norm) <= 1e-15 * old {
                        let status = if norm <= tol { Status::Converged } else { Status::Stalled };
                        return Ok(LmOutcome { x, residual_norm: norm, iterations, status });
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !accepted {
            let status = if norm <= tol { Status::Converged } else { Status::Stalled };
            return Ok(LmOutcome { x, residual_norm: norm, iterations, status });
        }
    }
    let status = if norm <= tol { Status::Converged } else { Status::MaxIter };
    Ok(LmOutcome { x, residual_norm: norm, iterations, status })
}

fn fd_jacobian(
    residual: &mut impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    x: &DVector<f64>,
    m: usize,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let h = 1e-7 * (1.0 + x.amax());
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    for i in 0..n {
        xp[i] = x[i] + h;
        let rp = residual(&xp)?;
        xp[i] = x[i] - h;
        let rm = residual(&xp)?;
        xp[i] = x[i];
        j.set_column(i, &((rp - rm) / (2.0 * h)));
    }
    Ok(j)
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: Status,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

/// L-BFGS (memory 10) with Armijo backtracking; every accepted step strictly
/// decreases the objective. `objective` returns the value and gradient; an
/// `Err` at a trial point counts as a failed trial.
pub fn lbfgs(
    mut objective: impl FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
    x0: DVector<f64>,
    max_iter: usize,
    grad_tol: f64,
    initial_step: f64,
) -> Result<LbfgsOutcome> {
    const MEMORY: usize = 10;
    let mut x = x0;
    let (mut f, mut g) = objective(&x)?;
    let mut history = vec![f];
    let mut s_hist: Vec<DVector<f64>> = Vec::new();
    let mut y_hist: Vec<DVector<f64>> = Vec::new();
    let mut iterations = 0;
    let mut status = Status::MaxIter;
    while iterations < max_iter {
        if g.amax() <= grad_tol {
            status = Status::Converged;
            break;
        }
        iterations += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / y.dot(s);
            let a = rho * s.dot(&q);
            q -= y * a;
            alphas.push((a, rho));
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => s.dot(y) / y.dot(y),
            _ => initial_step / g.norm().max(1e-300),
        };
        let mut dir = q * gamma;
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = rho * y.dot(&dir);
            dir += s * (a - b);
        }
        dir = -dir;
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            // not a descent direction: reset memory
            s_hist.clear();
            y_hist.clear();
            dir = -&g * (initial_step / g.norm().max(1e-300));
            slope = g.dot(&dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            if let Ok((ft, gt)) = objective(&trial) {
                if ft.is_finite() && ft <= f + 1e-4 * step * slope && ft < f {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            status = if g.amax() <= grad_tol { Status::Converged } else { Status::Stalled };
            break;
        };
        let s = &xn - &x;
        let y = &gn - &g;
        if s.dot(&y) > 1e-300 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        x = xn;
        f = fnew;
        g = gn;
        history.push(f);
    }
    if status == Status::MaxIter && g.amax() <= grad_tol {
        status = Status::Converged;
    }
    Ok(LbfgsOutcome { grad_norm: g.amax(), x, value: f, iterations, status, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lm_solves_nonlinear_system() {
        let out = levenberg_marquardt(
            |x| Ok(DVector::from_column_slice(&[x[0] * x[0] - 2.0, x[0] * x[1] - 1.0])),
            DVector::from_column_slice(&[1.0, 1.0]),
            100,
            1e-12,
        )
        .unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!((out.x[0] - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn lbfgs_minimizes_rosenbrock_monotonically() {
        let out = lbfgs(
            |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = DVector::from_column_slice(&[
                    -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                    200.0 * (b - a * a),
                ]);
                Ok((f, g))
            },
            DVector::from_column_slice(&[-1.2, 1.0]),
            1000,
            1e-10,
            1.0,
        )
        .unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-8, "{:?}", out.x);
        assert!(out.history.windows(2).all(|w| w[1] < w[0]));
    }
}
