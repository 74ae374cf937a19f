use nalgebra::DVector;

use super::config::SolverConfig;
use super::path::GeodesicPath;
use crate::error::{BestIterate, Error, Result};
use crate::linalg;
use crate::manifold::{check_dim, metric, metric_derivatives, MetricField};
use crate::optim::{lbfgs, Status};

const STALL_ACCEPT: f64 = 1e-6;

/// Gaussian bumps in `t`, centered at `(b + ½)/B` with width `1/B`,
/// multiplied by the endpoint-vanishing envelope `t(1 − t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpBasis {
    pub size: usize,
}

impl BumpBasis {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("basis_size must be ≥ 1".into()));
        }
        Ok(BumpBasis { size })
    }

    /// `(φ_b(t), φ_b'(t))` with `φ_b = t(1−t)ψ_b`.
    pub fn eval(&self, b: usize, t: f64) -> (f64, f64) {
        let w = 1.0 / self.size as f64;
        let c = (b as f64 + 0.5) * w;
        let z = (t - c) / w;
        let psi = (-0.5 * z * z).exp();
        let dpsi = -psi * z / w;
        let env = t * (1.0 - t);
        let denv = 1.0 - 2.0 * t;
        (env * psi, denv * psi + env * dpsi)
    }
}

/// `γ_η(t) = (1 − t)x + t y + Σ_b η_b φ_b(t)` with coefficient vectors
/// `η_b ∈ ℝᵈ` packed consecutively.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionCurve {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub basis: BumpBasis,
    pub coefficients: DVector<f64>,
}

impl RegressionCurve {
    pub fn straight(x: &DVector<f64>, y: &DVector<f64>, basis: BumpBasis) -> Self {
        RegressionCurve { x: x.clone(), y: y.clone(), basis, coefficients: DVector::zeros(basis.size * x.len()) }
    }

    pub fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let d = self.x.len();
        let mut p = &self.x * (1.0 - t) + &self.y * t;
        let mut v = &self.y - &self.x;
        for b in 0..self.basis.size {
            let (phi, dphi) = self.basis.eval(b, t);
            let eta = self.coefficients.rows(b * d, d);
            p += eta * phi;
            v += eta * dphi;
        }
        (p, v)
    }

    /// Gauss–Legendre approximation of `∫ √(g(γ̇, γ̇)) dt`.
    pub fn length(&self, field: &dyn MetricField, nodes: usize) -> Result<f64> {
        let (times, weights) = gauss_legendre(nodes);
        times
            .iter()
            .zip(&weights)
            .map(|(&t, w)| {
                let (p, v) = self.eval(t);
                Ok(w * linalg::quad(&metric(field, &p)?, &v, &v).max(0.0).sqrt())
            })
            .sum()
    }

    /// Samples the curve at `nodes` uniform times.
    pub fn to_path(&self, nodes: usize) -> GeodesicPath {
        let nodes = nodes.max(2);
        let times: Vec<f64> = (0..nodes).map(|k| if k == nodes - 1 { 1.0 } else { k as f64 / (nodes - 1) as f64 }).collect();
        let (points, velocities) = times.iter().map(|&t| self.eval(t)).unzip();
        GeodesicPath { times, points, velocities }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 1..=m {
        // Newton on P_m from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - z));
        weights.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (nodes, weights)
}

/// Gauss–Legendre energy `Σ_m w_m γ̇ᵀ g(γ) γ̇` on `nodes` points and its
/// gradient with respect to the packed coefficients.
pub fn curve_energy(field: &dyn MetricField, curve: &RegressionCurve, nodes: usize) -> Result<(f64, DVector<f64>)> {
    let d = curve.x.len();
    let (times, weights) = gauss_legendre(nodes);
    let constant = field.constant_matrix();
    let mut energy = 0.0;
    let mut grad = DVector::zeros(curve.coefficients.len());
    for (&t, w) in times.iter().zip(&weights) {
        let (p, v) = curve.eval(t);
        let g = match &constant {
            Some(g) => g.clone(),
            None => metric(field, &p)?,
        };
        let gv = &g * &v;
        energy += w * v.dot(&gv);
        let dm = match constant {
            Some(_) => DVector::zeros(d),
            None => {
                let dg = metric_derivatives(field, &p, None)?;
                DVector::from_iterator(d, dg.iter().map(|m| linalg::quad(m, &v, &v)))
            }
        };
        for b in 0..curve.basis.size {
            let (phi, dphi) = curve.basis.eval(b, t);
            let mut seg = grad.rows_mut(b * d, d);
            seg += (&gv * (2.0 * dphi) + &dm * phi) * *w;
        }
    }
    Ok((energy, grad))
}

#[derive(Debug, Clone)]
pub struct CurveSolution {
    pub curve: RegressionCurve,
    pub energy_history: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Fits the bump coefficients of `γ_η` by minimizing the quadrature energy.
pub fn geodesic_regression_solve(
    field: &dyn MetricField,
    x: &DVector<f64>,
    y: &DVector<f64>,
    basis_size: usize,
    cfg: &SolverConfig,
) -> Result<CurveSolution> {
    cfg.validate()?;
    check_dim(field.dim(), x)?;
    check_dim(field.dim(), y)?;
    let basis = BumpBasis::new(basis_size)?;
    let template = RegressionCurve::straight(x, y, basis);
    let nodes = cfg.curve_nodes;
    let outcome = lbfgs(
        |eta| {
            let curve = RegressionCurve { coefficients: eta.clone(), ..template.clone() };
            curve_energy(field, &curve, nodes)
        },
        template.coefficients.clone(),
        cfg.energy_max_iter,
        cfg.grad_tol,
        cfg.step_size,
    )?;
    let converged = outcome.status == Status::Converged
        || (outcome.status == Status::Stalled && outcome.grad_norm <= STALL_ACCEPT);
    let solution = CurveSolution {
        curve: RegressionCurve { coefficients: outcome.x, ..template },
        energy_history: outcome.history,
        grad_norm: outcome.grad_norm,
        iterations: outcome.iterations,
    };
    if !converged {
        let best = BestIterate::Path(solution.curve.to_path(nodes));
        return Err(Error::no_convergence(solution.iterations, solution.grad_norm, best));
    }
    Ok(solution)
}

/// The fitted curve sampled on `cfg.curve_nodes` nodes.
pub fn geodesic_regression_curve(
    field: &dyn MetricField,
    x: &DVector<f64>,
    y: &DVector<f64>,
    basis_size: usize,
    cfg: &SolverConfig,
) -> Result<GeodesicPath> {
    Ok(geodesic_regression_solve(field, x, y, basis_size, cfg)?.curve.to_path(cfg.curve_nodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::HalfPlaneMetric;
    use crate::geo::path::path_energy;
    use crate::manifold::IdentityMetric;

    fn v(c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(c)
    }

    #[test]
    fn quadrature_is_exact_for_polynomials() {
        for m in [1, 2, 5, 33] {
            let (t, w) = gauss_legendre(m);
            for deg in 0..2 * m {
                let q: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "m={m} deg={deg}");
            }
        }
    }

    #[test]
    fn endpoints_are_interpolated_exactly() {
        let mut c = RegressionCurve::straight(&v(&[0.5, 1.0]), &v(&[2.0, 3.0]), BumpBasis::new(3).unwrap());
        c.coefficients = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        assert_eq!(c.eval(0.0).0, v(&[0.5, 1.0]));
        assert_eq!(c.eval(1.0).0, v(&[2.0, 3.0]));
    }

    #[test]
    fn energy_gradient_matches_differences() {
        let mut c = RegressionCurve::straight(&v(&[-1.0, 1.0]), &v(&[1.0, 1.0]), BumpBasis::new(4).unwrap());
        c.coefficients = DVector::from_fn(8, |i, _| 0.05 * (i as f64).sin());
        let (_, g) = curve_energy(&HalfPlaneMetric, &c, 33).unwrap();
        let h = 1e-6;
        for i in 0..8 {
            let mut p = c.clone();
            p.coefficients[i] += h;
            let ep = curve_energy(&HalfPlaneMetric, &p, 33).unwrap().0;
            p.coefficients[i] -= 2.0 * h;
            let em = curve_energy(&HalfPlaneMetric, &p, 33).unwrap().0;
            assert!(((ep - em) / (2.0 * h) - g[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_fit_is_straight() {
        let (x, y) = (v(&[0.0, 0.0]), v(&[3.0, 4.0]));
        let sol = geodesic_regression_solve(&IdentityMetric::new(2), &x, &y, 5, &SolverConfig::default()).unwrap();
        let path = sol.curve.to_path(65);
        let e = path_energy(&IdentityMetric::new(2), &path).unwrap();
        assert!((e - 25.0).abs() < 1e-6);
    }

    #[test]
    fn half_plane_fit_beats_the_chord() {
        let (x, y) = (v(&[-1.0, 1.0]), v(&[1.0, 1.0]));
        let cfg = SolverConfig::default();
        let path = geodesic_regression_curve(&HalfPlaneMetric, &x, &y, 8, &cfg).unwrap();
        let chord = GeodesicPath::straight(&x, &y, cfg.curve_nodes);
        assert!(path_energy(&HalfPlaneMetric, &path).unwrap() < path_energy(&HalfPlaneMetric, &chord).unwrap());
    }
}
