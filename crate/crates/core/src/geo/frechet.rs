use nalgebra::DVector;

use super::config::SolverConfig;
use super::exp::exp_point;
use super::log::log_map_shooting;
use crate::error::{BestIterate, Error, Result};
use crate::linalg;
use crate::manifold::{check_dim, metric, MetricField};

#[derive(Debug, Clone)]
pub struct FrechetMean {
    pub point: DVector<f64>,
    /// `g`-norm of the mean logarithm at `point`.
    pub mean_log_norm: f64,
    pub iterations: usize,
}

/// Karcher mean by the fixed-point iteration `q ← Exp_q(mean_i Log_q(x_i))`,
/// started at the chart average, until the mean logarithm's `g`-norm is at
/// most `cfg.mean_tol`.
pub fn frechet_mean_solve(field: &dyn MetricField, points: &[DVector<f64>], cfg: &SolverConfig) -> Result<FrechetMean> {
    cfg.validate()?;
    let Some(first) = points.first() else {
        return Err(Error::InvalidArgument("Fréchet mean of an empty point set".into()));
    };
    for p in points {
        check_dim(field.dim(), p)?;
    }
    if points.len() == 1 {
        return Ok(FrechetMean { point: first.clone(), mean_log_norm: 0.0, iterations: 0 });
    }
    let n = points.len() as f64;
    let mut q = points.iter().fold(DVector::zeros(field.dim()), |a, p| a + p) / n;
    let mut last = f64::INFINITY;
    for it in 0..cfg.max_iter {
        let mut mean = DVector::zeros(field.dim());
        for p in points {
            mean += log_map_shooting(field, &q, p, cfg)?;
        }
        mean /= n;
        last = linalg::quad(&metric(field, &q)?, &mean, &mean).max(0.0).sqrt();
        if last <= cfg.mean_tol {
            return Ok(FrechetMean { point: q, mean_log_norm: last, iterations: it });
        }
        q = exp_point(field, &q, &mean, cfg)?;
    }
    Err(Error::no_convergence(cfg.max_iter, last, BestIterate::Vector(q)))
}

pub fn frechet_mean(field: &dyn MetricField, points: &[DVector<f64>], cfg: &SolverConfig) -> Result<DVector<f64>> {
    Ok(frechet_mean_solve(field, points, cfg)?.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::HalfPlaneMetric;
    use crate::geo::distance::{riemannian_distance, DistanceMethod};
    use crate::manifold::IdentityMetric;

    fn v(c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(c)
    }

    #[test]
    fn flat_mean_is_average() {
        let pts = vec![v(&[0.0, 0.0]), v(&[2.0, 0.0]), v(&[1.0, 3.0])];
        let m = frechet_mean(&IdentityMetric::new(2), &pts, &SolverConfig::default()).unwrap();
        assert!((m - v(&[1.0, 1.0])).amax() < 1e-12);
    }

    #[test]
    fn edge_cases() {
        let cfg = SolverConfig::default();
        assert!(frechet_mean(&IdentityMetric::new(2), &[], &cfg).is_err());
        assert_eq!(frechet_mean(&HalfPlaneMetric, &[v(&[0.3, 2.0])], &cfg).unwrap(), v(&[0.3, 2.0]));
    }

    #[test]
    fn two_point_mean_is_equidistant() {
        let cfg = SolverConfig::default();
        let (a, b) = (v(&[-1.0, 1.0]), v(&[1.5, 2.0]));
        let m = frechet_mean(&HalfPlaneMetric, &[a.clone(), b.clone()], &cfg).unwrap();
        let da = riemannian_distance(&HalfPlaneMetric, &m, &a, DistanceMethod::Shooting, &cfg).unwrap();
        let db = riemannian_distance(&HalfPlaneMetric, &m, &b, DistanceMethod::Shooting, &cfg).unwrap();
        assert!((da - db).abs() < 1e-4);
    }
}
