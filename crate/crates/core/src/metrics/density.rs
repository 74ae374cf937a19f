use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_len, Parametrized};
use crate::error::{Error, Result};
use crate::manifold::{check_dim, MetricField};

/// Data-driven diagonal metric that is cheap near the anchors and expensive
/// away from them:
///
/// ```text
/// g_x = (diag(h(x)) + ε·I)⁻¹
/// h_j(x) = Σ_i (a_i^j − x^j)² exp(−‖x − a_i‖² / (2σ²))
/// ```
///
/// Far from every anchor `g_x → ε⁻¹·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMetric {
    anchors: Vec<DVector<f64>>,
    log_bandwidth: f64,
    log_floor: f64,
}

pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-2;

impl DensityMetric {
    pub fn new(anchors: Vec<DVector<f64>>, bandwidth: f64, floor: f64) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidArgument("density metric needs at least one anchor".into()));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !(floor > 0.0) || !floor.is_finite() {
            return Err(Error::InvalidArgument(format!("floor must be strictly positive, got {floor}")));
        }
        let d = anchors[0].len();
        for a in &anchors {
            check_dim(d, a)?;
        }
        Ok(DensityMetric { anchors, log_bandwidth: bandwidth.ln(), log_floor: floor.ln() })
    }

    /// σ = median pairwise anchor distance, ε = 1e-2.
    pub fn with_defaults(anchors: Vec<DVector<f64>>) -> Result<Self> {
        let sigma = median_pairwise_distance(&anchors);
        let sigma = if sigma > 0.0 { sigma } else { 1.0 };
        Self::new(anchors, sigma, DEFAULT_DENSITY_FLOOR)
    }

    /// Keep `count` anchors chosen uniformly without replacement (original
    /// order preserved).
    pub fn subsampled(anchors: &[DVector<f64>], count: usize, bandwidth: f64, floor: f64, seed: u64) -> Result<Self> {
        if count == 0 || count > anchors.len() {
            return Err(Error::InvalidArgument(format!(
                "subsample count {count} outside 1..={}",
                anchors.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, anchors.len(), count).into_vec();
        idx.sort_unstable();
        Self::new(idx.into_iter().map(|i| anchors[i].clone()).collect(), bandwidth, floor)
    }

    pub fn anchors(&self) -> &[DVector<f64>] {
        &self.anchors
    }

    pub fn bandwidth(&self) -> f64 {
        self.log_bandwidth.exp()
    }

    pub fn floor(&self) -> f64 {
        self.log_floor.exp()
    }

    /// The vector `h(x)`.
    pub fn h(&self, x: &DVector<f64>) -> DVector<f64> {
        let s2 = self.bandwidth().powi(2);
        let mut h = DVector::zeros(x.len());
        for a in &self.anchors {
            let w = (-(x - a).norm_squared() / (2.0 * s2)).exp();
            if w == 0.0 {
                continue;
            }
            for j in 0..x.len() {
                h[j] += (a[j] - x[j]).powi(2) * w;
            }
        }
        h
    }
}

pub(crate) fn median_pairwise_distance(points: &[DVector<f64>]) -> f64 {
    let mut ds = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            ds.push((&points[i] - &points[j]).norm());
        }
    }
    if ds.is_empty() {
        return 0.0;
    }
    ds.sort_by(f64::total_cmp);
    let n = ds.len();
    if n % 2 == 1 {
        ds[n / 2]
    } else {
        0.5 * (ds[n / 2 - 1] + ds[n / 2])
    }
}

impl MetricField for DensityMetric {
    fn dim(&self) -> usize {
        self.anchors[0].len()
    }

    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        let eps = self.floor();
        let h = self.h(x);
        Ok(DMatrix::from_diagonal(&h.map(|hj| 1.0 / (hj + eps))))
    }

    fn derivative_at(&self, x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        let d = self.dim();
        if let Err(e) = check_dim(d, x) {
            return Some(Err(e));
        }
        let s2 = self.bandwidth().powi(2);
        let eps = self.floor();
        let mut h = DVector::<f64>::zeros(d);
        // dh[(k, j)] = ∂_k h_j
        let mut dh = DMatrix::<f64>::zeros(d, d);
        for a in &self.anchors {
            let w = (-(x - a).norm_squared() / (2.0 * s2)).exp();
            if w == 0.0 {
                continue;
            }
            for j in 0..d {
                let diff = a[j] - x[j];
                h[j] += diff * diff * w;
                for k in 0..d {
                    let mut term = diff * diff * w * (-(x[k] - a[k]) / s2);
                    if k == j {
                        term -= 2.0 * diff * w;
                    }
                    dh[(k, j)] += term;
                }
            }
        }
        let out = (0..d)
            .map(|k| {
                DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    (0..d).map(|j| -dh[(k, j)] / (h[j] + eps).powi(2)),
                ))
            })
            .collect();
        Some(Ok(out))
    }
}

impl Parametrized for DensityMetric {
    /// `[log σ, log ε]`
    fn pack(&self) -> Vec<f64> {
        vec![self.log_bandwidth, self.log_floor]
    }

    fn unpack(&self, theta: &[f64]) -> Result<Self> {
        check_len(2, theta)?;
        Ok(DensityMetric { anchors: self.anchors.clone(), log_bandwidth: theta[0], log_floor: theta[1] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::fd_metric_derivatives;

    fn v(c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(c)
    }

    #[test]
    fn far_from_anchors_is_inverse_floor() {
        let sigma = 0.3;
        let eps = 0.02;
        let m = DensityMetric::new(vec![v(&[0.0, 0.0]), v(&[0.5, 0.1])], sigma, eps).unwrap();
        let g = m.metric_at(&v(&[25.0 * sigma, 0.0])).unwrap();
        assert!((g - DMatrix::identity(2, 2) / eps).amax() < 1e-10);
    }

    #[test]
    fn at_single_anchor_displacement_vanishes() {
        let m = DensityMetric::new(vec![v(&[0.0, 0.0])], 1.0, 0.05).unwrap();
        let g = m.metric_at(&v(&[0.0, 0.0])).unwrap();
        assert!((g - DMatrix::identity(2, 2) / 0.05).amax() < 1e-12);
    }

    #[test]
    fn scalar_evaluation_at_one_bandwidth() {
        let sigma = 0.7;
        let eps = 0.01;
        let m = DensityMetric::new(vec![v(&[0.0])], sigma, eps).unwrap();
        let h = sigma * sigma * (-0.5f64).exp();
        let g = m.metric_at(&v(&[sigma])).unwrap();
        assert!((g[(0, 0)] - 1.0 / (h + eps)).abs() < 1e-12);
    }

    #[test]
    fn analytic_derivative_matches_fd() {
        let m = DensityMetric::new(vec![v(&[0.0, 0.0]), v(&[1.0, 0.5]), v(&[-0.5, 1.0])], 0.6, 0.05).unwrap();
        let x = v(&[0.2, 0.4]);
        let a = m.derivative_at(&x).unwrap().unwrap();
        let f = fd_metric_derivatives(&m, &x, 1e-5).unwrap();
        for (da, df) in a.iter().zip(&f) {
            assert!((da - df).amax() < 1e-6 * (1.0 + da.amax()), "{da} {df}");
        }
    }

    #[test]
    fn defaults_use_median_distance() {
        let pts = vec![v(&[0.0]), v(&[1.0]), v(&[3.0])];
        let m = DensityMetric::with_defaults(pts).unwrap();
        assert!((m.bandwidth() - 2.0).abs() < 1e-14);
        assert!((m.floor() - 1e-2).abs() < 1e-16);
        assert!(DensityMetric::new(vec![v(&[0.0])], 1.0, 0.0).is_err());
    }

    #[test]
    fn round_trip() {
        let m = DensityMetric::new(vec![v(&[0.0])], 0.5, 0.01).unwrap();
        assert_eq!(m.unpack(&m.pack()).unwrap(), m);
    }

    #[test]
    fn subsample_is_seeded() {
        let pts: Vec<_> = (0..20).map(|i| v(&[i as f64])).collect();
        let a = DensityMetric::subsampled(&pts, 5, 1.0, 0.01, 3).unwrap();
        let b = DensityMetric::subsampled(&pts, 5, 1.0, 0.01, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.anchors().len(), 5);
    }
}
