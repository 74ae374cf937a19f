use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::spec::{MapSpec, MetricSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{check_dim, metric, MetricField};

/// Smooth map from a `d`-dimensional chart into an `m`-dimensional target chart.
pub trait EmbeddingMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Analytic `m×d` Jacobian, if available.
    fn jacobian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Serializable description, for built-in maps.
    fn spec(&self) -> Option<MapSpec> {
        None
    }
}

/// Jacobian of `map` at `x`: analytic when provided, central differences otherwise.
pub fn jacobian(map: &dyn EmbeddingMap, x: &DVector<f64>) -> DMatrix<f64> {
    if let Some(j) = map.jacobian(x) {
        return j;
    }
    let h = linalg::fd_step(x);
    let mut j = DMatrix::zeros(map.output_dim(), map.input_dim());
    let mut xp = x.clone();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = map.apply(&xp);
        xp[i] = x[i] - h;
        let fm = map.apply(&xp);
        xp[i] = x[i];
        j.set_column(i, &((fp - fm) / (2.0 * h)));
    }
    j
}

/// `x ↦ A x + b`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if offset.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: offset.len() });
        }
        Ok(LinearMap { matrix, offset })
    }

    pub fn identity(d: usize) -> Self {
        LinearMap { matrix: DMatrix::identity(d, d), offset: DVector::zeros(d) }
    }
}

impl EmbeddingMap for LinearMap {
    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.offset
    }
    fn jacobian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.matrix.clone())
    }
    fn spec(&self) -> Option<MapSpec> {
        Some(MapSpec::Linear {
            rows: self.matrix.nrows(),
            cols: self.matrix.ncols(),
            matrix: row_major(&self.matrix),
            offset: self.offset.iter().copied().collect(),
        })
    }
}

/// `θ ↦ r (cos θ, sin θ)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleMap {
    pub radius: f64,
}

impl EmbeddingMap for CircleMap {
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_column_slice(&[self.radius * x[0].cos(), self.radius * x[0].sin()])
    }
    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_column_slice(2, 1, &[-self.radius * x[0].sin(), self.radius * x[0].cos()]))
    }
    fn spec(&self) -> Option<MapSpec> {
        Some(MapSpec::Circle { radius: self.radius })
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Metric induced on the domain of `map`: `g_x = Jᵀ g_{f(x)} J`.
#[derive(Clone)]
pub struct PullbackMetric {
    map: Arc<dyn EmbeddingMap>,
    target: Arc<dyn MetricField>,
    target_spec: Option<MetricSpec>,
}

/// Jacobians whose singular-value ratio falls below this are rejected.
pub const RANK_TOL: f64 = 1e-10;

impl PullbackMetric {
    pub fn new(map: Arc<dyn EmbeddingMap>, target: Arc<dyn MetricField>) -> Result<Self> {
        if map.output_dim() < map.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "map from {} into {} dimensions cannot be an immersion",
                map.input_dim(),
                map.output_dim()
            )));
        }
        if target.dim() != map.output_dim() {
            return Err(Error::DimensionMismatch { expected: map.output_dim(), got: target.dim() });
        }
        Ok(PullbackMetric { map, target, target_spec: None })
    }

    pub(crate) fn with_target_spec(mut self, spec: MetricSpec) -> Self {
        self.target_spec = Some(spec);
        self
    }

    pub fn map(&self) -> &dyn EmbeddingMap {
        self.map.as_ref()
    }

    pub fn to_spec(&self) -> Option<MetricSpec> {
        Some(MetricSpec::Pullback { map: self.map.spec()?, target: Box::new(self.target_spec.clone()?) })
    }
}

impl std::fmt::Debug for PullbackMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PullbackMetric")
            .field("input_dim", &self.map.input_dim())
            .field("output_dim", &self.map.output_dim())
            .finish()
    }
}

impl MetricField for PullbackMetric {
    fn dim(&self) -> usize {
        self.map.input_dim()
    }

    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        let j = jacobian(self.map.as_ref(), x);
        let sv = j.singular_values();
        let (max, min) = (sv.max(), sv.min());
        if !(max > 0.0) || min < RANK_TOL * max {
            return Err(Error::RankDeficient { ratio: if max > 0.0 { min / max } else { 0.0 } });
        }
        let target_g = metric(self.target.as_ref(), &self.map.apply(x))?;
        Ok(j.transpose() * target_g * j)
    }
}

/// `‖f(x) − f(y)‖`, the chordal distance in the target chart.
pub fn map_induced_distance(map: &dyn EmbeddingMap, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (map.apply(x) - map.apply(y)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::IdentityMetric;
    use std::f64::consts::PI;

    fn v(c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(c)
    }

    #[test]
    fn identity_pullback_is_identity() {
        let m = PullbackMetric::new(Arc::new(LinearMap::identity(2)), Arc::new(IdentityMetric::new(2))).unwrap();
        assert!((m.metric_at(&v(&[0.3, 4.0])).unwrap() - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn unit_circle_has_unit_metric() {
        let m = PullbackMetric::new(Arc::new(CircleMap { radius: 1.0 }), Arc::new(IdentityMetric::new(2))).unwrap();
        for theta in [0.0, 0.7, 2.0, -3.0] {
            assert!((m.metric_at(&v(&[theta])).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
        }
    }

    struct Doubling;
    impl EmbeddingMap for Doubling {
        fn input_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
            x * 2.0
        }
    }

    #[test]
    fn scaled_map_via_finite_difference_jacobian() {
        let m = PullbackMetric::new(Arc::new(Doubling), Arc::new(IdentityMetric::new(1))).unwrap();
        assert!((m.metric_at(&v(&[0.4])).unwrap()[(0, 0)] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn rank_deficient_map_is_rejected() {
        let flat = LinearMap::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]), v(&[0.0, 0.0])).unwrap();
        let m = PullbackMetric::new(Arc::new(flat), Arc::new(IdentityMetric::new(2))).unwrap();
        assert!(matches!(m.metric_at(&v(&[0.0, 0.0])), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn map_induced_distance_cases() {
        let id = LinearMap::identity(2);
        assert_eq!(map_induced_distance(&id, &v(&[1.0, 2.0]), &v(&[1.0, 2.0])), 0.0);
        assert!((map_induced_distance(&id, &v(&[0.0, 0.0]), &v(&[3.0, 4.0])) - 5.0).abs() < 1e-15);
        let circle = CircleMap { radius: 1.0 };
        let chord = map_induced_distance(&circle, &v(&[0.0]), &v(&[PI]));
        assert!((chord - 2.0).abs() < 1e-15);
        assert!(chord < PI);
    }
}
