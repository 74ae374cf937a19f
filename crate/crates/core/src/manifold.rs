//! Chart points, tangent vectors, the [`MetricField`] contract and the
//! differential kernels built on top of it.
//!
//! Every manifold here is covered by a single global chart, so a point is a
//! coordinate vector and a metric is a field of SPD matrices over those
//! coordinates. The Levi-Civita connection is represented by its
//! Christoffel symbols
//!
//! ```text
//! Γ^k_ij = ½ Σ_l g^{lk} (∂_i g_jl + ∂_j g_li − ∂_l g_ij)
//! ```
//!
//! which is all the geodesic and transport ODEs need.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// A point in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChartPoint(DVector<f64>);

impl ChartPoint {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("chart point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("chart point has non-finite coordinates".into()));
        }
        Ok(ChartPoint(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for ChartPoint {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// A direction anchored at a base point. Also used for Hamiltonian momenta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub dir: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, dir: DVector<f64>) -> Result<Self> {
        if dir.len() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: dir.len() });
        }
        if dir.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("tangent vector has non-finite entries".into()));
        }
        Ok(TangentVector { base, dir })
    }

    pub fn zero(base: ChartPoint) -> Self {
        let d = base.dim();
        TangentVector { base, dir: DVector::zeros(d) }
    }

    /// `g_base(dir, dir)`
    pub fn sq_norm(&self, field: &dyn MetricField) -> Result<f64> {
        let g = metric(field, &self.base)?;
        Ok(linalg::quad(&g, &self.dir, &self.dir))
    }
}

/// A validated symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        if !linalg::is_symmetric(&m, 1e-10) {
            return Err(Error::InvalidArgument("matrix is not symmetric".into()));
        }
        linalg::check_spd(&m)?;
        Ok(SpdMatrix(linalg::symmetrize(&m)))
    }

    pub fn identity(d: usize) -> Self {
        SpdMatrix(DMatrix::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl Deref for SpdMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl TryFrom<DMatrix<f64>> for SpdMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        SpdMatrix::new(m)
    }
}

impl From<SpdMatrix> for DMatrix<f64> {
    fn from(m: SpdMatrix) -> Self {
        m.0
    }
}

/// A Riemannian metric expressed in chart coordinates.
///
/// Implementations must be pure: evaluation takes `&self` and may be shared
/// across threads.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    /// The metric matrix at `x`. Callers symmetrize the result before use.
    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Analytic first derivatives `out[i] = ∂_i g`, when the family has them.
    fn derivative_at(&self, _x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        None
    }

    /// The matrix `G` if the field is constant over the chart.
    fn constant_matrix(&self) -> Option<DMatrix<f64>> {
        None
    }
}

impl<T: MetricField + ?Sized> MetricField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).metric_at(x)
    }
    fn derivative_at(&self, x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        (**self).derivative_at(x)
    }
    fn constant_matrix(&self) -> Option<DMatrix<f64>> {
        (**self).constant_matrix()
    }
}

impl<T: MetricField + ?Sized> MetricField for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).metric_at(x)
    }
    fn derivative_at(&self, x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        (**self).derivative_at(x)
    }
    fn constant_matrix(&self) -> Option<DMatrix<f64>> {
        (**self).constant_matrix()
    }
}

impl<T: MetricField + ?Sized> MetricField for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).metric_at(x)
    }
    fn derivative_at(&self, x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        (**self).derivative_at(x)
    }
    fn constant_matrix(&self) -> Option<DMatrix<f64>> {
        (**self).constant_matrix()
    }
}

/// The Euclidean metric `g ≡ I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityMetric {
    pub dim: usize,
}

impl IdentityMetric {
    pub fn new(dim: usize) -> Self {
        IdentityMetric { dim }
    }
}

impl MetricField for IdentityMetric {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim, x)?;
        Ok(DMatrix::identity(self.dim, self.dim))
    }
    fn derivative_at(&self, _x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        Some(Ok(vec![DMatrix::zeros(self.dim, self.dim); self.dim]))
    }
    fn constant_matrix(&self) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.dim, self.dim))
    }
}

/// The pointwise inverse field `x ↦ g_x⁻¹`.
pub struct InverseMetric<F>(pub F);

impl<F: MetricField> MetricField for InverseMetric<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        metric_inverse(&self.0, x)
    }
    fn constant_matrix(&self) -> Option<DMatrix<f64>> {
        self.0.constant_matrix().and_then(|g| linalg::spd_inverse(&g).ok())
    }
}

pub(crate) fn check_dim(expected: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// Symmetrized metric at `x`, with a dimension check.
pub fn metric(field: &dyn MetricField, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dim(field.dim(), x)?;
    let g = field.metric_at(x)?;
    if g.nrows() != field.dim() || g.ncols() != field.dim() {
        return Err(Error::Shape(format!(
            "metric_at returned {}x{} for a {}-dimensional field",
            g.nrows(),
            g.ncols(),
            field.dim()
        )));
    }
    Ok(linalg::symmetrize(&g))
}

/// Metric at `x` validated as SPD.
pub fn metric_spd(field: &dyn MetricField, x: &DVector<f64>) -> Result<SpdMatrix> {
    let g = metric(field, x)?;
    linalg::check_spd(&g)?;
    Ok(SpdMatrix(g))
}

/// `g_x⁻¹`; fails with a singular-matrix error when the metric is not SPD.
pub fn metric_inverse(field: &dyn MetricField, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let g = metric(field, x)?;
    linalg::check_spd(&g)?;
    linalg::spd_inverse(&g)
}

/// `out[i] = ∂_i g` at `x`. Uses the field's analytic derivatives when it has
/// them, otherwise central differences with step `h` (or the default
/// `1e-5·(1 + ‖x‖_∞)` when `h` is `None`).
pub fn metric_derivatives(
    field: &dyn MetricField,
    x: &DVector<f64>,
    h: Option<f64>,
) -> Result<Vec<DMatrix<f64>>> {
    check_dim(field.dim(), x)?;
    if let Some(analytic) = field.derivative_at(x) {
        return analytic.map(|ds| ds.iter().map(linalg::symmetrize).collect());
    }
    fd_metric_derivatives(field, x, h.unwrap_or_else(|| linalg::fd_step(x)))
}

/// Central-difference derivatives regardless of any analytic path.
pub fn fd_metric_derivatives(
    field: &dyn MetricField,
    x: &DVector<f64>,
    h: f64,
) -> Result<Vec<DMatrix<f64>>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let d = field.dim();
    let mut out = Vec::with_capacity(d);
    let mut xp = x.clone();
    for i in 0..d {
        xp[i] = x[i] + h;
        let gp = metric(field, &xp)?;
        xp[i] = x[i] - h;
        let gm = metric(field, &xp)?;
        xp[i] = x[i];
        out.push((gp - gm) / (2.0 * h));
    }
    Ok(out)
}

/// Christoffel symbols of the second kind at a point; `gamma[k][(i, j)] = Γ^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTensor {
    pub gamma: Vec<DMatrix<f64>>,
}

impl ChristoffelTensor {
    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[k][(i, j)]
    }

    /// `Γ(u, w)^k = Σ_ij Γ^k_ij u^i w^j`
    pub fn contract(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.gamma.len(), self.gamma.iter().map(|gk| linalg::quad(gk, u, w)))
    }

    pub fn is_zero(&self) -> bool {
        self.gamma.iter().all(|g| g.iter().all(|&v| v == 0.0))
    }
}

/// Christoffel symbols from an inverse metric and derivative stack.
pub fn christoffel_from_parts(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> ChristoffelTensor {
    let d = g_inv.nrows();
    let mut gamma = vec![DMatrix::zeros(d, d); d];
    // first-kind symbols Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_li − ∂_l g_ij), i ≤ j
    let mut first = vec![0.0; d];
    for i in 0..d {
        for j in i..d {
            for (l, f) in first.iter_mut().enumerate() {
                *f = 0.5 * (dg[i][(j, l)] + dg[j][(l, i)] - dg[l][(i, j)]);
            }
            for k in 0..d {
                let mut s = 0.0;
                for (l, f) in first.iter().enumerate() {
                    s += g_inv[(k, l)] * f;
                }
                gamma[k][(i, j)] = s;
                gamma[k][(j, i)] = s;
            }
        }
    }
    ChristoffelTensor { gamma }
}

pub fn christoffel(field: &dyn MetricField, x: &DVector<f64>) -> Result<ChristoffelTensor> {
    if field.constant_matrix().is_some() {
        check_dim(field.dim(), x)?;
        let d = field.dim();
        return Ok(ChristoffelTensor { gamma: vec![DMatrix::zeros(d, d); d] });
    }
    let g_inv = metric_inverse(field, x)?;
    let dg = metric_derivatives(field, x, None)?;
    Ok(christoffel_from_parts(&g_inv, &dg))
}

/// Same as [`christoffel`] but always through central differences.
pub fn christoffel_fd(field: &dyn MetricField, x: &DVector<f64>, h: f64) -> Result<ChristoffelTensor> {
    let g_inv = metric_inverse(field, x)?;
    let dg = fd_metric_derivatives(field, x, h)?;
    Ok(christoffel_from_parts(&g_inv, &dg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::HalfPlaneMetric;
    use crate::metrics::ConstantMetric;

    struct Conformal;

    impl MetricField for Conformal {
        fn dim(&self) -> usize {
            2
        }
        fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::identity(2, 2) * (2.0 * x[0]).exp())
        }
    }

    fn p(c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(c)
    }

    #[test]
    fn chart_point_rejects_bad_input() {
        assert!(ChartPoint::from_slice(&[]).is_err());
        assert!(ChartPoint::from_slice(&[1.0, f64::INFINITY]).is_err());
        let base = ChartPoint::from_slice(&[0.0, 0.0]).unwrap();
        assert!(TangentVector::new(base, p(&[1.0])).is_err());
    }

    #[test]
    fn inverse_of_identity_and_diagonal() {
        let id = IdentityMetric::new(3);
        assert_eq!(metric_inverse(&id, &p(&[1.0, 2.0, 3.0])).unwrap(), DMatrix::identity(3, 3));
        let c = ConstantMetric::from_matrix(&SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap(), 0.0).unwrap();
        let inv = metric_inverse(&c, &p(&[0.3, -1.0])).unwrap();
        assert!((inv - DMatrix::from_diagonal(&p(&[0.25, 1.0]))).amax() < 1e-15);
    }

    #[test]
    fn inverse_multiplies_to_identity_on_random_spd() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.4, 0.7, 2.0, 0.1, -0.3, 0.5, 1.5]);
        let g = a.transpose() * &a + DMatrix::identity(3, 3) * 0.1;
        let c = ConstantMetric::from_matrix(&SpdMatrix::new(g.clone()).unwrap(), 0.0).unwrap();
        let inv = metric_inverse(&c, &p(&[0.0, 0.0, 0.0])).unwrap();
        let err = (&g * inv - DMatrix::identity(3, 3)).norm() / g.norm();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn inverse_raises_on_singular_metric() {
        struct Degenerate;
        impl MetricField for Degenerate {
            fn dim(&self) -> usize {
                2
            }
            fn metric_at(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
                Ok(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]))
            }
        }
        assert!(matches!(metric_inverse(&Degenerate, &p(&[0.0, 0.0])), Err(Error::Singular(_))));
    }

    #[test]
    fn constant_metric_has_zero_derivatives() {
        let c = ConstantMetric::from_matrix(&SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap(), 0.0).unwrap();
        let dg = fd_metric_derivatives(&c, &p(&[0.5, 0.5]), 1e-5).unwrap();
        assert!(dg.iter().all(|m| m.amax() == 0.0));
        assert!(christoffel(&c, &p(&[0.5, 0.5])).unwrap().is_zero());
    }

    #[test]
    fn conformal_derivatives_match_hand_differentiation() {
        let x = p(&[0.3, -0.7]);
        let dg = metric_derivatives(&Conformal, &x, None).unwrap();
        let expected = 2.0 * (0.6f64).exp();
        assert!((dg[0][(0, 0)] - expected).abs() < 1e-8 * expected);
        assert!((dg[0][(1, 1)] - expected).abs() < 1e-8 * expected);
        assert!(dg[0][(0, 1)].abs() < 1e-12);
        assert!(dg[1].amax() < 1e-10);
    }

    #[test]
    fn half_plane_christoffel_symbols() {
        let y = 1.7;
        let x = p(&[0.4, y]);
        for gamma in [
            christoffel(&HalfPlaneMetric, &x).unwrap(),
            christoffel_fd(&HalfPlaneMetric, &x, 1e-5).unwrap(),
        ] {
            // coords (x, y) are indices (0, 1)
            let expect = |k: usize, i: usize, j: usize| match (k, i, j) {
                (1, 0, 0) => 1.0 / y,
                (0, 0, 1) | (0, 1, 0) => -1.0 / y,
                (1, 1, 1) => -1.0 / y,
                _ => 0.0,
            };
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((gamma.get(k, i, j) - expect(k, i, j)).abs() < 1e-8, "{k}{i}{j}");
                    }
                }
            }
        }
    }

    #[test]
    fn christoffel_is_symmetric_bitwise() {
        let g = christoffel(&Conformal, &p(&[0.1, 0.2])).unwrap();
        for k in 0..2 {
            assert_eq!(g.gamma[k], g.gamma[k].transpose());
        }
    }
}
