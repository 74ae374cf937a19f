use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_len, Parametrized};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{check_dim, MetricField, SpdMatrix};

/// How a [`ConstantMetric`] exposes its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantParametrization {
    /// Unconstrained factor `A` with `G = AᵀA + ε·I`.
    Factor,
    /// The entries of `G` itself; the learner keeps it SPD by projection.
    Direct,
}

/// Mahalanobis metric `g ≡ G`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantMetric {
    parametrization: ConstantParametrization,
    /// `A` for the factor form, `G` for the direct form.
    param: DMatrix<f64>,
    floor: f64,
    g: DMatrix<f64>,
}

impl ConstantMetric {
    /// `G = AᵀA + ε·I`.
    pub fn from_factor(a: DMatrix<f64>, floor: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::Shape("factor must be a non-empty square matrix".into()));
        }
        if !(floor >= 0.0) {
            return Err(Error::InvalidArgument(format!("floor must be non-negative, got {floor}")));
        }
        let d = a.nrows();
        let g = linalg::symmetrize(&(a.transpose() * &a + DMatrix::identity(d, d) * floor));
        Ok(ConstantMetric { parametrization: ConstantParametrization::Factor, param: a, floor, g })
    }

    /// Factor form reproducing `G`: `A` is the transposed Cholesky factor
    /// of `G − ε·I`.
    pub fn from_matrix(g: &SpdMatrix, floor: f64) -> Result<Self> {
        let d = g.dim();
        let shifted = g.matrix() - DMatrix::identity(d, d) * floor;
        let l = super::cholesky_lower(&shifted)?;
        let mut m = Self::from_factor(l.transpose(), floor)?;
        m.g = g.matrix().clone();
        Ok(m)
    }

    /// Direct form storing `G` itself.
    pub fn direct(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() || g.nrows() == 0 {
            return Err(Error::Shape("metric must be a non-empty square matrix".into()));
        }
        let sym = linalg::symmetrize(&g);
        Ok(ConstantMetric {
            parametrization: ConstantParametrization::Direct,
            param: sym.clone(),
            floor: 0.0,
            g: sym,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_factor(DMatrix::identity(d, d), 0.0).expect("identity factor is valid")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        (self.parametrization == ConstantParametrization::Factor).then_some(&self.param)
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn parametrization(&self) -> ConstantParametrization {
        self.parametrization
    }

    /// `√((x−y)ᵀ G (x−y))`
    pub fn distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let delta = x - y;
        linalg::quad(&self.g, &delta, &delta).max(0.0).sqrt()
    }
}

impl MetricField for ConstantMetric {
    fn dim(&self) -> usize {
        self.g.nrows()
    }

    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        Ok(self.g.clone())
    }

    fn derivative_at(&self, _x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        let d = self.dim();
        Some(Ok(vec![DMatrix::zeros(d, d); d]))
    }

    fn constant_matrix(&self) -> Option<DMatrix<f64>> {
        Some(self.g.clone())
    }
}

impl Parametrized for ConstantMetric {
    fn pack(&self) -> Vec<f64> {
        // row-major d² entries
        let d = self.param.nrows();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.param[(i, j)]);
            }
        }
        out
    }

    fn unpack(&self, theta: &[f64]) -> Result<Self> {
        let d = self.param.nrows();
        check_len(d * d, theta)?;
        let m = DMatrix::from_row_slice(d, d, theta);
        match self.parametrization {
            ConstantParametrization::Factor => Self::from_factor(m, self.floor),
            ConstantParametrization::Direct => {
                let mut out = Self::direct(m.clone())?;
                // keep the exact entries so that pack(unpack(θ)) = θ
                out.param = m;
                Ok(out)
            }
        }
    }

    fn project(&self, theta: &[f64], floor: f64) -> Vec<f64> {
        match self.parametrization {
            ConstantParametrization::Factor => theta.to_vec(),
            ConstantParametrization::Direct => {
                let d = self.param.nrows();
                let m = DMatrix::from_row_slice(d, d, theta);
                let p = crate::learn::project_spd(&m, floor);
                let mut out = Vec::with_capacity(d * d);
                for i in 0..d {
                    for j in 0..d {
                        out.push(p[(i, j)]);
                    }
                }
                out
            }
        }
    }
}
