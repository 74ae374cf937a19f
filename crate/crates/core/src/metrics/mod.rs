//! Explicit metric parametrizations.
//!
//! Each family implements [`MetricField`](crate::manifold::MetricField) and,
//! where it has learnable parameters, [`Parametrized`], which flattens the
//! parameters into an unconstrained vector for the learner. Positive
//! hyperparameters (bandwidths, floors) live in log space and local SPD
//! matrices are stored through factors, so any real vector unpacks to a
//! valid field.

mod constant;
mod density;
mod kernel;
mod pullback;
mod spec;
mod voronoi;

pub use constant::{ConstantMetric, ConstantParametrization};
pub use density::DensityMetric;
pub use kernel::KernelMetric;
pub use pullback::{map_induced_distance, CircleMap, EmbeddingMap, LinearMap, PullbackMetric};
pub use spec::{MapSpec, MetricSpec};
pub use voronoi::VoronoiMetric;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Flat parameter vector access for the learner.
pub trait Parametrized: Sized {
    fn pack(&self) -> Vec<f64>;

    /// A new instance with the given parameters; the receiver supplies the
    /// fixed structure (centers, anchors, dimension).
    fn unpack(&self, theta: &[f64]) -> Result<Self>;

    /// Map a parameter vector back onto the feasible set. Families that are
    /// unconstrained by construction return it unchanged.
    fn project(&self, theta: &[f64], _floor: f64) -> Vec<f64> {
        theta.to_vec()
    }

    fn n_params(&self) -> usize {
        self.pack().len()
    }
}

pub(crate) fn check_len(expected: usize, theta: &[f64]) -> Result<()> {
    if theta.len() != expected {
        return Err(Error::Shape(format!("expected {expected} parameters, got {}", theta.len())));
    }
    Ok(())
}

/// Row-major lower triangle (including diagonal) of a square matrix.
pub(crate) fn pack_lower(m: &DMatrix<f64>, out: &mut Vec<f64>) {
    for i in 0..m.nrows() {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
}

pub(crate) fn unpack_lower(d: usize, theta: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut it = theta.iter();
    for i in 0..d {
        for j in 0..=i {
            m[(i, j)] = *it.next().expect("caller checked length");
        }
    }
    m
}

pub(crate) fn lower_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Lower Cholesky factor of an SPD matrix.
pub(crate) fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(crate::linalg::symmetrize(m))
        .map(|c| c.l())
        .ok_or_else(|| Error::Singular("cholesky factorization failed".into()))
}
