use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::bvp::{discrete_length, geodesic_bvp_solve};
use super::config::SolverConfig;
use super::curve::geodesic_regression_solve;
use super::log::shooting_distance;
use crate::error::Result;
use crate::manifold::{check_dim, metric, MetricField};

/// Default number of bumps per coordinate for curve regression.
pub const DEFAULT_BASIS_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum DistanceMethod {
    #[default]
    Shooting,
    Bvp,
    Curve { basis_size: usize },
}

impl DistanceMethod {
    pub fn curve() -> Self {
        DistanceMethod::Curve { basis_size: DEFAULT_BASIS_SIZE }
    }
}

/// Geodesic distance by the chosen solver: `√(g_x(Log, Log))` for shooting,
/// the discrete length of the minimizing polyline for the boundary solver,
/// and the Gauss–Legendre length of the fitted curve for curve regression.
pub fn riemannian_distance(
    field: &dyn MetricField,
    x: &DVector<f64>,
    y: &DVector<f64>,
    method: DistanceMethod,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_dim(field.dim(), x)?;
    check_dim(field.dim(), y)?;
    metric(field, x)?;
    metric(field, y)?;
    if x == y {
        return Ok(0.0);
    }
    match method {
        DistanceMethod::Shooting => shooting_distance(field, x, y, cfg),
        DistanceMethod::Bvp => {
            let sol = geodesic_bvp_solve(field, x, y, cfg)?;
            discrete_length(field, &sol.path.points, cfg.bvp_stencil)
        }
        DistanceMethod::Curve { basis_size } => {
            let sol = geodesic_regression_solve(field, x, y, basis_size, cfg)?;
            sol.curve.length(field, cfg.curve_nodes)
        }
    }
}
