//! Geodesic computations for any [`MetricField`](crate::manifold::MetricField):
//! exponential and logarithm maps, three distance solvers, four transport
//! schemes, volume sampling and Fréchet means.

mod bvp;
mod config;
mod curve;
mod distance;
mod exp;
mod frechet;
mod log;
mod path;
mod transport;
mod volume;

pub use bvp::{discrete_energy, discrete_length, geodesic_bvp, geodesic_bvp_solve, BvpSolution};
pub use config::{BvpStencil, Integrator, SolverConfig};
pub use curve::{curve_energy, geodesic_regression_curve, geodesic_regression_solve, BumpBasis, CurveSolution, RegressionCurve};
pub use distance::{riemannian_distance, DistanceMethod, DEFAULT_BASIS_SIZE};
pub use exp::{energy_profile, exp_map, exp_point, hamiltonian, rollout, BLOW_UP_LIMIT};
pub use frechet::{frechet_mean, frechet_mean_solve, FrechetMean};
pub use log::{log_map_shooting, shooting_distance};
pub use path::{fmt_f64, path_energy, path_length, GeodesicPath};
pub use transport::{
    exp_parallelize, fanning_scheme, parallel_transport_ode, pole_ladder, schild_ladder, transport_interval,
    TransportMethod, FANNING_EPSILON,
};
pub use volume::{sample_by_volume, volume_density, BoundingBox, BOUND_FACTOR, MIN_ACCEPTANCE};
