//! Riemannian metric fields in chart coordinates, the geodesic machinery they
//! induce (exponential and logarithm maps, distances, parallel transport,
//! volume), and metric learning on top of it.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_forms;
pub mod error;
pub mod geo;
pub mod graph;
pub mod harness;
pub mod learn;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod objectives;
pub mod optim;

pub use error::{Error, Result};
