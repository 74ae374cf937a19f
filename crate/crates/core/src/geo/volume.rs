use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifold::{metric, MetricField};

/// Safety factor on the scanned density bound.
pub const BOUND_FACTOR: f64 = 1.1;
/// Sampling aborts when fewer than this fraction of proposals are accepted.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Proposals drawn before the acceptance rate is judged.
const ACCEPTANCE_WARMUP: usize = 100_000;
/// Total grid points used to scan the density bound.
const SCAN_BUDGET: usize = 4096;

/// `√(det g_x)`
pub fn volume_density(field: &dyn MetricField, x: &DVector<f64>) -> Result<f64> {
    let g = metric(field, x)?;
    let det = g.determinant();
    Ok(det.abs().sqrt())
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoundingBox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return Err(Error::InvalidArgument("box bounds must be finite with lower < upper".into()));
        }
        Ok(BoundingBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

fn scan_bound(field: &dyn MetricField, bbox: &BoundingBox) -> Result<f64> {
    let d = bbox.dim();
    let per_axis = ((SCAN_BUDGET as f64).powf(1.0 / d as f64).floor() as usize).max(2);
    let total = per_axis.pow(d as u32);
    let mut best: f64 = 0.0;
    let mut x = DVector::zeros(d);
    for idx in 0..total {
        let mut rest = idx;
        for i in 0..d {
            let k = rest % per_axis;
            rest /= per_axis;
            let s = k as f64 / (per_axis - 1) as f64;
            x[i] = bbox.lower[i] + s * (bbox.upper[i] - bbox.lower[i]);
        }
        best = best.max(volume_density(field, &x)?);
    }
    Ok(best)
}

/// `n` points with density proportional to `√(det g)` on `bbox`, by rejection
/// against the grid-scanned maximum times [`BOUND_FACTOR`]. Deterministic for
/// a given seed.
pub fn sample_by_volume(field: &dyn MetricField, bbox: &BoundingBox, n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    if bbox.dim() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: bbox.dim() });
    }
    let bound = scan_bound(field, bbox)? * BOUND_FACTOR;
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::LowAcceptance { rate: 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut proposals = 0usize;
    while out.len() < n {
        let x = DVector::from_fn(bbox.dim(), |i, _| rng.random_range(bbox.lower[i]..bbox.upper[i]));
        let u: f64 = rng.random::<f64>() * bound;
        proposals += 1;
        if u < volume_density(field, &x)? {
            out.push(x);
        }
        if proposals >= ACCEPTANCE_WARMUP {
            let rate = out.len() as f64 / proposals as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::LowAcceptance { rate });
            }
        }
    }
    Ok(out)
}
