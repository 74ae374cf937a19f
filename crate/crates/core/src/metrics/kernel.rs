use nalgebra::{DMatrix, DVector};

use super::{check_len, cholesky_lower, lower_len, pack_lower, unpack_lower, Parametrized};
use crate::error::{Error, Result};
use crate::manifold::{check_dim, MetricField, SpdMatrix};

/// `g_x = Σ_i g_i k(x, c_i) + ε·I` with `k(x, c) = exp(−‖x − c‖² / σ²)`.
///
/// The weights are unnormalized unless `normalize` is set, in which case the
/// sum is divided by `Σ_i k(x, c_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMetric {
    centers: Vec<DVector<f64>>,
    factors: Vec<DMatrix<f64>>,
    log_bandwidth: f64,
    floor: f64,
    normalize: bool,
}

impl KernelMetric {
    pub fn new(centers: Vec<DVector<f64>>, locals: Vec<SpdMatrix>, bandwidth: f64, floor: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("kernel metric needs at least one center".into()));
        }
        if centers.len() != locals.len() {
            return Err(Error::Shape(format!("{} centers but {} local matrices", centers.len(), locals.len())));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !(floor >= 0.0) {
            return Err(Error::InvalidArgument(format!("floor must be non-negative, got {floor}")));
        }
        let d = centers[0].len();
        for (c, g) in centers.iter().zip(&locals) {
            check_dim(d, c)?;
            if g.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: g.dim() });
            }
        }
        let factors = locals.iter().map(|g| cholesky_lower(g)).collect::<Result<_>>()?;
        Ok(KernelMetric { centers, factors, log_bandwidth: bandwidth.ln(), floor, normalize: false })
    }

    pub fn with_normalization(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn bandwidth(&self) -> f64 {
        self.log_bandwidth.exp()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn is_normalized(&self) -> bool {
        self.normalize
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn locals(&self) -> Vec<DMatrix<f64>> {
        self.factors.iter().map(|l| l * l.transpose()).collect()
    }

    fn weight(&self, x: &DVector<f64>, c: &DVector<f64>) -> f64 {
        let s = self.bandwidth();
        (-(x - c).norm_squared() / (s * s)).exp()
    }
}

impl MetricField for KernelMetric {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.dim();
        check_dim(d, x)?;
        let mut g = DMatrix::zeros(d, d);
        let mut total = 0.0;
        for (c, l) in self.centers.iter().zip(&self.factors) {
            let w = self.weight(x, c);
            if w != 0.0 {
                g += (l * l.transpose()) * w;
                total += w;
            }
        }
        if self.normalize && total > 0.0 {
            g /= total;
        }
        Ok(g + DMatrix::identity(d, d) * self.floor)
    }

    fn derivative_at(&self, x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        if self.normalize {
            return None;
        }
        let d = self.dim();
        if let Err(e) = check_dim(d, x) {
            return Some(Err(e));
        }
        let s2 = self.bandwidth().powi(2);
        let mut out = vec![DMatrix::zeros(d, d); d];
        for (c, l) in self.centers.iter().zip(&self.factors) {
            let w = self.weight(x, c);
            if w == 0.0 {
                continue;
            }
            let gi = l * l.transpose();
            for (i, o) in out.iter_mut().enumerate() {
                *o += &gi * (-2.0 * (x[i] - c[i]) / s2 * w);
            }
        }
        Some(Ok(out))
    }
}

impl Parametrized for KernelMetric {
    /// Lower Cholesky factors of every local matrix, then `log σ`.
    fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.factors.len() * lower_len(self.dim()) + 1);
        for l in &self.factors {
            pack_lower(l, &mut out);
        }
        out.push(self.log_bandwidth);
        out
    }

    fn unpack(&self, theta: &[f64]) -> Result<Self> {
        let d = self.dim();
        let per = lower_len(d);
        check_len(per * self.factors.len() + 1, theta)?;
        let (fs, rest) = theta.split_at(per * self.factors.len());
        Ok(KernelMetric {
            centers: self.centers.clone(),
            factors: fs.chunks(per).map(|c| unpack_lower(d, c)).collect(),
            log_bandwidth: rest[0],
            floor: self.floor,
            normalize: self.normalize,
        })
    }
}
