use nalgebra::{DMatrix, DVector};

use super::{check_len, cholesky_lower, lower_len, pack_lower, unpack_lower, Parametrized};
use crate::error::{Error, Result};
use crate::manifold::{check_dim, MetricField, SpdMatrix};

/// Piecewise-constant metric: the local matrix of the nearest center
/// (Euclidean chart distance, lowest index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiMetric {
    centers: Vec<DVector<f64>>,
    factors: Vec<DMatrix<f64>>,
}

impl VoronoiMetric {
    pub fn new(centers: Vec<DVector<f64>>, locals: Vec<SpdMatrix>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("voronoi metric needs at least one center".into()));
        }
        if centers.len() != locals.len() {
            return Err(Error::Shape(format!("{} centers but {} local matrices", centers.len(), locals.len())));
        }
        let d = centers[0].len();
        for (c, g) in centers.iter().zip(&locals) {
            check_dim(d, c)?;
            if g.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: g.dim() });
            }
        }
        let factors = locals.iter().map(|g| cholesky_lower(g)).collect::<Result<_>>()?;
        Ok(VoronoiMetric { centers, factors })
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn locals(&self) -> Vec<DMatrix<f64>> {
        self.factors.iter().map(|l| l * l.transpose()).collect()
    }

    pub fn nearest(&self, x: &DVector<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = (x - c).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

impl MetricField for VoronoiMetric {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        let l = &self.factors[self.nearest(x)];
        Ok(l * l.transpose())
    }
}

impl Parametrized for VoronoiMetric {
    fn pack(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.factors {
            pack_lower(l, &mut out);
        }
        out
    }

    fn unpack(&self, theta: &[f64]) -> Result<Self> {
        let d = self.dim();
        let per = lower_len(d);
        check_len(per * self.factors.len(), theta)?;
        let factors = theta.chunks(per).map(|c| unpack_lower(d, c)).collect();
        Ok(VoronoiMetric { centers: self.centers.clone(), factors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cells() -> VoronoiMetric {
        VoronoiMetric::new(
            vec![DVector::from_element(1, 0.0), DVector::from_element(1, 1.0)],
            vec![SpdMatrix::from_diagonal(&[2.0]).unwrap(), SpdMatrix::from_diagonal(&[5.0]).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn single_center_everywhere() {
        let m = VoronoiMetric::new(
            vec![DVector::from_column_slice(&[0.0, 0.0])],
            vec![SpdMatrix::from_diagonal(&[3.0, 1.0]).unwrap()],
        )
        .unwrap();
        for x in [[10.0, -3.0], [0.0, 0.0], [-1e3, 2.0]] {
            let g = m.metric_at(&DVector::from_column_slice(&x)).unwrap();
            assert!((g - DMatrix::from_diagonal(&DVector::from_column_slice(&[3.0, 1.0]))).amax() < 1e-14);
        }
    }

    #[test]
    fn nearer_center_and_tie_break() {
        let m = two_cells();
        assert!((m.metric_at(&DVector::from_element(1, 0.4)).unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((m.metric_at(&DVector::from_element(1, 0.6)).unwrap()[(0, 0)] - 5.0).abs() < 1e-14);
        // exactly equidistant: lowest index wins
        assert!((m.metric_at(&DVector::from_element(1, 0.5)).unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn round_trip() {
        let m = two_cells();
        let theta = m.pack();
        assert_eq!(m.unpack(&theta).unwrap().pack(), theta);
        assert!(VoronoiMetric::new(vec![], vec![]).is_err());
    }
}
