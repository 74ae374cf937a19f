use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pullback::row_major;
use super::*;
use crate::closed_forms::{HalfPlaneMetric, SpdAffineMetric};
use crate::manifold::{IdentityMetric, MetricField, SpdMatrix};

/// Self-describing, serializable description of a metric field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MetricSpec {
    Identity {
        dim: usize,
    },
    Constant {
        dim: usize,
        parametrization: ConstantParametrization,
        /// Row-major factor `A` (factor form) or `G` (direct form).
        param: Vec<f64>,
        floor: f64,
    },
    Voronoi {
        centers: Vec<Vec<f64>>,
        /// Row-major local matrices.
        locals: Vec<Vec<f64>>,
    },
    Kernel {
        centers: Vec<Vec<f64>>,
        locals: Vec<Vec<f64>>,
        bandwidth: f64,
        floor: f64,
        #[serde(default)]
        normalize: bool,
    },
    Density {
        anchors: Vec<Vec<f64>>,
        bandwidth: f64,
        floor: f64,
    },
    Pullback {
        map: MapSpec,
        target: Box<MetricSpec>,
    },
    HalfPlane,
    SpdAffine {
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MapSpec {
    Linear { rows: usize, cols: usize, matrix: Vec<f64>, offset: Vec<f64> },
    Circle { radius: f64 },
}

fn square(d: usize, entries: &[f64]) -> Result<DMatrix<f64>> {
    if entries.len() != d * d {
        return Err(Error::Shape(format!("expected {} matrix entries, got {}", d * d, entries.len())));
    }
    Ok(DMatrix::from_row_slice(d, d, entries))
}

fn points(rows: &[Vec<f64>]) -> Vec<DVector<f64>> {
    rows.iter().map(|r| DVector::from_column_slice(r)).collect()
}

fn locals(d: usize, rows: &[Vec<f64>]) -> Result<Vec<SpdMatrix>> {
    rows.iter().map(|r| SpdMatrix::new(square(d, r)?)).collect()
}

fn first_dim(rows: &[Vec<f64>]) -> Result<usize> {
    rows.first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("empty point list".into()))
}

impl MetricSpec {
    pub fn build(&self) -> Result<Arc<dyn MetricField>> {
        Ok(match self {
            MetricSpec::Identity { dim } => Arc::new(IdentityMetric::new(*dim)),
            MetricSpec::Constant { .. } => Arc::new(self.build_constant()?),
            MetricSpec::Voronoi { centers, locals: ls } => {
                let d = first_dim(centers)?;
                Arc::new(VoronoiMetric::new(points(centers), locals(d, ls)?)?)
            }
            MetricSpec::Kernel { .. } => Arc::new(self.build_kernel()?),
            MetricSpec::Density { .. } => Arc::new(self.build_density()?),
            MetricSpec::Pullback { map, target } => {
                let map: Arc<dyn EmbeddingMap> = match map {
                    MapSpec::Linear { rows, cols, matrix, offset } => {
                        if matrix.len() != rows * cols {
                            return Err(Error::Shape("linear map entries do not match its shape".into()));
                        }
                        Arc::new(LinearMap::new(
                            DMatrix::from_row_slice(*rows, *cols, matrix),
                            DVector::from_column_slice(offset),
                        )?)
                    }
                    MapSpec::Circle { radius } => Arc::new(CircleMap { radius: *radius }),
                };
                Arc::new(PullbackMetric::new(map, target.build()?)?.with_target_spec((**target).clone()))
            }
            MetricSpec::HalfPlane => Arc::new(HalfPlaneMetric),
            MetricSpec::SpdAffine { n } => Arc::new(SpdAffineMetric::new(*n)?),
        })
    }

    pub fn build_constant(&self) -> Result<ConstantMetric> {
        match self {
            MetricSpec::Constant { dim, parametrization, param, floor } => {
                let m = square(*dim, param)?;
                match parametrization {
                    ConstantParametrization::Factor => ConstantMetric::from_factor(m, *floor),
                    ConstantParametrization::Direct => ConstantMetric::direct(m),
                }
            }
            MetricSpec::Identity { dim } => Ok(ConstantMetric::identity(*dim)),
            other => Err(Error::InvalidArgument(format!("{} is not a constant metric", other.family()))),
        }
    }

    pub fn build_kernel(&self) -> Result<KernelMetric> {
        match self {
            MetricSpec::Kernel { centers, locals: ls, bandwidth, floor, normalize } => {
                let d = first_dim(centers)?;
                Ok(KernelMetric::new(points(centers), locals(d, ls)?, *bandwidth, *floor)?.with_normalization(*normalize))
            }
            other => Err(Error::InvalidArgument(format!("{} is not a kernel metric", other.family()))),
        }
    }

    pub fn build_density(&self) -> Result<DensityMetric> {
        match self {
            MetricSpec::Density { anchors, bandwidth, floor } => DensityMetric::new(points(anchors), *bandwidth, *floor),
            other => Err(Error::InvalidArgument(format!("{} is not a density metric", other.family()))),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            MetricSpec::Identity { .. } => "identity",
            MetricSpec::Constant { .. } => "constant",
            MetricSpec::Voronoi { .. } => "voronoi",
            MetricSpec::Kernel { .. } => "kernel",
            MetricSpec::Density { .. } => "density",
            MetricSpec::Pullback { .. } => "pullback",
            MetricSpec::HalfPlane => "half-plane",
            MetricSpec::SpdAffine { .. } => "spd-affine",
        }
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match self {
            MetricSpec::Identity { dim } | MetricSpec::Constant { dim, .. } => *dim,
            MetricSpec::Voronoi { centers, .. } | MetricSpec::Kernel { centers, .. } => first_dim(centers)?,
            MetricSpec::Density { anchors, .. } => first_dim(anchors)?,
            MetricSpec::Pullback { map, .. } => match map {
                MapSpec::Linear { cols, .. } => *cols,
                MapSpec::Circle { .. } => 1,
            },
            MetricSpec::HalfPlane => 2,
            MetricSpec::SpdAffine { n } => n * (n + 1) / 2,
        })
    }
}

fn rows(ps: &[DVector<f64>]) -> Vec<Vec<f64>> {
    ps.iter().map(|p| p.iter().copied().collect()).collect()
}

impl From<&ConstantMetric> for MetricSpec {
    fn from(m: &ConstantMetric) -> Self {
        MetricSpec::Constant {
            dim: m.dim(),
            parametrization: m.parametrization(),
            param: m.pack(),
            floor: m.floor(),
        }
    }
}

impl From<&VoronoiMetric> for MetricSpec {
    fn from(m: &VoronoiMetric) -> Self {
        MetricSpec::Voronoi { centers: rows(m.centers()), locals: m.locals().iter().map(row_major).collect() }
    }
}

impl From<&KernelMetric> for MetricSpec {
    fn from(m: &KernelMetric) -> Self {
        MetricSpec::Kernel {
            centers: rows(m.centers()),
            locals: m.locals().iter().map(row_major).collect(),
            bandwidth: m.bandwidth(),
            floor: m.floor(),
            normalize: m.is_normalized(),
        }
    }
}

impl From<&DensityMetric> for MetricSpec {
    fn from(m: &DensityMetric) -> Self {
        MetricSpec::Density { anchors: rows(m.anchors()), bandwidth: m.bandwidth(), floor: m.floor() }
    }
}
