//! Python bindings: metric fields, geodesic operations, sampling and
//! constant-metric learning.

use std::sync::Arc;

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rml_core::geo::{
    exp_map, exp_point, fanning_scheme, log_map_shooting, parallel_transport_ode, pole_ladder, riemannian_distance,
    sample_by_volume, schild_ladder, BoundingBox, DistanceMethod, SolverConfig,
};
use rml_core::harness::io::{metric_from_toml, metric_to_toml};
use rml_core::harness::{gen_aniso_grid, gen_spiral, loo_accuracy, AnisoGridParams, LabeledDataset, SpiralParams};
use rml_core::learn::{fit, FitConfig, Loss, Objective};
use rml_core::manifold::{metric, MetricField};
use rml_core::metrics::{ConstantMetric, ConstantParametrization, MetricSpec, Parametrized};
use rml_core::objectives::{ContrastiveVariant, DistanceBackend, PairSets, TripletSet};
use rml_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NoConvergence { .. } | Error::BlowUp { .. } | Error::Diverged(_) | Error::LowAcceptance { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn vec(c: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(c)
}

fn list(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn method(name: &str) -> PyResult<DistanceMethod> {
    match name {
        "shooting" => Ok(DistanceMethod::Shooting),
        "bvp" => Ok(DistanceMethod::Bvp),
        "curve" => Ok(DistanceMethod::curve()),
        _ => Err(PyValueError::new_err(format!("unknown method {name:?} (shooting, bvp, curve)"))),
    }
}

fn solver(steps: Option<usize>) -> SolverConfig {
    let cfg = SolverConfig::default();
    match steps {
        Some(s) => cfg.with_steps(s),
        None => cfg,
    }
}

fn dataset(points: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<LabeledDataset> {
    LabeledDataset::new(points.into_iter().map(vec).collect(), labels).map_err(py_err)
}

/// A metric field `x ↦ g(x)` on a chart of ℝ^d.
#[pyclass(frozen)]
struct Metric {
    spec: MetricSpec,
    field: Arc<dyn MetricField>,
}

impl Metric {
    fn from_spec(spec: MetricSpec) -> PyResult<Self> {
        let field = spec.build().map_err(py_err)?;
        Ok(Metric { spec, field })
    }
}

#[pymethods]
impl Metric {
    #[staticmethod]
    fn identity(dim: usize) -> PyResult<Self> {
        Metric::from_spec(MetricSpec::Identity { dim })
    }

    /// Constant metric from a row-major SPD matrix.
    #[staticmethod]
    fn constant(matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let dim = matrix.len();
        let param: Vec<f64> = matrix.into_iter().flatten().collect();
        Metric::from_spec(MetricSpec::Constant { dim, parametrization: ConstantParametrization::Direct, param, floor: 0.0 })
    }

    #[staticmethod]
    #[pyo3(signature = (anchors, bandwidth=0.3, floor=0.01))]
    fn density(anchors: Vec<Vec<f64>>, bandwidth: f64, floor: f64) -> PyResult<Self> {
        Metric::from_spec(MetricSpec::Density { anchors, bandwidth, floor })
    }

    #[staticmethod]
    fn half_plane() -> PyResult<Self> {
        Metric::from_spec(MetricSpec::HalfPlane)
    }

    /// Affine-invariant metric on n×n SPD matrices in the upper-triangle chart.
    #[staticmethod]
    fn spd_affine(n: usize) -> PyResult<Self> {
        Metric::from_spec(MetricSpec::SpdAffine { n })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Metric::from_spec(metric_from_toml(text).map_err(py_err)?)
    }

    fn to_toml(&self) -> PyResult<String> {
        metric_to_toml(&self.spec).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.field.dim()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.spec.family()
    }

    /// `g(x)` as a list of rows.
    fn metric_at(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let g = metric(&*self.field, &vec(x)).map_err(py_err)?;
        Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    #[pyo3(signature = (x, y, method="shooting", steps=None))]
    fn distance(&self, py: Python<'_>, x: Vec<f64>, y: Vec<f64>, method: &str, steps: Option<usize>) -> PyResult<f64> {
        let m = self::method(method)?;
        let (x, y) = (vec(x), vec(y));
        py.detach(|| riemannian_distance(&*self.field, &x, &y, m, &solver(steps))).map_err(py_err)
    }

    #[pyo3(signature = (x, v, steps=None))]
    fn exp(&self, x: Vec<f64>, v: Vec<f64>, steps: Option<usize>) -> PyResult<Vec<f64>> {
        exp_point(&*self.field, &vec(x), &vec(v), &solver(steps)).map(|p| list(&p)).map_err(py_err)
    }

    #[pyo3(signature = (x, y, steps=None))]
    fn log(&self, x: Vec<f64>, y: Vec<f64>, steps: Option<usize>) -> PyResult<Vec<f64>> {
        log_map_shooting(&*self.field, &vec(x), &vec(y), &solver(steps)).map(|p| list(&p)).map_err(py_err)
    }

    /// `(times, points)` of `t ↦ Exp_x(t v)` on [0, 1].
    #[pyo3(signature = (x, v, steps=None))]
    fn geodesic(&self, x: Vec<f64>, v: Vec<f64>, steps: Option<usize>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let path = exp_map(&*self.field, &vec(x), &vec(v), &solver(steps)).map_err(py_err)?;
        Ok((path.times.clone(), path.points.iter().map(list).collect()))
    }

    /// Transport `w` along the geodesic from `x` with velocity `v`; `method`
    /// is one of ode, schild, pole, fanning (`rungs` doubles as fanning steps).
    #[pyo3(signature = (x, v, w, method="ode", rungs=16))]
    fn transport(&self, py: Python<'_>, x: Vec<f64>, v: Vec<f64>, w: Vec<f64>, method: &str, rungs: usize) -> PyResult<Vec<f64>> {
        let (x, v, w) = (vec(x), vec(v), vec(w));
        let cfg = SolverConfig::default();
        let f = &*self.field;
        let out = py.detach(|| -> rml_core::Result<DVector<f64>> {
            if method == "fanning" {
                return fanning_scheme(f, &x, &v, &w, rungs, &cfg);
            }
            let curve = exp_map(f, &x, &v, &cfg)?;
            match method {
                "ode" => parallel_transport_ode(f, &curve, &w),
                "schild" => schild_ladder(f, &curve, &w, rungs, &cfg),
                "pole" => pole_ladder(f, &curve, &w, rungs, &cfg),
                _ => Err(Error::InvalidArgument(format!("unknown transport method {method:?}"))),
            }
        });
        out.map(|p| list(&p)).map_err(py_err)
    }

    /// `n` points in the box with density ∝ √det g.
    #[pyo3(signature = (lower, upper, n, seed=0))]
    fn sample(&self, lower: Vec<f64>, upper: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let bbox = BoundingBox::new(vec(lower), vec(upper)).map_err(py_err)?;
        let pts = sample_by_volume(&*self.field, &bbox, n, seed).map_err(py_err)?;
        Ok(pts.iter().map(list).collect())
    }

    /// Leave-one-out k-NN accuracy; `graph_k` switches to kNN-graph distances.
    #[pyo3(signature = (points, labels, k=1, graph_k=None))]
    fn loo_accuracy(&self, points: Vec<Vec<f64>>, labels: Vec<usize>, k: usize, graph_k: Option<usize>) -> PyResult<f64> {
        let data = dataset(points, labels)?;
        let backend = graph_k.map_or(DistanceBackend::Auto, DistanceBackend::graph);
        loo_accuracy(&*self.field, &data, k, &backend, &SolverConfig::default()).map(|r| r.accuracy).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Metric(family={:?}, dim={})", self.spec.family(), self.field.dim())
    }
}

/// Outcome of [`fit_constant`].
#[pyclass(frozen, get_all)]
struct FitResult {
    metric: Py<Metric>,
    loss_history: Vec<f64>,
    termination: String,
    converged: bool,
}

/// Fit a constant metric to labeled points with a triplet or contrastive loss.
#[pyfunction]
#[pyo3(signature = (points, labels, objective="triplet", margin=1.0, max_iter=2000, step_size=0.01, seed=0))]
#[allow(clippy::too_many_arguments)]
fn fit_constant(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    objective: &str,
    margin: f64,
    max_iter: usize,
    step_size: f64,
    seed: u64,
) -> PyResult<FitResult> {
    let data = dataset(points, labels)?;
    let loss = match objective {
        "triplet" => Loss::Triplet { triplets: TripletSet::nearest_from_labels(&data.points, &data.labels).map_err(py_err)?, margin },
        "contrastive" => Loss::Contrastive {
            pairs: PairSets::from_labels(&data.points, &data.labels).map_err(py_err)?,
            variant: ContrastiveVariant::SumDiff,
        },
        _ => return Err(PyValueError::new_err(format!("unknown objective {objective:?} (triplet, contrastive)"))),
    };
    let family = ConstantMetric::identity(data.dim());
    let cfg = FitConfig { max_iter, step_size, seed, ..FitConfig::default() };
    let report = py.detach(|| fit(&family, &Objective::new(loss), &cfg)).map_err(py_err)?;
    let fitted = family.unpack(&report.params).map_err(py_err)?;
    let metric = Py::new(py, Metric::from_spec(MetricSpec::from(&fitted))?)?;
    Ok(FitResult {
        metric,
        converged: report.converged(),
        termination: format!("{:?}", report.termination),
        loss_history: report.loss_history,
    })
}

/// Two interleaved spiral arms: `(points, labels)`.
#[pyfunction]
#[pyo3(signature = (n_per_class=100, noise=0.05, seed=0))]
fn spiral(n_per_class: usize, noise: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let d = gen_spiral(&SpiralParams { n_per_class, noise, seed, ..SpiralParams::default() }).map_err(py_err)?;
    Ok((d.points.iter().map(list).collect(), d.labels))
}

/// Anisotropic grid whose labels alternate along x: `(points, labels)`.
#[pyfunction]
#[pyo3(signature = (n=10, seed=0))]
fn aniso_grid(n: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let d = gen_aniso_grid(&AnisoGridParams { n, seed, ..AnisoGridParams::default() }).map_err(py_err)?;
    Ok((d.points.iter().map(list).collect(), d.labels))
}

#[pymodule]
fn rml(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Metric>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(fit_constant, m)?)?;
    m.add_function(wrap_pyfunction!(spiral, m)?)?;
    m.add_function(wrap_pyfunction!(aniso_grid, m)?)?;
    Ok(())
}
