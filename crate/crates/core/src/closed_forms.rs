//! Ground-truth geometry used to validate the generic solvers.
//!
//! * The SPD cone with the affine-invariant metric `g_M(W, V) = tr(M⁻¹WM⁻¹V)`,
//!   in closed form and as a [`MetricField`] over an isometric chart of
//!   symmetric matrices.
//! * The Log-Euclidean distance `‖log M₁ − log M₂‖_F`.
//! * The hyperbolic half-plane `g = y⁻²·I` and a brute-force distance oracle
//!   for it (grid shortest paths, then local polyline refinement).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, expm_sym, inv_sqrtm_spd, logm_spd, sqrtm_spd, sym_apply};
use crate::manifold::{check_dim, MetricField};

/// Isometric coordinates on symmetric `n×n` matrices: the upper triangle,
/// row by row, with off-diagonal entries scaled by `√2`, so that
/// `‖vec(M)‖ = ‖M‖_F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpdChart {
    pub n: usize,
}

impl SpdChart {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix side must be at least 1".into()));
        }
        Ok(SpdChart { n })
    }

    pub fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn vectorize(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.n {
            out.push(m[(i, i)]);
            for j in i + 1..self.n {
                out.push(std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        DVector::from_vec(out)
    }

    pub fn devectorize(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        let mut k = 0;
        for i in 0..self.n {
            m[(i, i)] = v[k];
            k += 1;
            for j in i + 1..self.n {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
                k += 1;
            }
        }
        m
    }

    fn basis(&self) -> Vec<DMatrix<f64>> {
        (0..self.dim())
            .map(|a| {
                let mut e = DVector::zeros(self.dim());
                e[a] = 1.0;
                self.devectorize(&e)
            })
            .collect()
    }
}

/// The affine-invariant metric as a field over [`SpdChart`] coordinates.
#[derive(Debug, Clone)]
pub struct SpdAffineMetric {
    chart: SpdChart,
    basis: Vec<DMatrix<f64>>,
}

impl SpdAffineMetric {
    pub fn new(n: usize) -> Result<Self> {
        let chart = SpdChart::new(n)?;
        Ok(SpdAffineMetric { basis: chart.basis(), chart })
    }

    pub fn chart(&self) -> SpdChart {
        self.chart
    }

    fn inverse_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.chart.dim(), x)?;
        let m = self.chart.devectorize(x);
        linalg::check_spd(&m).map_err(|e| Error::Domain(format!("chart point is not an SPD matrix: {e}")))?;
        linalg::spd_inverse(&m)
    }
}

impl MetricField for SpdAffineMetric {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let inv = self.inverse_at(x)?;
        let p: Vec<DMatrix<f64>> = self.basis.iter().map(|e| &inv * e).collect();
        let d = self.dim();
        Ok(DMatrix::from_fn(d, d, |a, b| (&p[a] * &p[b]).trace()))
    }

    fn derivative_at(&self, x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        let inv = match self.inverse_at(x) {
            Ok(i) => i,
            Err(e) => return Some(Err(e)),
        };
        let p: Vec<DMatrix<f64>> = self.basis.iter().map(|e| &inv * e).collect();
        let d = self.dim();
        // ∂_c g_ab = −tr(P_c P_a P_b) − tr(P_a P_c P_b), P_a = M⁻¹E_a
        let out = (0..d)
            .map(|c| {
                DMatrix::from_fn(d, d, |a, b| {
                    -(&p[c] * &p[a] * &p[b]).trace() - (&p[a] * &p[c] * &p[b]).trace()
                })
            })
            .collect();
        Some(Ok(out))
    }
}

fn require_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    linalg::check_spd(m).map_err(|e| Error::Domain(format!("{what} is not SPD: {e}")))
}

/// `g_Σ(W, V) = tr(Σ⁻¹WΣ⁻¹V)`
pub fn spd_affine_inner(sigma: &DMatrix<f64>, w: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    require_spd(sigma, "base point")?;
    let inv = linalg::spd_inverse(sigma)?;
    Ok((&inv * w * &inv * v).trace())
}

/// `‖log(M₁^{-1/2} M₂ M₁^{-1/2})‖_F`
pub fn spd_affine_distance(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<f64> {
    require_spd(m1, "first matrix")?;
    require_spd(m2, "second matrix")?;
    let s = inv_sqrtm_spd(m1)?;
    let inner = linalg::symmetrize(&(&s * m2 * &s));
    let eig = linalg::sym_eigen(&inner);
    Ok(eig.eigenvalues.iter().map(|l| l.max(linalg::LOG_EIGEN_FLOOR).ln().powi(2)).sum::<f64>().sqrt())
}

/// Point at time `t` on the geodesic from `Σ` with velocity `V`:
/// `Σ^{1/2} exp(t Σ^{-1/2} V Σ^{-1/2}) Σ^{1/2}`.
pub fn spd_affine_exp(sigma: &DMatrix<f64>, v: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    require_spd(sigma, "base point")?;
    let r = sqrtm_spd(sigma)?;
    let ir = inv_sqrtm_spd(sigma)?;
    let inner = linalg::symmetrize(&(&ir * v * &ir)) * t;
    Ok(linalg::symmetrize(&(&r * expm_sym(&inner) * &r)))
}

/// Inverse of [`spd_affine_exp`] at `t = 1`.
pub fn spd_affine_log(sigma: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_spd(sigma, "base point")?;
    require_spd(target, "target")?;
    let r = sqrtm_spd(sigma)?;
    let ir = inv_sqrtm_spd(sigma)?;
    let inner = logm_spd(&linalg::symmetrize(&(&ir * target * &ir)))?;
    Ok(linalg::symmetrize(&(&r * inner * &r)))
}

/// Parallel transport of `W` from `Σ` to `γ(t)` along the geodesic with
/// velocity `V`: `exp(tVΣ⁻¹/2) W exp(tΣ⁻¹V/2)`.
///
/// Evaluated as `Σ^{1/2} E Σ^{-1/2} W Σ^{-1/2} E Σ^{1/2}` with
/// `E = exp(t Σ^{-1/2} V Σ^{-1/2} / 2)`, which is the same matrix.
pub fn spd_affine_transport(sigma: &DMatrix<f64>, v: &DMatrix<f64>, w: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    require_spd(sigma, "base point")?;
    let r = sqrtm_spd(sigma)?;
    let ir = inv_sqrtm_spd(sigma)?;
    let e = expm_sym(&(linalg::symmetrize(&(&ir * v * &ir)) * (0.5 * t)));
    let left = &r * &e * &ir;
    let right = &ir * &e * &r;
    Ok(linalg::symmetrize(&(left * w * right)))
}

/// `‖log M₁ − log M₂‖_F`
pub fn log_euclidean_distance(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<f64> {
    require_spd(m1, "first matrix")?;
    require_spd(m2, "second matrix")?;
    Ok((logm_spd(m1)? - logm_spd(m2)?).norm())
}

/// Matrix logarithm on the chart, convenient for building test targets.
pub fn spd_log(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    logm_spd(m)
}

pub fn spd_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::exp)
}

/// The Poincaré half-plane `g = y⁻²·I` in coordinates `(x, y)`, `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HalfPlaneMetric;

fn half_plane_height(x: &DVector<f64>) -> Result<f64> {
    check_dim(2, x)?;
    let y = x[1];
    if !(y > 0.0) {
        return Err(Error::Domain(format!("half-plane point needs y > 0, got {y}")));
    }
    Ok(y)
}

impl MetricField for HalfPlaneMetric {
    fn dim(&self) -> usize {
        2
    }

    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let y = half_plane_height(x)?;
        Ok(DMatrix::identity(2, 2) / (y * y))
    }

    fn derivative_at(&self, x: &DVector<f64>) -> Option<Result<Vec<DMatrix<f64>>>> {
        Some(half_plane_height(x).map(|y| vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2) * (-2.0 / y.powi(3))]))
    }
}

/// Exact half-plane length of the straight chart segment from `p` to `q`:
/// `|q − p| · (ln q_y − ln p_y) / (q_y − p_y)`.
fn half_plane_segment(p: (f64, f64), q: (f64, f64)) -> f64 {
    let euclid = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
    let dy = q.1 - p.1;
    if dy.abs() < 1e-9 * p.1 {
        // log-ratio / dy → 1 / mean y as dy → 0
        let mean = 0.5 * (p.1 + q.1);
        return euclid / mean * (1.0 + dy * dy / (12.0 * mean * mean));
    }
    euclid * (q.1.ln() - p.1.ln()) / dy
}

/// Side of the grid used by [`hyperbolic_oracle_distance`].
pub const ORACLE_GRID: usize = 400;

/// Brute-force half-plane distance: Dijkstra on a 400×400 grid graph (32
/// stencil directions, exact segment lengths) followed by coarse-to-fine
/// relaxation of the resulting polyline. The result is the length of an
/// actual curve, so it bounds the true distance from above.
pub fn hyperbolic_oracle_distance(p1: &DVector<f64>, p2: &DVector<f64>) -> Result<f64> {
    half_plane_height(p1)?;
    half_plane_height(p2)?;
    if p1 == p2 {
        return Ok(0.0);
    }
    let path = grid_shortest_path(p1, p2);
    Ok(relax_polyline(path))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn grid_shortest_path(p1: &DVector<f64>, p2: &DVector<f64>) -> Vec<(f64, f64)> {
    let n = ORACLE_GRID;
    let w = (p2 - p1).norm();
    let xlo = p1[0].min(p2[0]) - 0.5 * w;
    let xhi = p1[0].max(p2[0]) + 0.5 * w;
    let ylo = 0.5 * p1[1].min(p2[1]);
    let yhi = p1[1].max(p2[1]) + w;
    let hx = (xhi - xlo) / (n - 1) as f64;
    let hy = (yhi - ylo) / (n - 1) as f64;
    let coord = |i: usize, j: usize| (xlo + i as f64 * hx, ylo + j as f64 * hy);
    let snap = |p: &DVector<f64>| {
        let i = ((p[0] - xlo) / hx).round().clamp(0.0, (n - 1) as f64) as usize;
        let j = ((p[1] - ylo) / hy).round().clamp(0.0, (n - 1) as f64) as usize;
        i * n + j
    };
    let (src, dst) = (snap(p1), snap(p2));

    let mut stencil = Vec::new();
    for a in -4i64..=4 {
        for b in -4i64..=4 {
            if (a, b) != (0, 0) && gcd(a, b) == 1 {
                stencil.push((a, b));
            }
        }
    }

    let mut dist = vec![f64::INFINITY; n * n];
    let mut prev = vec![usize::MAX; n * n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((ordered(0.0), src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        let d = d.0;
        if d > dist[u] {
            continue;
        }
        if u == dst {
            break;
        }
        let (ui, uj) = ((u / n) as i64, (u % n) as i64);
        let pu = coord(ui as usize, uj as usize);
        for &(a, b) in &stencil {
            let (vi, vj) = (ui + a, uj + b);
            if vi < 0 || vj < 0 || vi >= n as i64 || vj >= n as i64 {
                continue;
            }
            let v = vi as usize * n + vj as usize;
            let nd = d + half_plane_segment(pu, coord(vi as usize, vj as usize));
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((ordered(nd), v)));
            }
        }
    }

    let mut nodes = vec![dst];
    while let Some(&last) = nodes.last() {
        if last == src {
            break;
        }
        nodes.push(prev[last]);
    }
    nodes.reverse();
    let mut path: Vec<(f64, f64)> = nodes.iter().map(|&u| coord(u / n, u % n)).collect();
    path[0] = (p1[0], p1[1]);
    let last = path.len() - 1;
    if last == 0 {
        path.push((p2[0], p2[1]));
    } else {
        path[last] = (p2[0], p2[1]);
    }
    path
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ordered(f64);

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn ordered(x: f64) -> Ordered {
    Ordered(x)
}

fn polyline_length(path: &[(f64, f64)]) -> f64 {
    path.windows(2).map(|w| half_plane_segment(w[0], w[1])).sum()
}

/// Resample a polyline to `segments` pieces of equal Euclidean length.
fn resample(path: &[(f64, f64)], segments: usize) -> Vec<(f64, f64)> {
    let mut cum = vec![0.0];
    for w in path.windows(2) {
        let l = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + l);
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(segments + 1);
    let mut k = 0;
    for s in 0..=segments {
        let target = total * s as f64 / segments as f64;
        while k + 1 < cum.len() - 1 && cum[k + 1] < target {
            k += 1;
        }
        let span = cum[k + 1] - cum[k];
        let f = if span > 0.0 { ((target - cum[k]) / span).clamp(0.0, 1.0) } else { 0.0 };
        out.push((path[k].0 + f * (path[k + 1].0 - path[k].0), path[k].1 + f * (path[k + 1].1 - path[k].1)));
    }
    out[0] = path[0];
    out[segments] = *path.last().unwrap();
    out
}

/// Gauss–Seidel sweeps moving each interior node along the normal of its
/// neighbours' chord to the position minimizing the two adjacent segment
/// lengths, on successively finer resamplings.
fn relax_polyline(path: Vec<(f64, f64)>) -> f64 {
    let mut current = resample(&path, 16);
    let mut segments = 16;
    loop {
        for _ in 0..2000 {
            let mut moved: f64 = 0.0;
            for k in 1..current.len() - 1 {
                let (a, c) = (current[k - 1], current[k + 1]);
                let (cx, cy) = (c.0 - a.0, c.1 - a.1);
                let len = (cx * cx + cy * cy).sqrt();
                if len == 0.0 {
                    continue;
                }
                let normal = (-cy / len, cx / len);
                let p = current[k];
                let f = |s: f64| {
                    let q = (p.0 + s * normal.0, p.1 + s * normal.1);
                    if q.1 <= 0.0 {
                        f64::INFINITY
                    } else {
                        half_plane_segment(a, q) + half_plane_segment(q, c)
                    }
                };
                let s = golden_min(&f, -0.5 * len, 0.5 * len);
                if f(s) < f(0.0) {
                    current[k] = (p.0 + s * normal.0, p.1 + s * normal.1);
                    moved = moved.max(s.abs());
                }
            }
            if moved < 1e-13 {
                break;
            }
        }
        if segments >= 512 {
            break;
        }
        // refine: insert chord midpoints
        let mut finer = Vec::with_capacity(2 * current.len());
        for w in current.windows(2) {
            finer.push(w[0]);
            finer.push((0.5 * (w[0].0 + w[1].0), 0.5 * (w[0].1 + w[1].1)));
        }
        finer.push(*current.last().unwrap());
        current = finer;
        segments *= 2;
    }
    polyline_length(&current)
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::metric;

    fn m2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, b, c])
    }

    #[test]
    fn vectorize_is_an_isometry() {
        let chart = SpdChart::new(3).unwrap();
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, -0.5, 2.0, 0.3, 0.7, -0.5, 0.7, -2.0]);
        let v = chart.vectorize(&m);
        assert!((v.norm() - m.norm()).abs() < 1e-14);
        assert!((chart.devectorize(&v) - m).amax() < 1e-15);
    }

    #[test]
    fn affine_metric_at_identity_is_identity() {
        let f = SpdAffineMetric::new(2).unwrap();
        let x = f.chart().vectorize(&DMatrix::identity(2, 2));
        assert!((metric(&f, &x).unwrap() - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn affine_metric_hand_values() {
        let f = SpdAffineMetric::new(2).unwrap();
        let chart = f.chart();
        let v = chart.vectorize(&m2(1.0, 0.0, 0.0));
        let g = metric(&f, &chart.vectorize(&m2(4.0, 0.0, 1.0))).unwrap();
        assert!((linalg::quad(&g, &v, &v) - 1.0 / 16.0).abs() < 1e-15);
        for delta in [1e-1, 1e-2, 1e-3] {
            let g = metric(&f, &chart.vectorize(&m2(delta, 0.0, 1.0))).unwrap();
            assert!((linalg::quad(&g, &v, &v) - delta.powi(-2)).abs() < 1e-9 * delta.powi(-2));
        }
        assert!(matches!(f.metric_at(&chart.vectorize(&m2(-1.0, 0.0, 1.0))), Err(Error::Domain(_))));
    }

    #[test]
    fn affine_analytic_derivatives_match_fd() {
        let f = SpdAffineMetric::new(2).unwrap();
        let x = f.chart().vectorize(&m2(2.0, 0.3, 0.8));
        let a = f.derivative_at(&x).unwrap().unwrap();
        let n = crate::manifold::fd_metric_derivatives(&f, &x, 1e-5).unwrap();
        for (da, dn) in a.iter().zip(&n) {
            assert!((da - dn).amax() < 1e-8);
        }
    }

    #[test]
    fn affine_distance_values() {
        let m = m2(2.0, 0.5, 1.0);
        assert!(spd_affine_distance(&m, &m).unwrap() < 1e-14);
        let d = spd_affine_distance(&DMatrix::identity(2, 2), &m2(4.0, 0.0, 1.0)).unwrap();
        assert!((d - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn affine_invariance() {
        let a = DMatrix::from_row_slice(2, 2, &[1.3, -0.4, 0.8, 2.1]);
        let (m1, m2_) = (m2(2.0, 0.5, 1.0), m2(0.7, -0.2, 3.0));
        let d = spd_affine_distance(&m1, &m2_).unwrap();
        let dt = spd_affine_distance(&(a.transpose() * &m1 * &a), &(a.transpose() * &m2_ * &a)).unwrap();
        assert!((d - dt).abs() < 1e-10);
    }

    #[test]
    fn exp_special_cases_and_arc_length() {
        let v = m2(1.0, 0.3, -1.0);
        let e = spd_affine_exp(&DMatrix::identity(2, 2), &v, 0.7).unwrap();
        assert!((e - expm_sym(&(&v * 0.7))).amax() < 1e-13);
        let s = m2(2.0, 0.5, 1.0);
        assert!((spd_affine_exp(&s, &DMatrix::zeros(2, 2), 0.8).unwrap() - &s).amax() < 1e-14);
        let speed = spd_affine_inner(&s, &v, &v).unwrap().sqrt();
        for t in [0.0, 0.25, 0.5, 1.0] {
            let d = spd_affine_distance(&s, &spd_affine_exp(&s, &v, t).unwrap()).unwrap();
            assert!((d - t * speed).abs() < 1e-12);
        }
        let back = spd_affine_log(&s, &spd_affine_exp(&s, &v, 1.0).unwrap()).unwrap();
        assert!((back - v).amax() < 1e-12);
    }

    #[test]
    fn transport_identities() {
        let s = m2(2.0, 0.5, 1.0);
        let v = m2(0.4, -0.2, 0.9);
        let w = m2(-1.0, 0.6, 0.3);
        assert!((spd_affine_transport(&s, &v, &w, 0.0).unwrap() - &w).amax() < 1e-14);
        let id = DMatrix::identity(2, 2);
        assert!((spd_affine_transport(&id, &DMatrix::zeros(2, 2), &w, 0.9).unwrap() - &w).amax() < 1e-14);
        let n0 = spd_affine_inner(&s, &w, &w).unwrap();
        for t in [0.3, 1.0, 2.0] {
            let wt = spd_affine_transport(&s, &v, &w, t).unwrap();
            let nt = spd_affine_inner(&spd_affine_exp(&s, &v, t).unwrap(), &wt, &wt).unwrap();
            assert!((nt - n0).abs() < 1e-10 * n0);
        }
    }

    #[test]
    fn log_euclidean_values() {
        let m = m2(2.0, 0.5, 1.0);
        assert!(log_euclidean_distance(&m, &m).unwrap() < 1e-14);
        let e = std::f64::consts::E;
        let d = log_euclidean_distance(&DMatrix::identity(2, 2), &m2(e, 0.0, e)).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-14);
        let (a, b) = (m2(4.0, 0.0, 1.0), m2(1.0, 0.0, 4.0));
        let expected = (2.0 * 4f64.ln().powi(2)).sqrt();
        assert!((log_euclidean_distance(&a, &b).unwrap() - expected).abs() < 1e-13);
        assert!((spd_affine_distance(&a, &b).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn segment_length_limits() {
        // horizontal segment at height y has length |dx| / y
        assert!((half_plane_segment((0.0, 2.0), (1.0, 2.0)) - 0.5).abs() < 1e-15);
        // vertical from 1 to e has length 1
        assert!((half_plane_segment((0.0, 1.0), (0.0, std::f64::consts::E)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_simple_cases() {
        let p = DVector::from_column_slice(&[0.3, 1.2]);
        assert_eq!(hyperbolic_oracle_distance(&p, &p).unwrap(), 0.0);
        let a = DVector::from_column_slice(&[0.0, 1.0]);
        let b = DVector::from_column_slice(&[0.0, std::f64::consts::E]);
        assert!((hyperbolic_oracle_distance(&a, &b).unwrap() - 1.0).abs() < 1e-9);
        assert!(hyperbolic_oracle_distance(&a, &DVector::from_column_slice(&[0.0, 0.0])).is_err());
    }
}
