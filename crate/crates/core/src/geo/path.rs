use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{metric, MetricField};

/// A discretized curve on `[0, 1]` with positions and velocities at each node.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
}

impl GeodesicPath {
    pub fn new(times: Vec<f64>, points: Vec<DVector<f64>>, velocities: Vec<DVector<f64>>) -> Result<Self> {
        let path = GeodesicPath { times, points, velocities };
        path.validate()?;
        Ok(path)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 2 || self.points.len() != n || self.velocities.len() != n {
            return Err(Error::Shape(format!(
                "path needs ≥ 2 nodes and equal lengths (times {}, points {}, velocities {})",
                n,
                self.points.len(),
                self.velocities.len()
            )));
        }
        if self.times[0] != 0.0 || self.times[n - 1] != 1.0 {
            return Err(Error::InvalidArgument("path times must start at 0 and end at 1".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("path times must be strictly increasing".into()));
        }
        let d = self.points[0].len();
        if self.points.iter().chain(&self.velocities).any(|p| p.len() != d) {
            return Err(Error::Shape("inconsistent point dimensions along path".into()));
        }
        Ok(())
    }

    /// Straight segment `x + t(y − x)` sampled at `n` uniform nodes.
    pub fn straight(x: &DVector<f64>, y: &DVector<f64>, n: usize) -> Self {
        let n = n.max(2);
        let times: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let delta = y - x;
        let points = times.iter().map(|&t| x + &delta * t).collect();
        let velocities = vec![delta; n];
        GeodesicPath { times, points, velocities }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.points[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        self.points.last().expect("validated path is non-empty")
    }

    /// Index `k` with `times[k] ≤ t ≤ times[k+1]`.
    pub(crate) fn segment_of(&self, t: f64) -> usize {
        let n = self.times.len();
        match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Hermite interpolation of position and velocity at time `t`.
    pub fn sample(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let k = self.segment_of(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (p0, p1) = (&self.points[k], &self.points[k + 1]);
        let (m0, m1) = (&self.velocities[k] * h, &self.velocities[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let pos = p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + &m0 * (s3 - 2.0 * s2 + s)
            + p1 * (-2.0 * s3 + 3.0 * s2)
            + &m1 * (s3 - s2);
        let vel = (p0 * (6.0 * s2 - 6.0 * s)
            + &m0 * (3.0 * s2 - 4.0 * s + 1.0)
            + p1 * (-6.0 * s2 + 6.0 * s)
            + &m1 * (3.0 * s2 - 2.0 * s))
            / h;
        (pos, vel)
    }

    /// Delimiter-separated export: `t,x0..x{d-1},v0..v{d-1}` with a header row.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let d = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.extend((0..d).map(|i| format!("v{i}")));
        writeln!(out, "{}", header.join(","))?;
        for ((t, p), v) in self.times.iter().zip(&self.points).zip(&self.velocities) {
            let mut row = vec![fmt_f64(*t)];
            row.extend(p.iter().map(|x| fmt_f64(*x)));
            row.extend(v.iter().map(|x| fmt_f64(*x)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn speeds_sq(field: &dyn MetricField, curve: &GeodesicPath) -> Result<Vec<f64>> {
    curve
        .points
        .iter()
        .zip(&curve.velocities)
        .map(|(p, v)| Ok(linalg::quad(&metric(field, p)?, v, v)))
        .collect()
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum()
}

/// Trapezoid approximation of `∫ √(g_γ(γ̇, γ̇)) dt` from the stored velocities.
pub fn path_length(field: &dyn MetricField, curve: &GeodesicPath) -> Result<f64> {
    curve.validate()?;
    let speeds: Vec<f64> = speeds_sq(field, curve)?.into_iter().map(|s| s.max(0.0).sqrt()).collect();
    Ok(trapezoid(&curve.times, &speeds))
}

/// Trapezoid approximation of `∫ g_γ(γ̇, γ̇) dt`.
pub fn path_energy(field: &dyn MetricField, curve: &GeodesicPath) -> Result<f64> {
    curve.validate()?;
    Ok(trapezoid(&curve.times, &speeds_sq(field, curve)?))
}
