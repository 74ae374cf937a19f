//! File formats. Numbers are written with 17 significant digits so that
//! every value reads back bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::geo::fmt_f64;
use crate::learn::FitReport;
use crate::metrics::MetricSpec;
use crate::objectives::{DistanceObservation, DistanceObservations, Trajectory, TrajectorySet};

/// Version written into every structured document.
pub const FORMAT_VERSION: u32 = 1;

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn parse_row(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|e| parse_err(line, format!("{e}: {f:?}"))))
        .collect()
}

/// Reads `key=value` fields from a `# …` header line.
fn header_fields(line: &str) -> Result<Vec<(String, usize)>> {
    let body = line.strip_prefix('#').ok_or_else(|| parse_err(1, "missing '#' header"))?;
    body.split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(1, format!("bad header field {kv:?}")))?;
            let v = v.parse().map_err(|e| parse_err(1, format!("{k}: {e}")))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

fn field(fields: &[(String, usize)], name: &str) -> Result<usize> {
    fields
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| parse_err(1, format!("header lacks {name}")))
}

/// `# d=… n=… n_classes=…` followed by `x_0,…,x_{d−1},label` rows.
pub fn dataset_to_string(data: &LabeledDataset) -> String {
    let mut out = format!("# d={} n={} n_classes={}\n", data.dim(), data.len(), data.n_classes());
    for (p, l) in data.points.iter().zip(&data.labels) {
        for c in p.iter() {
            out.push_str(&fmt_f64(*c));
            out.push(',');
        }
        writeln!(out, "{l}").expect("writing to a String");
    }
    out
}

pub fn dataset_from_str(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines();
    let fields = header_fields(lines.next().ok_or_else(|| parse_err(1, "empty file"))?)?;
    let (d, n) = (field(&fields, "d")?, field(&fields, "n")?);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (coords, label) = line.rsplit_once(',').ok_or_else(|| parse_err(i + 2, "missing label"))?;
        let row = parse_row(i + 2, coords)?;
        if row.len() != d {
            return Err(parse_err(i + 2, format!("expected {d} coordinates, got {}", row.len())));
        }
        points.push(DVector::from_vec(row));
        labels.push(label.trim().parse().map_err(|e| parse_err(i + 2, format!("label: {e}")))?);
    }
    if points.len() != n {
        return Err(Error::Parse(format!("header announces {n} rows, found {}", points.len())));
    }
    LabeledDataset::new(points, labels)
}

pub fn write_dataset(path: &Path, data: &LabeledDataset) -> Result<()> {
    Ok(fs::write(path, dataset_to_string(data))?)
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    dataset_from_str(&fs::read_to_string(path)?)
}

/// Plain `# d=… n=…` point table (no labels), e.g. volume samples.
pub fn points_to_string(points: &[DVector<f64>]) -> String {
    let d = points.first().map_or(0, |p| p.len());
    let mut out = format!("# d={d} n={}\n", points.len());
    for p in points {
        let row: Vec<String> = p.iter().map(|c| fmt_f64(*c)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `# d=… n=…` then `x…,y…,distance,weight` rows.
pub fn observations_to_string(obs: &DistanceObservations) -> String {
    let d = obs.observations.first().map_or(0, |o| o.x.len());
    let mut out = format!("# d={d} n={}\n", obs.len());
    for o in &obs.observations {
        let row: Vec<String> = o.x.iter().chain(o.y.iter()).chain([o.distance, o.weight].iter()).map(|c| fmt_f64(*c)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn observations_from_str(text: &str) -> Result<DistanceObservations> {
    let mut lines = text.lines();
    let fields = header_fields(lines.next().ok_or_else(|| parse_err(1, "empty file"))?)?;
    let d = field(&fields, "d")?;
    let mut obs = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = parse_row(i + 2, line)?;
        let weight = match row.len() {
            l if l == 2 * d + 1 => 1.0,
            l if l == 2 * d + 2 => row[2 * d + 1],
            l => return Err(parse_err(i + 2, format!("expected {} or {} fields, got {l}", 2 * d + 1, 2 * d + 2))),
        };
        obs.push(DistanceObservation {
            x: DVector::from_column_slice(&row[..d]),
            y: DVector::from_column_slice(&row[d..2 * d]),
            distance: row[2 * d],
            weight,
        });
    }
    DistanceObservations::new(obs)
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRecord {
    trajectory: usize,
    t: f64,
    x: Vec<f64>,
}

/// One JSON record per sample: `{"trajectory":k,"t":…,"x":[…]}`.
pub fn trajectories_to_string(set: &TrajectorySet) -> String {
    let mut out = String::new();
    for (k, tr) in set.trajectories.iter().enumerate() {
        for (t, x) in tr.times.iter().zip(&tr.points) {
            let rec = TrajectoryRecord { trajectory: k, t: *t, x: x.iter().copied().collect() };
            out.push_str(&serde_json::to_string(&rec).expect("plain record serializes"));
            out.push('\n');
        }
    }
    out
}

/// Records of one trajectory must be contiguous; ids need not start at 0.
pub fn trajectories_from_str(text: &str) -> Result<TrajectorySet> {
    let mut trajectories = Vec::new();
    let mut current: Option<(usize, Vec<f64>, Vec<DVector<f64>>)> = None;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: TrajectoryRecord = serde_json::from_str(line).map_err(|e| parse_err(i + 1, e))?;
        match &mut current {
            Some((id, ts, xs)) if *id == rec.trajectory => {
                ts.push(rec.t);
                xs.push(DVector::from_vec(rec.x));
            }
            _ => {
                if let Some((_, ts, xs)) = current.take() {
                    trajectories.push(Trajectory::new(ts, xs)?);
                }
                current = Some((rec.trajectory, vec![rec.t], vec![DVector::from_vec(rec.x)]));
            }
        }
    }
    if let Some((_, ts, xs)) = current {
        trajectories.push(Trajectory::new(ts, xs)?);
    }
    Ok(TrajectorySet { trajectories })
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricDocument {
    format_version: u32,
    metric: MetricSpec,
}

pub fn metric_to_toml(spec: &MetricSpec) -> Result<String> {
    toml::to_string(&MetricDocument { format_version: FORMAT_VERSION, metric: spec.clone() })
        .map_err(|e| Error::Parse(e.to_string()))
}

pub fn metric_from_toml(text: &str) -> Result<MetricSpec> {
    let doc: MetricDocument = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    check_version(doc.format_version)?;
    Ok(doc.metric)
}

pub(crate) fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported format_version {v} (expected {FORMAT_VERSION})")));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportDocument {
    format_version: u32,
    metric: MetricSpec,
    report: FitReport,
}

pub fn fit_report_to_json(spec: &MetricSpec, report: &FitReport) -> Result<String> {
    let doc = ReportDocument { format_version: FORMAT_VERSION, metric: spec.clone(), report: report.clone() };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))
}

pub fn fit_report_from_json(text: &str) -> Result<(MetricSpec, FitReport)> {
    let doc: ReportDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    check_version(doc.format_version)?;
    Ok((doc.metric, doc.report))
}
