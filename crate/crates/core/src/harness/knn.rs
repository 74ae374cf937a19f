use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::geo::SolverConfig;
use crate::graph::build_knn_graph;
use crate::manifold::{check_dim, MetricField};
use crate::objectives::{pairwise_distances, DistanceBackend, DEFAULT_GRAPH_K};

/// Distances from each query to every training point; graph distances
/// across components are `+∞`.
fn distance_table(
    field: &dyn MetricField,
    train: &[DVector<f64>],
    query: &[DVector<f64>],
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<Vec<Vec<f64>>> {
    let resolved = match backend {
        DistanceBackend::Auto if field.constant_matrix().is_none() => DistanceBackend::graph(DEFAULT_GRAPH_K),
        other => other.clone(),
    };
    if let DistanceBackend::Graph { k, support } = &resolved {
        let mut nodes: Vec<DVector<f64>> = train.to_vec();
        nodes.extend(query.iter().cloned());
        nodes.extend(support.iter().map(|s| DVector::from_column_slice(s)));
        let graph = build_knn_graph(&nodes, (*k).min(nodes.len() - 1), Some(field))?;
        return query
            .iter()
            .enumerate()
            .map(|(q, _)| {
                let d = graph.distances_from(train.len() + q)?;
                Ok(d[..train.len()].iter().map(|d| d.unwrap_or(f64::INFINITY)).collect())
            })
            .collect();
    }
    let mut pairs = Vec::with_capacity(train.len() * query.len());
    for q in query {
        for t in train {
            pairs.push((q.clone(), t.clone()));
        }
    }
    let flat = pairwise_distances(field, &pairs, &resolved, cfg)?;
    Ok(flat.chunks(train.len().max(1)).map(<[f64]>::to_vec).collect())
}

/// Majority label among the `k` nearest (distance ties to the smaller
/// index, vote ties to the smaller class id).
fn vote(dist: &[f64], labels: &[usize], k: usize, skip: Option<usize>) -> usize {
    let mut order: Vec<usize> = (0..dist.len()).filter(|&i| Some(i) != skip).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; n_classes];
    for &i in order.iter().take(k) {
        counts[labels[i]] += 1;
    }
    let best = *counts.iter().max().unwrap_or(&0);
    counts.iter().position(|&c| c == best).unwrap_or(0)
}

/// k-NN labels for `query` under the backend distance.
pub fn knn_classify(
    field: &dyn MetricField,
    train: &LabeledDataset,
    query: &[DVector<f64>],
    k: usize,
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<Vec<usize>> {
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!("k must satisfy 1 ≤ k ≤ {}, got {k}", train.len())));
    }
    for q in query {
        check_dim(field.dim(), q)?;
    }
    let table = distance_table(field, &train.points, query, backend, cfg)?;
    Ok(table.iter().map(|d| vote(d, &train.labels, k, None)).collect())
}

/// Leave-one-out predictions: every point is classified by the others.
/// The graph backend builds one graph over the whole dataset.
pub fn knn_leave_one_out(
    field: &dyn MetricField,
    data: &LabeledDataset,
    k: usize,
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<Vec<usize>> {
    if k == 0 || k >= data.len() {
        return Err(Error::InvalidArgument(format!("k must satisfy 1 ≤ k < {}, got {k}", data.len())));
    }
    let resolved = match backend {
        DistanceBackend::Auto if field.constant_matrix().is_none() => DistanceBackend::graph(DEFAULT_GRAPH_K),
        other => other.clone(),
    };
    let table: Vec<Vec<f64>> = if let DistanceBackend::Graph { k: gk, support } = &resolved {
        let mut nodes = data.points.clone();
        nodes.extend(support.iter().map(|s| DVector::from_column_slice(s)));
        let graph = build_knn_graph(&nodes, (*gk).min(nodes.len() - 1), Some(field))?;
        (0..data.len())
            .map(|i| Ok(graph.distances_from(i)?[..data.len()].iter().map(|d| d.unwrap_or(f64::INFINITY)).collect()))
            .collect::<Result<_>>()?
    } else {
        distance_table(field, &data.points, &data.points, &resolved, cfg)?
    };
    Ok(table.iter().enumerate().map(|(i, d)| vote(d, &data.labels, k, Some(i))).collect())
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub n: usize,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

/// Leave-one-out k-NN accuracy.
pub fn loo_accuracy(
    field: &dyn MetricField,
    data: &LabeledDataset,
    k: usize,
    backend: &DistanceBackend,
    cfg: &SolverConfig,
) -> Result<EvalReport> {
    let predictions = knn_leave_one_out(field, data, k, backend, cfg)?;
    Ok(EvalReport { k, n: data.len(), accuracy: accuracy(&predictions, &data.labels), predictions })
}
