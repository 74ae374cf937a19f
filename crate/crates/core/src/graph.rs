//! kNN graphs with metric edge weights and exact shortest-path distances.
//!
//! Edge weights are stored as fixed-point integers (`2⁻³²` resolution), so
//! path sums are exact: graph distances are symmetric and satisfy the
//! triangle inequality without rounding slack.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{metric, MetricField};

const TICKS_PER_UNIT: f64 = (1u64 << 32) as f64;
/// Largest representable path length; keeps every sum below `2⁵³` ticks so
/// conversions to `f64` stay exact.
pub const MAX_PATH_LENGTH: f64 = (1u64 << 21) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetrization {
    /// Edge when either endpoint lists the other among its k nearest.
    #[default]
    Union,
    /// Edge only when both do.
    Mutual,
}

#[derive(Debug, Clone)]
pub struct MetricGraph {
    nodes: Vec<DVector<f64>>,
    /// Sorted by neighbor index.
    adjacency: Vec<Vec<(usize, u64)>>,
    k: usize,
}

fn to_ticks(w: f64) -> Result<u64> {
    if !(w >= 0.0) || !w.is_finite() || w > MAX_PATH_LENGTH / 1024.0 {
        return Err(Error::InvalidArgument(format!("edge weight {w} is out of range")));
    }
    Ok((w * TICKS_PER_UNIT).round() as u64)
}

fn from_ticks(t: u64) -> f64 {
    t as f64 / TICKS_PER_UNIT
}

/// `√(Δᵀ g(mid) Δ)`, or `‖Δ‖` without a field.
pub fn edge_weight(field: Option<&dyn MetricField>, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let delta = b - a;
    match field {
        None => Ok(delta.norm()),
        Some(f) => {
            let g = metric(f, &((a + b) * 0.5))?;
            Ok(linalg::quad(&g, &delta, &delta).max(0.0).sqrt())
        }
    }
}

/// Indices of the `k` Euclidean-nearest other points, ties by index.
fn nearest(points: &[DVector<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, p)| (p.iter().zip(points[i].iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// kNN graph with union symmetrization; see [`build_knn_graph_with`].
pub fn build_knn_graph(points: &[DVector<f64>], k: usize, field: Option<&dyn MetricField>) -> Result<MetricGraph> {
    build_knn_graph_with(points, k, field, Symmetrization::Union)
}

/// Connects each point to its `k` Euclidean-nearest neighbors and weights
/// each edge by the midpoint-metric length of its chord.
pub fn build_knn_graph_with(
    points: &[DVector<f64>],
    k: usize,
    field: Option<&dyn MetricField>,
    symmetrization: Symmetrization,
) -> Result<MetricGraph> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("k must satisfy 1 ≤ k < {n}, got {k}")));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::Shape("points have inconsistent dimensions".into()));
    }
    if let Some(f) = field {
        if f.dim() != d {
            return Err(Error::DimensionMismatch { expected: f.dim(), got: d });
        }
    }
    let lists: Vec<Vec<usize>> = (0..n).map(|i| nearest(points, i, k)).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            let keep = match symmetrization {
                Symmetrization::Union => true,
                Symmetrization::Mutual => lists[j].contains(&i),
            };
            if keep {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut adjacency = vec![Vec::new(); n];
    for (i, j) in pairs {
        let w = to_ticks(edge_weight(field, &points[i], &points[j])?)?;
        adjacency[i].push((j, w));
        adjacency[j].push((i, w));
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(MetricGraph { nodes: points.to_vec(), adjacency, k })
}

impl MetricGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nodes(&self) -> &[DVector<f64>] {
        &self.nodes
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[i].iter().map(|&(j, w)| (j, from_ticks(w)))
    }

    /// Weight of edge `(i, j)`, if present.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .ok()
            .map(|p| from_ticks(self.adjacency[i][p].1))
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::InvalidArgument(format!("node {i} out of range (graph has {})", self.len())));
        }
        Ok(())
    }

    /// Dijkstra from `src`: exact tick distances and predecessors (ties go to
    /// the smaller predecessor index).
    fn dijkstra(&self, src: usize, stop_at: Option<usize>) -> (Vec<Option<u64>>, Vec<usize>) {
        let n = self.len();
        let mut dist: Vec<Option<u64>> = vec![None; n];
        let mut pred = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[src] = Some(0);
        heap.push(Reverse((0u64, src)));
        while let Some(Reverse((du, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if stop_at == Some(u) {
                break;
            }
            for &(v, w) in &self.adjacency[u] {
                if done[v] {
                    continue;
                }
                let nd = du + w;
                let better = match dist[v] {
                    None => true,
                    Some(old) => nd < old || (nd == old && u < pred[v]),
                };
                if better {
                    dist[v] = Some(nd);
                    pred[v] = u;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        (dist, pred)
    }

    /// Shortest-path distances from `src` to every node (`None` when unreachable).
    pub fn distances_from(&self, src: usize) -> Result<Vec<Option<f64>>> {
        self.check_node(src)?;
        Ok(self.dijkstra(src, None).0.into_iter().map(|d| d.map(from_ticks)).collect())
    }

    /// Shortest-path distance, `None` across components.
    pub fn graph_distance(&self, i: usize, j: usize) -> Result<Option<f64>> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Ok(Some(0.0));
        }
        // run from the smaller index so the result does not depend on argument order
        let (s, t) = (i.min(j), i.max(j));
        Ok(self.dijkstra(s, Some(t)).0[t].map(from_ticks))
    }

    /// Node sequence `i → … → j` realizing [`MetricGraph::graph_distance`].
    pub fn graph_geodesic_path(&self, i: usize, j: usize) -> Result<Vec<usize>> {
        self.check_node(i)?;
        self.check_node(j)?;
        let (dist, pred) = self.dijkstra(i, Some(j));
        if dist[j].is_none() {
            return Err(Error::Unreachable { from: i, to: j });
        }
        let mut path = vec![j];
        let mut cur = j;
        while cur != i {
            cur = pred[cur];
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    /// Sum of edge weights along `path` (exact in the graph's fixed-point units).
    pub fn path_weight(&self, path: &[usize]) -> Option<f64> {
        let mut total = 0u64;
        for w in path.windows(2) {
            let p = self.adjacency[w[0]].binary_search_by_key(&w[1], |&(n, _)| n).ok()?;
            total += self.adjacency[w[0]][p].1;
        }
        Some(from_ticks(total))
    }

    /// Component label per node; labels are numbered by smallest member.
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// One `i j weight` line per undirected edge, `i < j`, in index order.
    pub fn write_edge_list(&self, mut out: impl Write) -> Result<()> {
        for (i, list) in self.adjacency.iter().enumerate() {
            for &(j, w) in list.iter().filter(|(j, _)| *j > i) {
                writeln!(out, "{i} {j} {}", crate::geo::fmt_f64(from_ticks(w)))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::SpdMatrix;
    use crate::metrics::ConstantMetric;

    fn line(n: usize) -> Vec<DVector<f64>> {
        (0..n).map(|i| DVector::from_column_slice(&[i as f64, 0.0])).collect()
    }

    #[test]
    fn collinear_path_graph() {
        let g = build_knn_graph(&line(3), 1, None).unwrap();
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.weight(0, 1), Some(1.0));
        assert_eq!(g.weight(0, 2), None);
        assert_eq!(g.graph_distance(0, 2).unwrap(), Some(2.0));
        assert_eq!(g.graph_distance(1, 1).unwrap(), Some(0.0));
        assert_eq!(g.graph_geodesic_path(0, 2).unwrap(), vec![0, 1, 2]);
        assert_eq!(g.graph_geodesic_path(2, 2).unwrap(), vec![2]);
    }

    #[test]
    fn metric_weights_use_the_field() {
        let m = ConstantMetric::from_matrix(&SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap(), 0.0).unwrap();
        let g = build_knn_graph(&line(3), 1, Some(&m)).unwrap();
        assert_eq!(g.weight(1, 2), Some(2.0));
    }

    #[test]
    fn clusters_split_into_components() {
        let mut pts = line(4);
        pts.extend((0..4).map(|i| DVector::from_column_slice(&[100.0 + i as f64, 0.0])));
        let g = build_knn_graph(&pts, 2, None).unwrap();
        assert_eq!(g.n_components(), 2);
        assert_eq!(g.graph_distance(0, 5).unwrap(), None);
        assert!(matches!(g.graph_geodesic_path(0, 5), Err(Error::Unreachable { from: 0, to: 5 })));
    }

    #[test]
    fn k_out_of_range() {
        assert!(build_knn_graph(&line(3), 0, None).is_err());
        assert!(build_knn_graph(&line(3), 3, None).is_err());
    }

    #[test]
    fn mutual_is_a_subgraph_of_union() {
        let pts: Vec<_> = [0.0, 1.0, 1.5, 5.0].iter().map(|&x| DVector::from_column_slice(&[x])).collect();
        let u = build_knn_graph_with(&pts, 1, None, Symmetrization::Union).unwrap();
        let m = build_knn_graph_with(&pts, 1, None, Symmetrization::Mutual).unwrap();
        assert!(m.n_edges() < u.n_edges());
        assert_eq!(u.weight(3, 2), Some(3.5));
        assert_eq!(m.weight(3, 2), None);
    }

    #[test]
    fn edge_list_export() {
        let g = build_knn_graph(&line(3), 1, None).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(' ').collect()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[1][0], rows[1][1]), ("1", "2"));
        assert_eq!(rows[1][2].parse::<f64>().unwrap(), 1.0);
    }
}
