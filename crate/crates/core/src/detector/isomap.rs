//! One-dimensional Isomap ordering of an unordered point cloud.
//!
//! kNN graph → all-pairs graph geodesics → classical MDS to one dimension
//! (top eigenvector of the double-centered squared-distance matrix, found
//! by power iteration) → sort by the embedding coordinate.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nms::lexicographic;
use crate::exec::Execution;
use crate::geometry::{PointCloud, Polyline, Vec3};
use crate::{invalid, Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-9;
pub const POWER_MAX_ITERATIONS: usize = 10_000;
const START_VECTOR_SEED: u64 = 0x15_0a_a9;

#[derive(Clone, Debug, PartialEq)]
pub struct OrderedCurve {
    pub curve: Polyline,
    /// Input indices in output order.
    pub order: Vec<usize>,
    /// Embedding coordinate of each ordered point.
    pub embedding: Vec<f64>,
    /// The kNN graph was disconnected and had components bridged.
    pub bridged: bool,
    pub eigenvalue: f64,
}

/// Symmetric adjacency list with Euclidean weights.
pub(crate) type Graph = Vec<Vec<(usize, f64)>>;

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

fn add_edge(graph: &mut Graph, i: usize, j: usize, w: f64) {
    if !graph[i].iter().any(|&(n, _)| n == j) {
        graph[i].push((j, w));
        graph[j].push((i, w));
    }
}

/// Symmetrized k-nearest-neighbour graph; ties in distance go to the lower index.
pub(crate) fn knn_graph(points: &[Vec3], k: usize, exec: Execution) -> Graph {
    let n = points.len();
    let k = k.min(n.saturating_sub(1));
    let neighbours = exec.map(n, |i| {
        let mut cand: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| ((points[i] - points[j]).norm(), j)).collect();
        if k < cand.len() {
            cand.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
        }
        cand
    });
    let mut graph: Graph = vec![Vec::new(); n];
    for (i, cand) in neighbours.into_iter().enumerate() {
        for (_, j) in cand {
            let (a, b) = (i.min(j), i.max(j));
            add_edge(&mut graph, a, b, (points[a] - points[b]).norm());
        }
    }
    for adj in &mut graph {
        adj.sort_by_key(|&(j, _)| j);
    }
    graph
}

/// Joins disconnected components with their shortest inter-component edges
/// (Kruskal over components). Returns whether any edge was added.
pub(crate) fn bridge_components(points: &[Vec3], graph: &mut Graph) -> bool {
    let n = points.len();
    let mut sets = DisjointSet::new(n);
    for (i, adj) in graph.iter().enumerate() {
        for &(j, _) in adj {
            sets.union(i, j);
        }
    }
    let comp: Vec<usize> = (0..n).map(|i| sets.find(i)).collect();
    let mut roots = comp.clone();
    roots.sort_unstable();
    roots.dedup();
    if roots.len() <= 1 {
        return false;
    }

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if comp[i] != comp[j] {
                candidates.push(((points[i] - points[j]).norm(), i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut components = DisjointSet::new(n);
    let mut remaining = roots.len() - 1;
    for (w, i, j) in candidates {
        if remaining == 0 {
            break;
        }
        if components.union(comp[i], comp[j]) {
            add_edge(graph, i, j, w);
            remaining -= 1;
        }
    }
    for adj in graph.iter_mut() {
        adj.sort_by_key(|&(j, _)| j);
    }
    true
}

fn dijkstra(graph: &Graph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &graph[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    dist
}

/// All-pairs shortest-path lengths, symmetrized as `(d_ij + d_ji) / 2`.
#[allow(clippy::needless_range_loop)]
pub(crate) fn geodesic_distances(graph: &Graph, exec: Execution) -> Vec<Vec<f64>> {
    let n = graph.len();
    let mut d = exec.map(n, |s| dijkstra(graph, s));
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (d[i][j] + d[j][i]);
            d[i][j] = m;
            d[j][i] = m;
        }
    }
    d
}

/// `B = −½ · J · D² · J` for a symmetric distance matrix.
pub(crate) fn double_center(dist: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = dist.len();
    let sq: Vec<Vec<f64>> = dist.iter().map(|row| row.iter().map(|d| d * d).collect()).collect();
    let row_mean: Vec<f64> = sq.iter().map(|row| row.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|i| (0..n).map(|j| -0.5 * (sq[i][j] - row_mean[i] - row_mean[j] + grand)).collect())
        .collect()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn power_iteration_shifted(b: &[Vec<f64>], shift: f64, exec: Execution) -> Result<(f64, Vec<f64>)> {
    let n = b.len();
    let mut rng = ChaCha8Rng::seed_from_u64(START_VECTOR_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    remove_mean(&mut v);
    if normalize(&mut v) == 0.0 {
        return Err(invalid("degenerate start vector"));
    }
    for _ in 0..POWER_MAX_ITERATIONS {
        let mut w = exec.map(n, |i| {
            b[i].iter().zip(&v).map(|(bij, vj)| bij * vj).sum::<f64>() + shift * v[i]
        });
        remove_mean(&mut w);
        let lambda = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        if normalize(&mut w) == 0.0 {
            // Constant-only spectrum: every point at the same geodesic position.
            return Ok((0.0, v));
        }
        if w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        let change = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = w;
        if change < POWER_TOLERANCE {
            return Ok((lambda - shift, v));
        }
    }
    Err(Error::NotConverged { iterations: POWER_MAX_ITERATIONS })
}

/// Top (largest algebraic) eigenpair of the symmetric, double-centered `b`.
///
/// Plain power iteration finds the eigenvalue of largest magnitude; if that
/// one is negative the matrix is shifted by its magnitude and iterated again.
pub fn top_eigenvector(b: &[Vec<f64>], exec: Execution) -> Result<(f64, Vec<f64>)> {
    let (lambda, v) = power_iteration_shifted(b, 0.0, exec)?;
    if lambda >= 0.0 {
        return Ok((lambda, v));
    }
    power_iteration_shifted(b, -lambda, exec)
}

pub fn order_points_isomap(cloud: &PointCloud, k: usize) -> Result<OrderedCurve> {
    order_points_isomap_with(cloud, k, Execution::default())
}

pub fn order_points_isomap_with(cloud: &PointCloud, k: usize, exec: Execution) -> Result<OrderedCurve> {
    if k < 2 {
        return Err(invalid(format!("isomap neighbourhood must be at least 2, got {k}")));
    }
    if cloud.len() < 2 {
        return Err(Error::NoCurveDetected(format!(
            "ordering needs at least 2 points, got {}",
            cloud.len()
        )));
    }
    // Work in lexicographic order so the result cannot depend on input order.
    let src = cloud.points();
    let conf = cloud.confidence();
    let mut canon: Vec<usize> = (0..cloud.len()).collect();
    canon.sort_by(|&i, &j| {
        lexicographic(&src[i], &src[j]).then(conf[i].total_cmp(&conf[j])).then(i.cmp(&j))
    });
    let points: Vec<Vec3> = canon.iter().map(|&i| src[i]).collect();

    let mut graph = knn_graph(&points, k, exec);
    let bridged = bridge_components(&points, &mut graph);
    if bridged {
        log::warn!("kNN graph (k = {k}) is disconnected; components bridged by shortest edges");
    }
    let geodesic = geodesic_distances(&graph, exec);
    let b = double_center(&geodesic);
    let (eigenvalue, coords) = top_eigenvector(&b, exec)?;

    let mut ranked: Vec<usize> = (0..points.len()).collect();
    ranked.sort_by(|&i, &j| coords[i].total_cmp(&coords[j]).then(i.cmp(&j)));
    let first = &points[ranked[0]];
    let last = &points[ranked[ranked.len() - 1]];
    if lexicographic(first, last) == Ordering::Greater {
        ranked.reverse();
    }

    let curve = Polyline::from_points_dedup(ranked.iter().map(|&i| points[i])).map_err(|_| {
        Error::NoCurveDetected("ordered points collapse to fewer than 2 distinct positions".into())
    })?;
    Ok(OrderedCurve {
        curve,
        order: ranked.iter().map(|&i| canon[i]).collect(),
        embedding: ranked.iter().map(|&i| coords[i]).collect(),
        bridged,
        eigenvalue,
    })
}
