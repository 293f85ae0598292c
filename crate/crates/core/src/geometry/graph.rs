use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DistanceKind, DistanceMatrix, PointCloud};
use crate::error::{Error, Result};

/// Undirected weighted edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Symmetrized k-nearest-neighbor graph.
#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    vertex_count: usize,
    k: usize,
    edges: Vec<Edge>,
    // CSR adjacency
    offsets: Vec<usize>,
    targets: Vec<(usize, f64)>,
    component_of: Vec<usize>,
    component_sizes: Vec<usize>,
}

impl NeighborhoodGraph {
    /// Builds a graph from an explicit edge list. Edges are normalized to
    /// `i < j` and sorted; self-loops, duplicates and bad weights are rejected.
    pub fn from_edges(vertex_count: usize, k: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut list: Vec<Edge> = Vec::new();
        for e in edges {
            let (i, j) = if e.i < e.j { (e.i, e.j) } else { (e.j, e.i) };
            if i == j {
                return Err(Error::param("edges", format!("self-loop at vertex {i}")));
            }
            if j >= vertex_count {
                return Err(Error::param("edges", format!("vertex {j} out of range")));
            }
            if !(e.w.is_finite() && e.w > 0.0) {
                return Err(Error::param(
                    "edges",
                    format!("edge ({i}, {j}) has invalid weight {}", e.w),
                ));
            }
            list.push(Edge { i, j, w: e.w });
        }
        list.sort_by_key(|e| (e.i, e.j));
        if let Some(w) = list.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::param(
                "edges",
                format!("duplicate edge ({}, {})", w[0].i, w[0].j),
            ));
        }
        Ok(Self::assemble(vertex_count, k, list))
    }

    fn assemble(vertex_count: usize, k: usize, edges: Vec<Edge>) -> Self {
        let mut degree = vec![0usize; vertex_count];
        for e in &edges {
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        let mut offsets = vec![0usize; vertex_count + 1];
        for v in 0..vertex_count {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![(0usize, 0.0f64); offsets[vertex_count]];
        for e in &edges {
            targets[fill[e.i]] = (e.j, e.w);
            fill[e.i] += 1;
            targets[fill[e.j]] = (e.i, e.w);
            fill[e.j] += 1;
        }

        let mut uf = UnionFind::new(vertex_count);
        for e in &edges {
            uf.union(e.i, e.j);
        }
        // Components are numbered by their smallest vertex.
        let mut label = vec![usize::MAX; vertex_count];
        let mut component_of = vec![0usize; vertex_count];
        let mut component_sizes = Vec::new();
        for v in 0..vertex_count {
            let root = uf.find(v);
            if label[root] == usize::MAX {
                label[root] = component_sizes.len();
                component_sizes.push(0);
            }
            component_of[v] = label[root];
            component_sizes[label[root]] += 1;
        }

        Self {
            vertex_count,
            k,
            edges,
            offsets,
            targets,
            component_of,
            component_sizes,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Neighbor parameter the graph was built with (0 for hand-built graphs).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn is_connected(&self) -> bool {
        self.component_sizes.len() <= 1
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.component_sizes
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.component_of[v]
    }

    /// Errors with the component sizes when the graph is disconnected.
    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected {
                component_sizes: self.component_sizes.clone(),
            })
        }
    }

    /// Shortest-path lengths from `source`; unreachable vertices get `INFINITY`.
    pub(crate) fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.vertex_count];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(State { cost: 0.0, vertex: source });
        while let Some(State { cost, vertex }) = heap.pop() {
            if cost > dist[vertex] {
                continue;
            }
            for &(next, w) in self.neighbors(vertex) {
                let c = cost + w;
                if c < dist[next] {
                    dist[next] = c;
                    heap.push(State { cost: c, vertex: next });
                }
            }
        }
        dist
    }
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    cost: f64,
    vertex: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Symmetrized kNN graph: `(i, j)` is an edge when either point is among the
/// other's `k` nearest neighbors. Ties in distance go to the lower index.
pub fn build_knn_graph(cloud: &PointCloud, k: usize) -> Result<NeighborhoodGraph> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::param(
            "k",
            format!("need 1 <= k < N, got k = {k} with N = {n}"),
        ));
    }
    let neighbor_lists: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (cloud.distance(i, j), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
            cand.into_iter().map(|(d, j)| (j, d)).collect()
        })
        .collect();

    let mut edges = Vec::with_capacity(n * k);
    for (i, list) in neighbor_lists.iter().enumerate() {
        for &(j, w) in list {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            edges.push(Edge { i: a, j: b, w });
        }
    }
    edges.sort_by_key(|e| (e.i, e.j));
    edges.dedup_by(|a, b| (a.i, a.j) == (b.i, b.j));
    if let Some(e) = edges.iter().find(|e| e.w <= 0.0) {
        return Err(Error::param(
            "cloud",
            format!("points {} and {} coincide", e.i, e.j),
        ));
    }
    Ok(NeighborhoodGraph::assemble(n, k, edges))
}

/// Shortest-path distances from each source (all vertices when `None`) to
/// every vertex. Rows follow the order of `sources`.
pub fn geodesic_distances(graph: &NeighborhoodGraph, sources: Option<&[usize]>) -> Result<DistanceMatrix> {
    let n = graph.vertex_count();
    let all: Vec<usize>;
    let sources = match sources {
        Some(s) => s,
        None => {
            all = (0..n).collect();
            &all
        }
    };
    if let Some(&bad) = sources.iter().find(|&&s| s >= n) {
        return Err(Error::param("sources", format!("source {bad} out of range")));
    }
    let rows: Vec<Vec<f64>> = sources.par_iter().map(|&s| graph.dijkstra(s)).collect();

    let mut values = Vec::with_capacity(sources.len() * n);
    let mut mask: Option<Vec<bool>> = None;
    if !graph.is_connected() {
        mask = Some(Vec::with_capacity(sources.len() * n));
    }
    for row in rows {
        for d in row {
            let reachable = d.is_finite();
            values.push(if reachable { d } else { 0.0 });
            if let Some(m) = mask.as_mut() {
                m.push(!reachable);
            }
        }
    }
    let mask = mask.filter(|m| m.iter().any(|&u| u));
    Ok(DistanceMatrix::from_parts(
        sources.len(),
        n,
        values,
        DistanceKind::Geodesic,
        mask,
    ))
}
