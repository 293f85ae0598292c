//! Mapper approximation of the Reeb graph and homological landmarks.
//!
//! A filter function on the points (geodesic distance to a base point) is
//! covered by overlapping intervals; each interval's preimage is clustered
//! with DBSCAN, every cluster becomes a node, and nodes sharing points are
//! joined by an edge. Node centroids are the landmarks.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{l_isomap_on_graph, Embedding, EmbeddingMethod};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_distances, squared_euclidean, NeighborhoodGraph, PointCloud, UnionFind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// Geodesic distance to a base point.
    Dtb,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseStrategy {
    /// Farthest point from `a`, where `a` is the farthest point from the
    /// barycenter point (both geodesic).
    #[default]
    Extreme,
    /// The point nearest the coordinate mean.
    Barycenter,
    Explicit(usize),
}

impl fmt::Display for BaseStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseStrategy::Extreme => f.write_str("extreme"),
            BaseStrategy::Barycenter => f.write_str("barycenter"),
            BaseStrategy::Explicit(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for BaseStrategy {
    type Err = Error;

    /// `extreme`, `barycenter`, or a point index.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extreme" => Ok(BaseStrategy::Extreme),
            "barycenter" => Ok(BaseStrategy::Barycenter),
            other => other
                .parse()
                .map(BaseStrategy::Explicit)
                .map_err(|_| Error::param("base", format!("expected extreme, barycenter or an index, got {other:?}"))),
        }
    }
}

/// One real value per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterValues {
    pub kind: FilterKind,
    #[serde(rename = "base")]
    pub base_point: Option<usize>,
    pub values: Vec<f64>,
}

impl FilterValues {
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "filter values must be finite and nonempty"));
        }
        Ok(Self {
            kind: FilterKind::Custom,
            base_point: None,
            values,
        })
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Distance-to-base-point filter.
pub fn compute_filter(cloud: &PointCloud, graph: &NeighborhoodGraph, base: BaseStrategy) -> Result<FilterValues> {
    if graph.vertex_count() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} vertices, cloud has {} points",
            graph.vertex_count(),
            cloud.len()
        )));
    }
    graph.require_connected()?;
    let from = |s: usize| -> Result<Vec<f64>> { Ok(geodesic_distances(graph, Some(&[s]))?.row(0).to_vec()) };
    let base = match base {
        BaseStrategy::Explicit(i) if i >= cloud.len() => {
            return Err(Error::param("base", format!("base point {i} out of range")))
        }
        BaseStrategy::Explicit(i) => i,
        BaseStrategy::Barycenter => cloud.nearest_to(&cloud.mean()),
        BaseStrategy::Extreme => {
            let start = cloud.nearest_to(&cloud.mean());
            let a = argmax(&from(start)?);
            argmax(&from(a)?)
        }
    };
    Ok(FilterValues {
        kind: FilterKind::Dtb,
        base_point: Some(base),
        values: from(base)?,
    })
}

/// Overlapping intervals covering the range of a filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub n: usize,
    pub p: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl CoverSpec {
    /// Membership is half-open, `[a, b)`, except for the last interval which
    /// is closed.
    pub fn contains(&self, interval: usize, x: f64) -> bool {
        let (a, b) = self.intervals[interval];
        a <= x && (x < b || (interval + 1 == self.intervals.len() && x <= b))
    }
}

/// `n` equal intervals with overlap fraction `p` between neighbors:
/// length `L = range / (n - (n - 1) p)`, step `L (1 - p)`.
pub fn build_cover(f: &FilterValues, n: usize, p: f64) -> Result<CoverSpec> {
    if n == 0 {
        return Err(Error::param("n", "need at least one interval"));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param("p", format!("overlap must lie in [0, 1), got {p}")));
    }
    let lo = f.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::param("f", "filter values must be finite and nonempty"));
    }
    let range = hi - lo;
    if range == 0.0 {
        return Ok(CoverSpec {
            n: 1,
            p,
            intervals: vec![(lo, hi)],
        });
    }
    let len = range / (n as f64 - (n as f64 - 1.0) * p);
    let step = len * (1.0 - p);
    let intervals = (0..n)
        .map(|i| {
            let a = lo + i as f64 * step;
            let b = if i + 1 == n { hi } else { a + len };
            (a, b)
        })
        .collect();
    Ok(CoverSpec { n, p, intervals })
}

/// DBSCAN radius: a fixed value or the mean distance to the `minpts`-th
/// nearest neighbor within each interval.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eps {
    #[default]
    Auto,
    #[serde(untagged)]
    Value(f64),
}

impl FromStr for Eps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Eps::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Eps::Value(v)),
            _ => Err(Error::param("eps", format!("expected a positive number or auto, got {s:?}"))),
        }
    }
}

impl fmt::Display for Eps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eps::Auto => f.write_str("auto"),
            Eps::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonNode {
    pub id: usize,
    pub members: Vec<usize>,
    pub centroid: usize,
    pub interval: usize,
}

/// One-skeleton of the nerve of the pulled-back cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub nodes: Vec<SkeletonNode>,
    /// `(u, v, shared)` with `u < v` and `shared` the number of common points.
    pub edges: Vec<(usize, usize, usize)>,
    pub filter: FilterValues,
    pub cover: CoverSpec,
}

impl Skeleton {
    /// `|E| - |V| + components`, the first Betti number of the graph.
    pub fn cycle_rank(&self) -> usize {
        let mut uf = UnionFind::new(self.nodes.len());
        let mut merges = 0;
        for &(u, v, _) in &self.edges {
            if uf.union(u, v) {
                merges += 1;
            }
        }
        let components = self.nodes.len() - merges;
        self.edges.len() + components - self.nodes.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = (u.min(v), u.max(v));
        self.edges.iter().any(|&(x, y, _)| x == a && y == b)
    }
}

/// Cluster labels (`None` = noise) for `points`, visited in the given order.
fn dbscan(cloud: &PointCloud, points: &[usize], eps: f64, minpts: usize) -> Vec<Option<usize>> {
    let m = points.len();
    let eps2 = eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..m)
        .map(|a| {
            (0..m)
                .filter(|&b| squared_euclidean(cloud.point(points[a]), cloud.point(points[b])) <= eps2)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|n| n.len() >= minpts).collect();
    let mut label: Vec<Option<usize>> = vec![None; m];
    let mut clusters = 0;
    for start in 0..m {
        if label[start].is_some() || !core[start] {
            continue;
        }
        let id = clusters;
        clusters += 1;
        label[start] = Some(id);
        let mut stack = vec![start];
        let mut head = 0;
        while head < stack.len() {
            let a = stack[head];
            head += 1;
            if !core[a] {
                continue;
            }
            for &b in &neighbors[a] {
                if label[b].is_none() {
                    label[b] = Some(id);
                    stack.push(b);
                }
            }
        }
    }
    label
}

fn auto_eps(cloud: &PointCloud, points: &[usize], minpts: usize) -> f64 {
    let m = points.len();
    if m < 2 {
        return 0.0;
    }
    let kth = minpts.min(m - 1);
    let total: f64 = points
        .iter()
        .map(|&a| {
            let mut d: Vec<f64> = points
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| squared_euclidean(cloud.point(a), cloud.point(b)))
                .collect();
            let (_, kd, _) = d.select_nth_unstable_by(kth - 1, f64::total_cmp);
            kd.sqrt()
        })
        .sum();
    total / m as f64
}

fn centroid(cloud: &PointCloud, members: &[usize]) -> usize {
    let dim = cloud.dim();
    let mut mean = vec![0.0; dim];
    for &i in members {
        mean.iter_mut().zip(cloud.point(i)).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= members.len() as f64);
    let mut best = (f64::INFINITY, members[0]);
    for &i in members {
        let d = squared_euclidean(cloud.point(i), &mean);
        if d < best.0 || (d == best.0 && i < best.1) {
            best = (d, i);
        }
    }
    best.1
}

/// Mapper graph of `cloud` for the given filter and cover.
///
/// Each interval's points are clustered by DBSCAN on ambient Euclidean
/// distances. Noise points become singleton nodes so every point keeps a
/// node.
pub fn mapper_skeleton(cloud: &PointCloud, f: &FilterValues, cover: &CoverSpec, eps: Eps, minpts: usize) -> Result<Skeleton> {
    if cloud.is_empty() {
        return Err(Error::param("cloud", "empty point cloud"));
    }
    if f.values.len() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "filter has {} values, cloud has {} points",
            f.values.len(),
            cloud.len()
        )));
    }
    if minpts == 0 {
        return Err(Error::param("minpts", "must be at least 1"));
    }
    if let Eps::Value(v) = eps {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param("eps", format!("must be positive, got {v}")));
        }
    }

    let per_interval: Vec<Vec<Vec<usize>>> = (0..cover.intervals.len())
        .into_par_iter()
        .map(|iv| {
            let points: Vec<usize> = (0..cloud.len()).filter(|&i| cover.contains(iv, f.values[i])).collect();
            if points.is_empty() {
                return Vec::new();
            }
            let radius = match eps {
                Eps::Auto => auto_eps(cloud, &points, minpts),
                Eps::Value(v) => v,
            };
            let labels = dbscan(cloud, &points, radius, minpts);
            let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
            let mut groups = vec![Vec::new(); count];
            let mut noise = Vec::new();
            for (a, l) in labels.iter().enumerate() {
                match l {
                    Some(c) => groups[*c].push(points[a]),
                    None => noise.push(vec![points[a]]),
                }
            }
            groups.extend(noise);
            groups
        })
        .collect();

    let mut nodes = Vec::new();
    for (interval, groups) in per_interval.into_iter().enumerate() {
        for members in groups {
            nodes.push(SkeletonNode {
                id: nodes.len(),
                centroid: centroid(cloud, &members),
                members,
                interval,
            });
        }
    }

    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); cloud.len()];
    for node in &nodes {
        for &i in &node.members {
            owners[i].push(node.id);
        }
    }
    let mut shared = std::collections::BTreeMap::new();
    for list in &owners {
        for (x, &u) in list.iter().enumerate() {
            for &v in &list[x + 1..] {
                *shared.entry((u.min(v), u.max(v))).or_insert(0usize) += 1;
            }
        }
    }
    let edges = shared.into_iter().map(|((u, v), s)| (u, v, s)).collect();

    Ok(Skeleton {
        nodes,
        edges,
        filter: f.clone(),
        cover: cover.clone(),
    })
}

/// Node centroids, deduplicated and sorted.
pub fn extract_landmarks(skeleton: &Skeleton) -> Vec<usize> {
    let mut l: Vec<usize> = skeleton.nodes.iter().map(|n| n.centroid).collect();
    l.sort_unstable();
    l.dedup();
    l
}

/// Parameters of the whole filter, cover and clustering pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkeletonParams {
    pub base: BaseStrategy,
    pub n: usize,
    pub p: f64,
    pub eps: Eps,
    pub minpts: usize,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            base: BaseStrategy::Extreme,
            n: 10,
            p: 0.3,
            eps: Eps::Auto,
            minpts: 5,
        }
    }
}

/// Filter, cover and mapper in one call.
pub fn build_skeleton(cloud: &PointCloud, graph: &NeighborhoodGraph, params: &SkeletonParams) -> Result<Skeleton> {
    let f = compute_filter(cloud, graph, params.base)?;
    let cover = build_cover(&f, params.n, params.p)?;
    mapper_skeleton(cloud, &f, &cover, params.eps, params.minpts)
}

/// L-Isomap with the skeleton's node centroids as landmarks.
pub fn homological_l_isomap(graph: &NeighborhoodGraph, skeleton: &Skeleton, d: usize, pca_normalize: bool) -> Result<Embedding> {
    let landmarks = extract_landmarks(skeleton);
    let mut e = l_isomap_on_graph(graph, &landmarks, d, pca_normalize)?;
    e.method = EmbeddingMethod::LIsomapHomology;
    Ok(e)
}
