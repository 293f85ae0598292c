//! Skeleton-guided manifold tearing.
//!
//! A cut on skeleton edge `(u, v)` is the plane through
//! `q = c_u + t (c_v - c_u)` with normal along `c_v - c_u`, where `c_*` are
//! the node centroids. Graph edges whose endpoints lie on opposite sides of
//! the plane, both within a ball around `q`, are removed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{isomap_with_geodesics, Embedding};
use crate::error::{Error, Result};
use crate::geometry::{build_knn_graph, euclidean, Edge, NeighborhoodGraph, PointCloud};
use crate::persistence::persistent_betti;
use crate::quality::{report_from_parts, residual_variance, QualityReport, SharedDiagrams};
use crate::skeleton::Skeleton;

/// Points closer than this to the plane count as the positive side.
const PLANE_TOL: f64 = 1e-12;

/// Extent of the cut around the cut point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalityRadius {
    /// Farthest member of either node from the cut point.
    #[default]
    Auto,
    /// The plane cuts everywhere.
    Global,
    #[serde(untagged)]
    Value(f64),
}

impl FromStr for LocalityRadius {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(LocalityRadius::Auto),
            "global" => Ok(LocalityRadius::Global),
            other => match other.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(LocalityRadius::Value(v)),
                _ => Err(Error::param(
                    "radius",
                    format!("expected auto, global or a positive number, got {other:?}"),
                )),
            },
        }
    }
}

impl fmt::Display for LocalityRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalityRadius::Auto => f.write_str("auto"),
            LocalityRadius::Global => f.write_str("global"),
            LocalityRadius::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutSpec {
    pub skeleton_edge: (usize, usize),
    /// Position of the cut point along the centroid segment, in `[0, 1]`.
    pub t: f64,
    #[serde(default)]
    pub locality_radius: LocalityRadius,
}

impl CutSpec {
    pub fn midpoint(u: usize, v: usize) -> Self {
        Self {
            skeleton_edge: (u, v),
            t: 0.5,
            locality_radius: LocalityRadius::Auto,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TearResult {
    pub cut: CutSpec,
    #[serde(skip)]
    pub torn_graph: NeighborhoodGraph,
    pub removed_edges: Vec<Edge>,
    pub removed_count: usize,
    pub connected: bool,
    pub component_sizes: Vec<usize>,
    /// Radius actually used (infinite for a global cut).
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityReport>,
}

/// Removes the graph edges crossing the cut plane near the cut point.
pub fn tear_graph(cloud: &PointCloud, graph: &NeighborhoodGraph, skeleton: &Skeleton, cut: &CutSpec) -> Result<TearResult> {
    if graph.vertex_count() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} vertices, cloud has {} points",
            graph.vertex_count(),
            cloud.len()
        )));
    }
    if !(0.0..=1.0).contains(&cut.t) {
        return Err(Error::param("t", format!("must lie in [0, 1], got {}", cut.t)));
    }
    let (u, v) = cut.skeleton_edge;
    if u >= skeleton.nodes.len() || v >= skeleton.nodes.len() || !skeleton.has_edge(u, v) {
        return Err(Error::param("edge", format!("({u}, {v}) is not a skeleton edge")));
    }
    let (nu, nv) = (&skeleton.nodes[u], &skeleton.nodes[v]);
    if nu.centroid >= cloud.len() || nv.centroid >= cloud.len() {
        return Err(Error::DimensionMismatch("skeleton does not belong to this cloud".into()));
    }
    let (cu, cv) = (cloud.point(nu.centroid), cloud.point(nv.centroid));
    let length = euclidean(cu, cv);
    if length == 0.0 {
        return Err(Error::param("edge", format!("centroids of nodes {u} and {v} coincide")));
    }
    let normal: Vec<f64> = cu.iter().zip(cv).map(|(a, b)| (b - a) / length).collect();
    let q: Vec<f64> = cu.iter().zip(cv).map(|(a, b)| a + cut.t * (b - a)).collect();

    let radius = match cut.locality_radius {
        LocalityRadius::Global => f64::INFINITY,
        LocalityRadius::Value(r) if r > 0.0 => r,
        LocalityRadius::Value(r) => return Err(Error::param("radius", format!("must be positive, got {r}"))),
        LocalityRadius::Auto => nu
            .members
            .iter()
            .chain(&nv.members)
            .map(|&i| euclidean(cloud.point(i), &q))
            .fold(0.0, f64::max),
    };

    let positive = |i: usize| {
        let s: f64 = cloud.point(i).iter().zip(&q).zip(&normal).map(|((x, qq), nn)| (x - qq) * nn).sum();
        s >= -PLANE_TOL
    };
    let near = |i: usize| euclidean(cloud.point(i), &q) <= radius;

    let (removed, kept): (Vec<Edge>, Vec<Edge>) = graph
        .edges()
        .iter()
        .partition(|e| positive(e.i) != positive(e.j) && near(e.i) && near(e.j));
    let torn = NeighborhoodGraph::from_edges(graph.vertex_count(), graph.k(), kept)?;
    Ok(TearResult {
        cut: *cut,
        removed_count: removed.len(),
        removed_edges: removed,
        connected: torn.is_connected(),
        component_sizes: torn.component_sizes().to_vec(),
        torn_graph: torn,
        radius,
        embedding: None,
        quality: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TearOptions {
    pub d: usize,
    /// Persistence subsample size for the quality measures.
    pub subsample_size: usize,
    pub seed: u64,
    /// Neighbors added to `k` before tearing (0 keeps the graph as given).
    pub extra_k: usize,
}

impl Default for TearOptions {
    fn default() -> Self {
        Self {
            d: 2,
            subsample_size: 256,
            seed: 0,
            extra_k: 0,
        }
    }
}

fn working_graph(cloud: &PointCloud, graph: &NeighborhoodGraph, extra_k: usize) -> Result<Option<NeighborhoodGraph>> {
    if extra_k == 0 {
        return Ok(None);
    }
    if graph.k() == 0 {
        return Err(Error::param("extra_k", "graph was not built from k nearest neighbors"));
    }
    Ok(Some(build_knn_graph(cloud, graph.k() + extra_k)?))
}

fn embed_torn(result: &mut TearResult, shared: &SharedDiagrams, options: &TearOptions) -> Result<()> {
    if !result.connected {
        return Ok(());
    }
    let (embedding, dg) = isomap_with_geodesics(&result.torn_graph, options.d)?;
    let rv = residual_variance(&dg, &embedding.distances())?;
    let after = shared.embedding_diagrams(&embedding.coords)?;
    result.quality = Some(report_from_parts(rv, dg.kind(), shared, &after, None, &embedding)?);
    result.embedding = Some(embedding);
    Ok(())
}

/// Tears, then embeds the torn graph with Isomap and scores it when it is
/// still connected.
pub fn tear_and_embed(cloud: &PointCloud, graph: &NeighborhoodGraph, skeleton: &Skeleton, cut: &CutSpec, options: &TearOptions) -> Result<TearResult> {
    let widened = working_graph(cloud, graph, options.extra_k)?;
    let mut result = tear_graph(cloud, widened.as_ref().unwrap_or(graph), skeleton, cut)?;
    let shared = SharedDiagrams::new(cloud, options.subsample_size, options.seed)?;
    embed_torn(&mut result, &shared, options)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Candidates {
    /// One midpoint cut per skeleton edge.
    AllEdges,
    List(Vec<CutSpec>),
}

/// One ranked candidate. Invalid (disconnecting) cuts carry no scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCut {
    pub cut: CutSpec,
    pub valid: bool,
    pub pb1: Option<usize>,
    pub wd1: Option<f64>,
    pub rv: Option<f64>,
    pub removed_count: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub component_sizes: Vec<usize>,
}

/// Scores each candidate cut by the persistent first Betti number of the
/// torn Isomap embedding (higher is better), then its Wasserstein distance
/// to the input (lower is better), then candidate order. Cuts that
/// disconnect the graph are listed last, marked invalid.
pub fn rank_cuts(
    cloud: &PointCloud,
    graph: &NeighborhoodGraph,
    skeleton: &Skeleton,
    candidates: &Candidates,
    options: &TearOptions,
) -> Result<Vec<RankedCut>> {
    graph.require_connected()?;
    let cuts: Vec<CutSpec> = match candidates {
        Candidates::AllEdges => skeleton.edges.iter().map(|&(u, v, _)| CutSpec::midpoint(u, v)).collect(),
        Candidates::List(list) => list.clone(),
    };
    let widened = working_graph(cloud, graph, options.extra_k)?;
    let graph = widened.as_ref().unwrap_or(graph);
    let shared = SharedDiagrams::new(cloud, options.subsample_size, options.seed)?;

    let mut scored: Vec<(usize, RankedCut)> = cuts
        .par_iter()
        .enumerate()
        .map(|(index, cut)| -> Result<(usize, RankedCut)> {
            let mut result = tear_graph(cloud, graph, skeleton, cut)?;
            embed_torn(&mut result, &shared, options)?;
            let q = result.quality.as_ref();
            Ok((
                index,
                RankedCut {
                    cut: *cut,
                    valid: result.connected,
                    pb1: q.map(|q| q.pb1_after),
                    wd1: q.map(|q| q.wd1),
                    rv: q.map(|q| q.rv),
                    removed_count: result.removed_count,
                    component_sizes: if result.connected { Vec::new() } else { result.component_sizes },
                },
            ))
        })
        .collect::<Result<_>>()?;

    scored.sort_by(|(ia, a), (ib, b)| {
        b.valid
            .cmp(&a.valid)
            .then(b.pb1.cmp(&a.pb1))
            .then(a.wd1.unwrap_or(f64::INFINITY).total_cmp(&b.wd1.unwrap_or(f64::INFINITY)))
            .then(ia.cmp(ib))
    });
    Ok(scored.into_iter().map(|(_, r)| r).collect())
}

/// PB_1 of an untorn Isomap embedding on the same subsample, for comparison
/// with ranked cuts.
pub fn baseline_pb1(cloud: &PointCloud, graph: &NeighborhoodGraph, options: &TearOptions) -> Result<usize> {
    let (embedding, _) = isomap_with_geodesics(graph, options.d)?;
    let shared = SharedDiagrams::new(cloud, options.subsample_size, options.seed)?;
    Ok(persistent_betti(&shared.embedding_diagrams(&embedding.coords)?[1], None).count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{CoverSpec, FilterKind, FilterValues, SkeletonNode};

    /// Two nodes on a line of points 0..6, centroids 1 and 4.
    fn line_setup() -> (PointCloud, NeighborhoodGraph, Skeleton) {
        let cloud = PointCloud::from_rows(&(0..6).map(|i| [i as f64, 0.0]).collect::<Vec<_>>()).unwrap();
        let graph = build_knn_graph(&cloud, 1).unwrap();
        let skeleton = Skeleton {
            nodes: vec![
                SkeletonNode { id: 0, members: vec![0, 1, 2, 3], centroid: 1, interval: 0 },
                SkeletonNode { id: 1, members: vec![3, 4, 5], centroid: 4, interval: 1 },
            ],
            edges: vec![(0, 1, 1)],
            filter: FilterValues { kind: FilterKind::Custom, base_point: None, values: (0..6).map(f64::from).collect() },
            cover: CoverSpec { n: 2, p: 0.3, intervals: vec![(0.0, 3.5), (2.5, 5.0)] },
        };
        (cloud, graph, skeleton)
    }

    #[test]
    fn cut_removes_crossing_edge() {
        let (cloud, graph, skel) = line_setup();
        // q = 2.5 on the x axis: only edge (2, 3) crosses.
        let r = tear_graph(&cloud, &graph, &skel, &CutSpec { skeleton_edge: (0, 1), t: 0.5, locality_radius: LocalityRadius::Auto }).unwrap();
        assert_eq!(r.removed_edges.iter().map(|e| (e.i, e.j)).collect::<Vec<_>>(), vec![(2, 3)]);
        assert!(!r.connected);
        assert_eq!(r.component_sizes, vec![3, 3]);
    }

    #[test]
    fn point_on_plane_is_positive() {
        let (cloud, graph, skel) = line_setup();
        // q = 1 + 3 * (2/3) = 3 exactly: point 3 sits on the plane, so edge (2, 3) crosses.
        let cut = CutSpec { skeleton_edge: (0, 1), t: 2.0 / 3.0, locality_radius: LocalityRadius::Global };
        let r = tear_graph(&cloud, &graph, &skel, &cut).unwrap();
        assert_eq!(r.removed_edges.iter().map(|e| (e.i, e.j)).collect::<Vec<_>>(), vec![(2, 3)]);
    }

    #[test]
    fn small_radius_removes_nothing() {
        let (cloud, graph, skel) = line_setup();
        let cut = CutSpec { skeleton_edge: (0, 1), t: 0.5, locality_radius: LocalityRadius::Value(0.4) };
        let r = tear_graph(&cloud, &graph, &skel, &cut).unwrap();
        assert_eq!(r.removed_count, 0);
        assert_eq!(r.torn_graph.edges(), graph.edges());
    }

    #[test]
    fn invalid_cuts_rejected() {
        let (cloud, graph, skel) = line_setup();
        assert!(tear_graph(&cloud, &graph, &skel, &CutSpec { skeleton_edge: (0, 1), t: 1.5, locality_radius: LocalityRadius::Auto }).is_err());
        assert!(tear_graph(&cloud, &graph, &skel, &CutSpec::midpoint(0, 0)).is_err());
        let mut same = skel.clone();
        same.nodes[1].centroid = 1;
        assert!(tear_graph(&cloud, &graph, &same, &CutSpec::midpoint(0, 1)).is_err());
    }

    #[test]
    fn disconnecting_candidate_is_flagged() {
        let (cloud, graph, skel) = line_setup();
        let opts = TearOptions { d: 1, subsample_size: 6, ..Default::default() };
        let ranked = rank_cuts(&cloud, &graph, &skel, &Candidates::AllEdges, &opts).unwrap();
        assert_eq!(ranked.len(), 1);
        assert!(!ranked[0].valid);
        assert_eq!(ranked[0].pb1, None);
        assert_eq!(ranked[0].component_sizes, vec![3, 3]);
    }

    #[test]
    fn radius_parsing() {
        assert_eq!("auto".parse::<LocalityRadius>().unwrap(), LocalityRadius::Auto);
        assert_eq!("global".parse::<LocalityRadius>().unwrap(), LocalityRadius::Global);
        assert_eq!("0.5".parse::<LocalityRadius>().unwrap(), LocalityRadius::Value(0.5));
        assert!("0".parse::<LocalityRadius>().is_err());
    }
}
