//! Vietoris–Rips persistence over Z/2.
//!
//! Dimension 0 comes from a union-find pass over the edges in filtration
//! order. Dimension 1 reduces the triangle boundary matrix in its
//! anti-transposed (coboundary) form: edge columns are processed from the
//! last edge of the filtration to the first, and the pivot of a column is
//! its earliest triangle. Edges that merged two components in dimension 0
//! can never carry a dimension-1 class, so their columns are cleared up
//! front. Columns are never stored; each reduced column is kept as the list
//! of edges it is a sum of and its triangles are regenerated on demand.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use super::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::geometry::UnionFind;
use crate::geometry::DistanceMatrix;

/// Truncation of the filtration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScaleCap {
    /// `min_i max_j d(i, j)`. Beyond this radius the complex is a cone, so
    /// truncating there does not change the diagram.
    #[default]
    Enclosing,
    #[serde(untagged)]
    Value(f64),
}

/// `min_i max_j d(i, j)`, infinite when every row has an unreachable entry.
pub fn enclosing_radius(dist: &DistanceMatrix) -> f64 {
    (0..dist.rows())
        .map(|i| {
            (0..dist.cols())
                .map(|j| dist.get(i, j).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

const SYMMETRY_TOL: f64 = 1e-9;

/// Symmetrized upper-triangle view of the input. Unreachable entries are
/// stored as infinity and never enter the filtration.
struct Distances {
    n: usize,
    d: Vec<f64>,
}

impl Distances {
    fn from_matrix(dist: &DistanceMatrix) -> Self {
        let n = dist.rows();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = dist.get(i, j).unwrap_or(f64::INFINITY);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

pub(crate) fn validate(dist: &DistanceMatrix) -> Result<()> {
    if dist.rows() == 0 {
        return Err(Error::param("dist", "need at least one point"));
    }
    let scale = dist.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    dist.validate_square(SYMMETRY_TOL * scale)
}

/// Persistence diagrams of the Vietoris–Rips filtration for dimensions
/// `0..=max_dim` (`max_dim <= 1`). Simplices whose filtration value exceeds
/// the cap are left out; zero-persistence pairs are dropped.
pub fn vr_persistence(dist: &DistanceMatrix, max_dim: usize, cap: ScaleCap) -> Result<Vec<PersistenceDiagram>> {
    if max_dim > 1 {
        return Err(Error::param("max_dim", "only dimensions 0 and 1 are supported"));
    }
    validate(dist)?;
    let cap = match cap {
        ScaleCap::Enclosing => enclosing_radius(dist),
        ScaleCap::Value(v) if v > 0.0 && !v.is_nan() => v,
        ScaleCap::Value(v) => {
            return Err(Error::param("scale_cap", format!("must be positive, got {v}")))
        }
    };
    // At or beyond the enclosing radius the complex is a cone, so the
    // diagram is the untruncated one and is recorded with an infinite cap.
    let recorded_cap = if cap >= enclosing_radius(dist) { f64::INFINITY } else { cap };
    let dm = Distances::from_matrix(dist);
    let n = dm.n;

    // Edges in filtration order: (diameter, lexicographic index).
    let mut edges: Vec<FilteredEdge> = Vec::new();
    for j in 1..n {
        for i in 0..j {
            let w = dm.get(i, j);
            if w <= cap {
                edges.push(FilteredEdge { diam: w, a: i as u32, b: j as u32 });
            }
        }
    }
    edges.sort_by(|x, y| x.diam.total_cmp(&y.diam).then((x.a, x.b).cmp(&(y.a, y.b))));

    let mut uf = UnionFind::new(n);
    let mut merging = vec![false; edges.len()];
    let mut pairs0 = Vec::with_capacity(n);
    for (idx, e) in edges.iter().enumerate() {
        if uf.union(e.a as usize, e.b as usize) {
            merging[idx] = true;
            pairs0.push((0.0, e.diam));
        }
    }
    let components = n - pairs0.len();
    pairs0.extend(std::iter::repeat_n((0.0, f64::INFINITY), components));
    let mut out = vec![PersistenceDiagram::new(0, recorded_cap, pairs0)];

    if max_dim >= 1 {
        let pairs1 = reduce_dim1(&dm, &edges, &merging, cap);
        out.push(PersistenceDiagram::new(1, recorded_cap, pairs1));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct FilteredEdge {
    diam: f64,
    a: u32,
    b: u32,
}

#[derive(Debug, Clone, Copy)]
struct Triangle {
    diam: f64,
    index: u64,
}

impl PartialEq for Triangle {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Triangle {}

impl Ord for Triangle {
    fn cmp(&self, other: &Self) -> Ordering {
        self.diam
            .total_cmp(&other.diam)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Triangle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn triangle_index(a: u32, b: u32, c: u32) -> u64 {
    let mut v = [a as u64, b as u64, c as u64];
    v.sort_unstable();
    let [i, j, k] = v;
    k * (k - 1) * (k.saturating_sub(2)) / 6 + j * j.saturating_sub(1) / 2 + i
}

fn push_coboundary(dm: &Distances, e: &FilteredEdge, cap: f64, out: &mut Vec<Triangle>) {
    let (a, b) = (e.a as usize, e.b as usize);
    for c in 0..dm.n {
        if c == a || c == b {
            continue;
        }
        let diam = e.diam.max(dm.get(a, c)).max(dm.get(b, c));
        if diam <= cap {
            out.push(Triangle {
                diam,
                index: triangle_index(e.a, e.b, c as u32),
            });
        }
    }
}

/// Pops the smallest triangle that survives Z/2 cancellation.
fn pop_pivot(heap: &mut BinaryHeap<Reverse<Triangle>>) -> Option<Triangle> {
    while let Some(Reverse(top)) = heap.pop() {
        if heap.peek().is_some_and(|Reverse(next)| *next == top) {
            heap.pop();
        } else {
            return Some(top);
        }
    }
    None
}

fn reduce_dim1(dm: &Distances, edges: &[FilteredEdge], merging: &[bool], cap: f64) -> Vec<(f64, f64)> {
    let mut pivot_of: HashMap<u64, usize> = HashMap::new();
    let mut reductions: Vec<Vec<u32>> = Vec::new();
    let mut pairs = Vec::new();
    let mut cob = Vec::with_capacity(dm.n);

    for (idx, e) in edges.iter().enumerate().rev() {
        if merging[idx] {
            continue;
        }
        cob.clear();
        push_coboundary(dm, e, cap, &mut cob);
        let Some(&first) = cob.iter().min() else {
            pairs.push((e.diam, f64::INFINITY));
            continue;
        };
        if let std::collections::hash_map::Entry::Vacant(slot) = pivot_of.entry(first.index) {
            slot.insert(reductions.len());
            reductions.push(vec![idx as u32]);
            pairs.push((e.diam, first.diam));
            continue;
        }

        let mut heap: BinaryHeap<Reverse<Triangle>> = cob.drain(..).map(Reverse).collect();
        let mut combination = vec![idx as u32];
        loop {
            match pop_pivot(&mut heap) {
                None => {
                    pairs.push((e.diam, f64::INFINITY));
                    break;
                }
                Some(pivot) => match pivot_of.get(&pivot.index) {
                    Some(&col) => {
                        heap.push(Reverse(pivot));
                        for &other in &reductions[col] {
                            combination.push(other);
                            push_coboundary(dm, &edges[other as usize], cap, &mut cob);
                            heap.extend(cob.drain(..).map(Reverse));
                        }
                    }
                    None => {
                        pivot_of.insert(pivot.index, reductions.len());
                        reductions.push(cancel_pairs(combination));
                        pairs.push((e.diam, pivot.diam));
                        break;
                    }
                },
            }
        }
    }
    pairs
}

/// Sorts and removes entries that occur an even number of times.
fn cancel_pairs(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    let mut out: Vec<u32> = Vec::with_capacity(v.len());
    for x in v {
        if out.last() == Some(&x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DistanceKind;

    fn square() -> DistanceMatrix {
        let s = 2f64.sqrt();
        DistanceMatrix::from_rows(
            &[
                vec![0.0, 1.0, s, 1.0],
                vec![1.0, 0.0, 1.0, s],
                vec![s, 1.0, 0.0, 1.0],
                vec![1.0, s, 1.0, 0.0],
            ],
            DistanceKind::Euclidean,
        )
        .unwrap()
    }

    #[test]
    fn single_point() {
        let d = DistanceMatrix::from_rows(&[vec![0.0]], DistanceKind::Euclidean).unwrap();
        let pd = vr_persistence(&d, 1, ScaleCap::Enclosing).unwrap();
        assert_eq!(pd[0].pairs, vec![(0.0, f64::INFINITY)]);
        assert!(pd[1].is_empty());
    }

    #[test]
    fn unit_square() {
        let pd = vr_persistence(&square(), 1, ScaleCap::Value(10.0)).unwrap();
        assert_eq!(
            pd[0].sorted_pairs(),
            vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, f64::INFINITY)]
        );
        assert_eq!(pd[1].pairs, vec![(1.0, 2f64.sqrt())]);
    }

    #[test]
    fn unit_square_with_enclosing_cap() {
        // enclosing radius = sqrt(2) keeps the loop's death
        let pd = vr_persistence(&square(), 1, ScaleCap::Enclosing).unwrap();
        assert_eq!(pd[1].scale_cap, f64::INFINITY);
        assert_eq!(pd[1].pairs, vec![(1.0, 2f64.sqrt())]);
    }

    #[test]
    fn equilateral_triangle_has_no_loop() {
        let s = 2.5;
        let d = DistanceMatrix::from_rows(
            &[vec![0.0, s, s], vec![s, 0.0, s], vec![s, s, 0.0]],
            DistanceKind::Euclidean,
        )
        .unwrap();
        let pd = vr_persistence(&d, 1, ScaleCap::Enclosing).unwrap();
        assert_eq!(pd[0].sorted_pairs(), vec![(0.0, s), (0.0, s), (0.0, f64::INFINITY)]);
        assert!(pd[1].is_empty());
    }

    #[test]
    fn low_cap_leaves_loop_open() {
        let pd = vr_persistence(&square(), 1, ScaleCap::Value(1.2)).unwrap();
        assert_eq!(pd[1].pairs, vec![(1.0, f64::INFINITY)]);
        assert_eq!(pd[1].scale_cap, 1.2);
    }

    #[test]
    fn rejects_asymmetric_and_negative() {
        let asym = DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]], DistanceKind::Euclidean).unwrap();
        assert!(vr_persistence(&asym, 1, ScaleCap::Enclosing).is_err());
        assert!(DistanceMatrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]], DistanceKind::Euclidean).is_err());
        assert!(vr_persistence(&square(), 2, ScaleCap::Enclosing).is_err());
    }

    #[test]
    fn disconnected_geodesic_input() {
        let d = DistanceMatrix::from_partial(
            3,
            3,
            vec![Some(0.0), Some(1.0), None, Some(1.0), Some(0.0), None, None, None, Some(0.0)],
            DistanceKind::Geodesic,
        )
        .unwrap();
        let pd = vr_persistence(&d, 1, ScaleCap::Enclosing).unwrap();
        assert_eq!(pd[0].infinite_count(), 2);
        assert_eq!(pd[0].finite_pairs().collect::<Vec<_>>(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn triangle_indices_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for k in 2..12u32 {
            for j in 1..k {
                for i in 0..j {
                    assert!(seen.insert(triangle_index(i, j, k)));
                    assert_eq!(triangle_index(i, j, k), triangle_index(k, i, j));
                }
            }
        }
    }
}
