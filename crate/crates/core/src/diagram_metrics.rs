//! Wasserstein and bottleneck distances between persistence diagrams.
//!
//! Both diagrams are augmented with diagonal copies of the other's points,
//! giving an `(|A|+|B|)`-square cost matrix: rows are the points of `A`
//! followed by diagonal slots, columns are the points of `B` followed by
//! diagonal slots. Point-to-point cost is the L-infinity distance, a point
//! against any diagonal slot costs `(death - birth) / 2`, and diagonal
//! against diagonal costs nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;

/// Largest `|A| + |B|` accepted by [`brute_force_match`].
pub const BRUTE_FORCE_MAX_POINTS: usize = 8;

/// An optimal bijection between the finite points of two diagrams.
///
/// Indices refer to positions in each diagram's `pairs`; `None` stands for
/// the diagonal. Diagonal-to-diagonal pairs are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub assignments: Vec<(Option<usize>, Option<usize>)>,
    /// Equal to the distance that was reported with this matching.
    pub cost: f64,
}

struct Prepared {
    a: Vec<(usize, (f64, f64))>,
    b: Vec<(usize, (f64, f64))>,
    /// Unequal numbers of essential classes: the distance is infinite.
    infinite: bool,
}

fn prepare(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<Prepared> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare a dimension-{} diagram with a dimension-{} diagram",
            a.dim, b.dim
        )));
    }
    if a.scale_cap != b.scale_cap {
        return Err(Error::param(
            "scale_cap",
            format!("diagrams were truncated at different scales ({} vs {})", a.scale_cap, b.scale_cap),
        ));
    }
    let finite = |d: &PersistenceDiagram| {
        d.pairs
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| p.1.is_finite())
            .collect::<Vec<_>>()
    };
    Ok(Prepared {
        a: finite(a),
        b: finite(b),
        infinite: a.infinite_count() != b.infinite_count(),
    })
}

fn linf(x: (f64, f64), y: (f64, f64)) -> f64 {
    (x.0 - y.0).abs().max((x.1 - y.1).abs())
}

fn to_diagonal(x: (f64, f64)) -> f64 {
    (x.1 - x.0) / 2.0
}

fn pair_cost(a: &PersistenceDiagram, b: &PersistenceDiagram, pair: (Option<usize>, Option<usize>)) -> f64 {
    match pair {
        (Some(i), Some(j)) => linf(a.pairs[i], b.pairs[j]),
        (Some(i), None) => to_diagonal(a.pairs[i]),
        (None, Some(j)) => to_diagonal(b.pairs[j]),
        (None, None) => 0.0,
    }
}

/// Recomputes the degree-`p` cost of a matching (`p = inf` for bottleneck).
pub fn matching_cost(a: &PersistenceDiagram, b: &PersistenceDiagram, assignments: &[(Option<usize>, Option<usize>)], p: f64) -> f64 {
    let costs = assignments.iter().map(|&pair| pair_cost(a, b, pair));
    if p.is_infinite() {
        costs.fold(0.0, f64::max)
    } else {
        costs.map(|c| c.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::param("p", format!("order must be at least 1, got {p}")))
    }
}

/// Square augmented cost matrix, entries raised to `power` (1 for bottleneck).
fn cost_matrix(prep: &Prepared, power: f64) -> (usize, Vec<f64>) {
    let (na, nb) = (prep.a.len(), prep.b.len());
    let n = na + nb;
    let raise = |c: f64| if power == 1.0 { c } else { c.powf(power) };
    let mut c = vec![0.0; n * n];
    for (i, &(_, x)) in prep.a.iter().enumerate() {
        for (j, &(_, y)) in prep.b.iter().enumerate() {
            c[i * n + j] = raise(linf(x, y));
        }
        let diag = raise(to_diagonal(x));
        c[i * n + nb..(i + 1) * n].iter_mut().for_each(|v| *v = diag);
    }
    for (j, &(_, y)) in prep.b.iter().enumerate() {
        let diag = raise(to_diagonal(y));
        for i in na..n {
            c[i * n + j] = diag;
        }
    }
    (n, c)
}

/// Converts a row -> column assignment of the augmented matrix back to
/// diagram indices, dropping diagonal-to-diagonal pairs.
fn to_assignments(prep: &Prepared, row_to_col: &[usize]) -> Vec<(Option<usize>, Option<usize>)> {
    let (na, nb) = (prep.a.len(), prep.b.len());
    let mut out: Vec<_> = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(r, &c)| {
            let left = (r < na).then(|| prep.a[r].0);
            let right = (c < nb).then(|| prep.b[c].0);
            (left.is_some() || right.is_some()).then_some((left, right))
        })
        .collect();
    out.sort_unstable();
    out
}

fn finish(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    prep: &Prepared,
    assignments: Vec<(Option<usize>, Option<usize>)>,
    p: f64,
) -> (f64, Matching) {
    let value = if prep.infinite {
        f64::INFINITY
    } else {
        matching_cost(a, b, &assignments, p)
    };
    (value, Matching { assignments, cost: value })
}

/// Degree-`p` Wasserstein distance, solved exactly with the Hungarian
/// algorithm. Essential classes are ignored when both diagrams have the
/// same number of them; otherwise the distance is infinite.
pub fn wasserstein(a: &PersistenceDiagram, b: &PersistenceDiagram, p: f64) -> Result<(f64, Matching)> {
    check_p(p)?;
    if p.is_infinite() {
        return bottleneck(a, b);
    }
    let prep = prepare(a, b)?;
    let (n, cost) = cost_matrix(&prep, p);
    let assignment = hungarian(n, &cost);
    let assignments = to_assignments(&prep, &assignment);
    Ok(finish(a, b, &prep, assignments, p))
}

/// Bottleneck distance: binary search over the distinct entries of the
/// cost matrix with a perfect-matching feasibility test at each step.
pub fn bottleneck(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<(f64, Matching)> {
    let prep = prepare(a, b)?;
    let (n, cost) = cost_matrix(&prep, 1.0);
    let mut candidates = cost.clone();
    candidates.push(0.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let (mut lo, mut hi) = (0, candidates.len() - 1);
    let mut best = perfect_matching(n, &cost, candidates[hi]).expect("the largest cost admits every pair");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match perfect_matching(n, &cost, candidates[mid]) {
            Some(m) => {
                best = m;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    let assignments = to_assignments(&prep, &best);
    Ok(finish(a, b, &prep, assignments, f64::INFINITY))
}

/// Exhaustive search over every augmented matching; `p = inf` gives the
/// bottleneck distance. Reference implementation for small diagrams.
pub fn brute_force_match(a: &PersistenceDiagram, b: &PersistenceDiagram, p: f64) -> Result<(f64, Matching)> {
    check_p(p)?;
    let prep = prepare(a, b)?;
    let total = prep.a.len() + prep.b.len();
    if total > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::param(
            "diagrams",
            format!("brute force is limited to {BRUTE_FORCE_MAX_POINTS} points in total, got {total}"),
        ));
    }

    struct Search<'a> {
        a: &'a PersistenceDiagram,
        b: &'a PersistenceDiagram,
        prep: &'a Prepared,
        p: f64,
        used: Vec<bool>,
        current: Vec<(Option<usize>, Option<usize>)>,
        best: Option<(f64, Vec<(Option<usize>, Option<usize>)>)>,
    }

    impl Search<'_> {
        fn run(&mut self, i: usize) {
            if i == self.prep.a.len() {
                let mut full = self.current.clone();
                for (j, &(jb, _)) in self.prep.b.iter().enumerate() {
                    if !self.used[j] {
                        full.push((None, Some(jb)));
                    }
                }
                full.sort_unstable();
                let value = matching_cost(self.a, self.b, &full, self.p);
                if self.best.as_ref().is_none_or(|(v, _)| value < *v) {
                    self.best = Some((value, full));
                }
                return;
            }
            let ia = self.prep.a[i].0;
            self.current.push((Some(ia), None));
            self.run(i + 1);
            self.current.pop();
            for j in 0..self.prep.b.len() {
                if !self.used[j] {
                    self.used[j] = true;
                    self.current.push((Some(ia), Some(self.prep.b[j].0)));
                    self.run(i + 1);
                    self.current.pop();
                    self.used[j] = false;
                }
            }
        }
    }

    let mut search = Search {
        a,
        b,
        prep: &prep,
        p,
        used: vec![false; prep.b.len()],
        current: Vec::new(),
        best: None,
    };
    search.run(0);
    let (_, assignments) = search.best.expect("at least one matching exists");
    Ok(finish(a, b, &prep, assignments, p))
}

/// Minimum-cost perfect assignment on a dense `n x n` matrix
/// (shortest augmenting paths with potentials, O(n^3)).
/// Returns the column assigned to each row.
fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    // 1-based with a virtual column 0, following the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }
    row_to_col
}

/// Hopcroft-Karp on the threshold graph `cost <= t`. Returns the column of
/// each row if a perfect matching exists.
fn perfect_matching(n: usize, cost: &[f64], t: f64) -> Option<Vec<usize>> {
    const NONE: usize = usize::MAX;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| (0..n).filter(|&c| cost[r * n + c] <= t).collect())
        .collect();
    let mut row_match = vec![NONE; n];
    let mut col_match = vec![NONE; n];
    let mut dist = vec![0usize; n];
    let mut matched = 0;

    loop {
        // BFS layering from free rows.
        let mut queue = std::collections::VecDeque::new();
        for r in 0..n {
            if row_match[r] == NONE {
                dist[r] = 0;
                queue.push_back(r);
            } else {
                dist[r] = NONE;
            }
        }
        let mut found = false;
        while let Some(r) = queue.pop_front() {
            for &c in &adj[r] {
                match col_match[c] {
                    NONE => found = true,
                    r2 if dist[r2] == NONE => {
                        dist[r2] = dist[r] + 1;
                        queue.push_back(r2);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut next = vec![0usize; n];
        for r in 0..n {
            if row_match[r] == NONE && augment(r, &adj, &mut row_match, &mut col_match, &mut dist, &mut next) {
                matched += 1;
            }
        }
    }
    (matched == n).then_some(row_match)
}

fn augment(
    r: usize,
    adj: &[Vec<usize>],
    row_match: &mut [usize],
    col_match: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    const NONE: usize = usize::MAX;
    while next[r] < adj[r].len() {
        let c = adj[r][next[r]];
        next[r] += 1;
        let r2 = col_match[c];
        if r2 == NONE || (dist[r2] == dist[r] + 1 && augment(r2, adj, row_match, col_match, dist, next)) {
            row_match[r] = c;
            col_match[c] = r;
            return true;
        }
    }
    dist[r] = NONE;
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::new(1, f64::INFINITY, pairs.to_vec())
    }

    #[test]
    fn identical_diagrams_are_at_distance_zero() {
        let a = pd(&[(0.0, 1.0), (0.5, 2.0), (1.0, 1.5)]);
        let (w, m) = wasserstein(&a, &a, 2.0).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!(m.assignments, vec![(Some(0), Some(0)), (Some(1), Some(1)), (Some(2), Some(2))]);
        assert_eq!(bottleneck(&a, &a).unwrap().0, 0.0);
    }

    #[test]
    fn single_point_against_empty() {
        let (a, b) = (pd(&[(0.0, 2.0)]), pd(&[]));
        assert_eq!(wasserstein(&a, &b, 2.0).unwrap().0, 1.0);
        assert_eq!(bottleneck(&a, &b).unwrap().0, 1.0);
        assert_eq!(brute_force_match(&a, &b, 2.0).unwrap().0, 1.0);
    }

    #[test]
    fn direct_match_beats_diagonal_route() {
        let (a, b) = (pd(&[(0.0, 4.0)]), pd(&[(0.0, 2.0)]));
        let (w, m) = wasserstein(&a, &b, 2.0).unwrap();
        assert_eq!(w, 2.0);
        assert_eq!(m.assignments, vec![(Some(0), Some(0))]);
        assert_eq!(bottleneck(&a, &b).unwrap().0, 2.0);
        assert_eq!(brute_force_match(&a, &b, 2.0).unwrap().0, 2.0);
    }

    #[test]
    fn empty_against_empty() {
        assert_eq!(wasserstein(&pd(&[]), &pd(&[]), 2.0).unwrap().0, 0.0);
        assert_eq!(bottleneck(&pd(&[]), &pd(&[])).unwrap().0, 0.0);
        assert_eq!(brute_force_match(&pd(&[]), &pd(&[]), 2.0).unwrap().0, 0.0);
    }

    #[test]
    fn essential_classes() {
        let a = PersistenceDiagram::new(0, f64::INFINITY, vec![(0.0, f64::INFINITY), (0.0, 1.0)]);
        let b = PersistenceDiagram::new(0, f64::INFINITY, vec![(0.0, f64::INFINITY), (0.0, 1.0)]);
        assert_eq!(wasserstein(&a, &b, 2.0).unwrap().0, 0.0);
        let c = PersistenceDiagram::new(0, f64::INFINITY, vec![(0.0, 1.0)]);
        assert_eq!(wasserstein(&a, &c, 2.0).unwrap().0, f64::INFINITY);
        assert_eq!(bottleneck(&a, &c).unwrap().0, f64::INFINITY);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let a = pd(&[(0.0, 1.0)]);
        let mut b = a.clone();
        b.dim = 0;
        assert!(matches!(wasserstein(&a, &b, 2.0), Err(Error::DimensionMismatch(_))));
        let c = PersistenceDiagram::new(1, 3.0, vec![(0.0, 1.0)]);
        assert!(wasserstein(&a, &c, 2.0).is_err());
        assert!(wasserstein(&a, &a, 0.5).is_err());
    }

    #[test]
    fn brute_force_size_guard() {
        let a = pd(&[(0.0, 1.0); 5]);
        assert!(brute_force_match(&a, &a, 2.0).is_err());
    }

    #[test]
    fn matching_cost_is_reported_value() {
        let a = pd(&[(0.0, 3.0), (1.0, 1.4), (0.2, 2.0)]);
        let b = pd(&[(0.1, 2.9), (0.5, 0.9)]);
        for p in [1.0, 2.0, 3.5] {
            let (w, m) = wasserstein(&a, &b, p).unwrap();
            assert!((matching_cost(&a, &b, &m.assignments, p) - w).abs() < 1e-12);
        }
        let (w, m) = bottleneck(&a, &b).unwrap();
        assert_eq!(matching_cost(&a, &b, &m.assignments, f64::INFINITY), w);
    }
}
