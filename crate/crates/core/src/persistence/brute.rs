//! Reference persistence by plain boundary-matrix reduction.
//!
//! Builds the full boundary matrix of every vertex, edge and triangle, with
//! no truncation, no clearing and no implicit columns, and runs the textbook
//! left-to-right column reduction. Used to cross-check [`super::vr_persistence`].

use std::collections::HashMap;

use super::rips::validate;
use super::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;

/// Inputs above this size are rejected; the matrix grows as `n^3`.
pub const BRUTE_FORCE_MAX_POINTS: usize = 25;

struct Simplex {
    value: f64,
    vertices: Vec<usize>,
}

/// Same contract as [`super::vr_persistence`] with the full complex.
pub fn brute_force_persistence(dist: &DistanceMatrix, max_dim: usize) -> Result<Vec<PersistenceDiagram>> {
    if max_dim > 1 {
        return Err(Error::param("max_dim", "only dimensions 0 and 1 are supported"));
    }
    validate(dist)?;
    let n = dist.rows();
    if n > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::param(
            "dist",
            format!("brute force is limited to {BRUTE_FORCE_MAX_POINTS} points, got {n}"),
        ));
    }
    let d = |i: usize, j: usize| {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        dist.get(a, b)
    };

    let mut simplices: Vec<Simplex> = (0..n)
        .map(|v| Simplex { value: 0.0, vertices: vec![v] })
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            if let Some(w) = d(i, j) {
                simplices.push(Simplex { value: w, vertices: vec![i, j] });
            }
        }
    }
    if max_dim >= 1 {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if let (Some(a), Some(b), Some(c)) = (d(i, j), d(i, k), d(j, k)) {
                        simplices.push(Simplex {
                            value: a.max(b).max(c),
                            vertices: vec![i, j, k],
                        });
                    }
                }
            }
        }
    }
    simplices.sort_by(|x, y| {
        x.value
            .total_cmp(&y.value)
            .then(x.vertices.len().cmp(&y.vertices.len()))
            .then(x.vertices.cmp(&y.vertices))
    });

    let position: HashMap<Vec<usize>, usize> = simplices
        .iter()
        .enumerate()
        .map(|(pos, s)| (s.vertices.clone(), pos))
        .collect();

    let mut columns: Vec<Vec<usize>> = simplices
        .iter()
        .map(|s| {
            if s.vertices.len() == 1 {
                return Vec::new();
            }
            let mut col: Vec<usize> = (0..s.vertices.len())
                .map(|skip| {
                    let face: Vec<usize> = s
                        .vertices
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    position[&face]
                })
                .collect();
            col.sort_unstable();
            col
        })
        .collect();

    // low row -> column that owns it
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for j in 0..columns.len() {
        while let Some(&low) = columns[j].last() {
            match owner.get(&low) {
                Some(&k) => {
                    let other = columns[k].clone();
                    columns[j] = symmetric_difference(&columns[j], &other);
                }
                None => {
                    owner.insert(low, j);
                    break;
                }
            }
        }
    }

    let mut pairs = vec![Vec::new(); max_dim + 1];
    let mut killed = vec![false; simplices.len()];
    for (&low, &j) in &owner {
        killed[low] = true;
        let dim = simplices[low].vertices.len() - 1;
        if dim <= max_dim {
            pairs[dim].push((simplices[low].value, simplices[j].value));
        }
    }
    for (pos, s) in simplices.iter().enumerate() {
        let dim = s.vertices.len() - 1;
        if dim <= max_dim && columns[pos].is_empty() && !killed[pos] {
            pairs[dim].push((s.value, f64::INFINITY));
        }
    }

    let cap = f64::INFINITY;
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(dim, p)| PersistenceDiagram::new(dim, cap, p))
        .collect())
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DistanceKind;

    #[test]
    fn single_point() {
        let d = DistanceMatrix::from_rows(&[vec![0.0]], DistanceKind::Euclidean).unwrap();
        let pd = brute_force_persistence(&d, 1).unwrap();
        assert_eq!(pd[0].pairs, vec![(0.0, f64::INFINITY)]);
        assert!(pd[1].is_empty());
    }

    #[test]
    fn unit_square() {
        let s = 2f64.sqrt();
        let d = DistanceMatrix::from_rows(
            &[
                vec![0.0, 1.0, s, 1.0],
                vec![1.0, 0.0, 1.0, s],
                vec![s, 1.0, 0.0, 1.0],
                vec![1.0, s, 1.0, 0.0],
            ],
            DistanceKind::Euclidean,
        )
        .unwrap();
        let pd = brute_force_persistence(&d, 1).unwrap();
        assert_eq!(
            pd[0].sorted_pairs(),
            vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, f64::INFINITY)]
        );
        assert_eq!(pd[1].pairs, vec![(1.0, s)]);
    }

    #[test]
    fn size_guard() {
        let n = BRUTE_FORCE_MAX_POINTS + 1;
        let cloud = crate::geometry::PointCloud::from_rows(
            &(0..n).map(|i| vec![i as f64]).collect::<Vec<_>>(),
        )
        .unwrap();
        let d = DistanceMatrix::euclidean(&cloud);
        assert!(brute_force_persistence(&d, 1).is_err());
    }
}
