//! Point clouds, distance matrices, neighborhood graphs and dataset generators.

mod graph;
mod sampling;
pub mod shapes;

pub use graph::{build_knn_graph, geodesic_distances, Edge, NeighborhoodGraph};
pub(crate) use graph::UnionFind;
pub use sampling::{delay_embedding, maxmin_subsample, maxmin_subsample_from};
pub use shapes::{generate_shape, ShapeKind, ShapeSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N` points in `R^D`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from a flat row-major buffer of `len * dim` coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "ambient dimension must be at least 1"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::param(
                "coords",
                format!(
                    "expected a non-empty multiple of {dim} coordinates, got {}",
                    coords.len()
                ),
            ));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::param(
                "coords",
                format!("coordinate {} of point {} is not finite", pos % dim, pos / dim),
            ));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::param(
                    "rows",
                    format!("row {i} has {} coordinates, expected {dim}", row.len()),
                ));
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(dim, coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Coordinate-wise mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for p in self.points() {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        let n = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Index of the point nearest to `target`; ties go to the lower index.
    pub fn nearest_to(&self, target: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.points().enumerate() {
            let d = squared_euclidean(p, target);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// A new cloud holding the listed points, in list order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::param("indices", format!("index {i} out of range")));
            }
            coords.extend_from_slice(self.point(i));
        }
        Self::from_flat(self.dim, coords)
    }
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Euclidean,
    Geodesic,
}

/// Dense `rows x cols` distance matrix.
///
/// Entries that are unreachable in a disconnected graph are tracked in a
/// separate mask and never stored as a numeric value.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    kind: DistanceKind,
    unreachable: Option<Vec<bool>>,
}

impl DistanceMatrix {
    /// Wraps a complete row-major matrix. Entries must be finite and nonnegative.
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>, kind: DistanceKind) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::param(
                "values",
                format!("expected {} entries, got {}", rows * cols, values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::param(
                "values",
                format!("distances must be finite and nonnegative, found {v}"),
            ));
        }
        Ok(Self {
            rows,
            cols,
            values,
            kind,
            unreachable: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], kind: DistanceKind) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::param("rows", "ragged distance matrix"));
        }
        Self::from_values(rows.len(), cols, rows.concat(), kind)
    }

    /// Entries given as `None` are marked unreachable.
    pub fn from_partial(rows: usize, cols: usize, entries: Vec<Option<f64>>, kind: DistanceKind) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::param("entries", "wrong entry count"));
        }
        let mask: Vec<bool> = entries.iter().map(Option::is_none).collect();
        let values = entries.into_iter().map(|e| e.unwrap_or(0.0)).collect();
        let mut m = Self::from_values(rows, cols, values, kind)?;
        if mask.iter().any(|&u| u) {
            m.unreachable = Some(mask);
        }
        Ok(m)
    }

    /// Pairwise Euclidean distances of a cloud.
    pub fn euclidean(cloud: &PointCloud) -> Self {
        use rayon::prelude::*;
        let n = cloud.len();
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..n).map(move |j| if i == j { 0.0 } else { cloud.distance(i, j) }))
            .collect();
        Self {
            rows: n,
            cols: n,
            values,
            kind: DistanceKind::Euclidean,
            unreachable: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_complete(&self) -> bool {
        self.unreachable.is_none()
    }

    /// `None` when the pair is unreachable.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let idx = i * self.cols + j;
        match &self.unreachable {
            Some(mask) if mask[idx] => None,
            _ => Some(self.values[idx]),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Raw row-major values; unreachable slots hold an unspecified number.
    /// Callers must check [`is_complete`](Self::is_complete) first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Errors unless every entry is reachable.
    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::Unreachable)
        }
    }

    /// Checks symmetry (within `tol`), zero diagonal and nonnegativity.
    pub fn validate_square(&self, tol: f64) -> Result<()> {
        if !self.is_square() {
            return Err(Error::param(
                "dist",
                format!("expected a square matrix, got {}x{}", self.rows, self.cols),
            ));
        }
        let n = self.rows;
        for i in 0..n {
            if self.get(i, i).is_none_or(|d| d != 0.0) {
                return Err(Error::param("dist", format!("diagonal entry {i} is not zero")));
            }
            for j in i + 1..n {
                match (self.get(i, j), self.get(j, i)) {
                    (None, None) => {}
                    (Some(a), Some(b)) if (a - b).abs() <= tol => {}
                    _ => {
                        return Err(Error::param(
                            "dist",
                            format!("matrix is not symmetric at ({i}, {j})"),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    /// The principal submatrix on `indices` (square matrices only).
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let m = indices.len();
        let mut values = Vec::with_capacity(m * m);
        let mut mask = self.unreachable.as_ref().map(|_| Vec::with_capacity(m * m));
        for &i in indices {
            for &j in indices {
                values.push(self.values[i * self.cols + j]);
                if let (Some(out), Some(src)) = (mask.as_mut(), self.unreachable.as_ref()) {
                    out.push(src[i * self.cols + j]);
                }
            }
        }
        let unreachable = mask.filter(|m: &Vec<bool>| m.iter().any(|&u| u));
        Self {
            rows: m,
            cols: m,
            values,
            kind: self.kind,
            unreachable,
        }
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        kind: DistanceKind,
        unreachable: Option<Vec<bool>>,
    ) -> Self {
        Self {
            rows,
            cols,
            values,
            kind,
            unreachable,
        }
    }
}
