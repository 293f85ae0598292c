use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Embedding, EmbeddingMethod, EmbeddingParams};
use crate::diagram_metrics::{bottleneck, wasserstein};
use crate::error::{Error, Result};
use crate::geometry::{maxmin_subsample, DistanceMatrix, PointCloud};
use crate::persistence::{persistent_betti, vr_persistence, PersistenceDiagram, ScaleCap};

#[cfg(test)]
const ORTHO_TOL: f64 = 1e-12;

/// A unit projection direction and an orthonormal pair spanning part of its
/// orthogonal complement; points are projected onto that pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub vector: Vec<f64>,
    pub basis: [Vec<f64>; 2],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Direction {
    /// Normalizes `v` and builds the basis by Gram-Schmidt against the
    /// coordinate axes, least aligned with `v` first (ties by axis index).
    pub fn new(v: &[f64]) -> Result<Self> {
        let dim = v.len();
        if dim < 3 {
            return Err(Error::param("direction", format!("need at least 3 coordinates, got {dim}")));
        }
        let norm = dot(v, v).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::param("direction", "vector must be finite and nonzero"));
        }
        let vector: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let mut axes: Vec<usize> = (0..dim).collect();
        axes.sort_by(|&a, &b| vector[a].abs().total_cmp(&vector[b].abs()).then(a.cmp(&b)));

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2);
        for axis in axes {
            let mut u = vec![0.0; dim];
            u[axis] = 1.0;
            for _ in 0..2 {
                for q in std::iter::once(&vector).chain(basis.iter()) {
                    let c = dot(&u, q);
                    u.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nu = dot(&u, &u).sqrt();
            if nu > 1e-6 {
                u.iter_mut().for_each(|x| *x /= nu);
                basis.push(u);
                if basis.len() == 2 {
                    break;
                }
            }
        }
        let second = basis.pop().expect("dim >= 3 leaves two free axes");
        let first = basis.pop().expect("dim >= 3 leaves two free axes");
        Ok(Direction {
            vector,
            basis: [first, second],
        })
    }

    /// Largest deviation from orthonormality among vector and basis.
    pub fn orthonormality_residual(&self) -> f64 {
        let all = [&self.vector, &self.basis[0], &self.basis[1]];
        let mut worst: f64 = 0.0;
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }
}

/// `m` directions on the unit sphere in R^3 from a Fibonacci lattice.
pub fn sphere_directions(m: usize) -> Result<Vec<Direction>> {
    if m == 0 {
        return Err(Error::param("m", "need at least one direction"));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / m as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Direction::new(&[r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// `m` seeded uniform directions on the unit sphere in R^dim.
pub fn random_directions(dim: usize, m: usize, seed: u64) -> Result<Vec<Direction>> {
    if m == 0 {
        return Err(Error::param("m", "need at least one direction"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            Direction::new(&v)
        })
        .collect()
}

fn project_flat(cloud: &PointCloud, dir: &Direction) -> Vec<f64> {
    cloud
        .points()
        .flat_map(|p| [dot(p, &dir.basis[0]), dot(p, &dir.basis[1])])
        .collect()
}

/// Coordinates of each point in the basis of `direction`.
pub fn linear_project(cloud: &PointCloud, direction: &Direction) -> Result<Embedding> {
    if cloud.dim() < 3 {
        return Err(Error::param("cloud", "linear projection needs ambient dimension >= 3"));
    }
    if direction.vector.len() != cloud.dim() {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} coordinates, cloud has {}",
            direction.vector.len(),
            cloud.dim()
        )));
    }
    if direction.orthonormality_residual() > 1e-9 {
        return Err(Error::param("direction", "vector and basis are not orthonormal"));
    }
    Ok(Embedding {
        coords: PointCloud::from_flat(2, project_flat(cloud, direction))?,
        method: EmbeddingMethod::LinearProjection,
        landmarks: None,
        params: EmbeddingParams {
            direction: Some(direction.vector.clone()),
            ..Default::default()
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMetric {
    /// Degree-2 Wasserstein distance of the dimension-1 diagrams.
    #[default]
    Wd1,
    /// As `Wd1`, ties broken by the dimension-0 distance.
    Wd1ThenWd0,
    /// Bottleneck distance of the dimension-1 diagrams.
    Bottleneck,
}

impl std::str::FromStr for RankMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wd1" => Ok(RankMetric::Wd1),
            "wd1_then_wd0" | "wd1-then-wd0" => Ok(RankMetric::Wd1ThenWd0),
            "bottleneck" => Ok(RankMetric::Bottleneck),
            other => Err(Error::param("rank_metric", format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOptions {
    pub metric: RankMetric,
    /// Persistence is computed on a maxmin subsample of this many points.
    pub subsample_size: usize,
    pub seed: u64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            metric: RankMetric::Wd1,
            subsample_size: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionScore {
    /// Position of the direction in the evaluated list.
    pub index: usize,
    pub direction: Direction,
    pub score: f64,
    pub wd1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wd0: Option<f64>,
    /// Persistent first Betti number of the projected subsample.
    pub pb1: usize,
}

/// Evaluates `m` Fibonacci directions (R^3) or `m` seeded random directions
/// (higher dimensions) and ranks them, best first.
pub fn projection_search(cloud: &PointCloud, m: usize, options: &ProjectionOptions) -> Result<Vec<ProjectionScore>> {
    let directions = if cloud.dim() == 3 {
        sphere_directions(m)?
    } else {
        random_directions(cloud.dim(), m, options.seed)?
    };
    projection_search_with(cloud, &directions, options)
}

fn diagrams(cloud: &PointCloud) -> Result<Vec<PersistenceDiagram>> {
    vr_persistence(&DistanceMatrix::euclidean(cloud), 1, ScaleCap::Enclosing)
}

/// Ranks the given directions by how little their projection distorts the
/// persistence diagrams of the cloud. Sorted ascending by score, then by
/// direction index.
pub fn projection_search_with(cloud: &PointCloud, directions: &[Direction], options: &ProjectionOptions) -> Result<Vec<ProjectionScore>> {
    if directions.is_empty() {
        return Err(Error::param("directions", "need at least one direction"));
    }
    let size = options.subsample_size.min(cloud.len());
    if size == 0 {
        return Err(Error::param("subsample_size", "must be at least 1"));
    }
    let sub = cloud.select(&maxmin_subsample(cloud, size, options.seed)?)?;
    let reference = diagrams(&sub)?;

    let mut scores: Vec<ProjectionScore> = directions
        .par_iter()
        .enumerate()
        .map(|(index, dir)| -> Result<ProjectionScore> {
            let projected = linear_project(&sub, dir)?.coords;
            let pd = diagrams(&projected)?;
            let wd1 = wasserstein(&reference[1], &pd[1], 2.0)?.0;
            let (score, wd0) = match options.metric {
                RankMetric::Wd1 => (wd1, None),
                RankMetric::Wd1ThenWd0 => (wd1, Some(wasserstein(&reference[0], &pd[0], 2.0)?.0)),
                RankMetric::Bottleneck => (bottleneck(&reference[1], &pd[1])?.0, None),
            };
            Ok(ProjectionScore {
                index,
                direction: dir.clone(),
                score,
                wd1,
                wd0,
                pb1: persistent_betti(&pd[1], None).count,
            })
        })
        .collect::<Result<_>>()?;
    scores.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.wd0.unwrap_or(0.0).total_cmp(&b.wd0.unwrap_or(0.0)))
            .then(a.index.cmp(&b.index))
    });
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_directions_are_orthonormal_and_distinct() {
        let dirs = sphere_directions(200).unwrap();
        for d in &dirs {
            assert!(d.orthonormality_residual() < 1e-12);
        }
        let mut min_angle = f64::INFINITY;
        for i in 0..dirs.len() {
            for j in i + 1..dirs.len() {
                let c = dot(&dirs[i].vector, &dirs[j].vector).clamp(-1.0, 1.0);
                min_angle = min_angle.min(c.acos());
            }
        }
        assert!(min_angle > 0.0);
        assert!(sphere_directions(0).is_err());
    }

    #[test]
    fn planar_slice_is_isometric() {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [-3.0, 0.5, 0.0]]).unwrap();
        let e = linear_project(&cloud, &Direction::new(&[0.0, 0.0, 1.0]).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((e.coords.distance(i, j) - cloud.distance(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collinear_point_projects_to_origin() {
        let dir = Direction::new(&[1.0, 2.0, 2.0]).unwrap();
        let cloud = PointCloud::from_rows(&[[2.0, 4.0, 4.0]]).unwrap();
        let e = linear_project(&cloud, &dir).unwrap();
        assert!(e.coords.point(0).iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn residual_within_tolerance_for_awkward_vectors() {
        for v in [[1.0, 1.0, 1.0], [1e-9, 0.0, 1.0], [-0.3, 0.9, -0.1]] {
            assert!(Direction::new(&v).unwrap().orthonormality_residual() < ORTHO_TOL);
        }
        assert!(Direction::new(&[0.0, 0.0, 0.0]).is_err());
        assert!(Direction::new(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn single_direction_ranks_first() {
        let cloud = PointCloud::from_rows(&(0..30).map(|i| {
            let t = i as f64 * 0.2;
            [t.cos(), t.sin(), 0.1 * t]
        }).collect::<Vec<_>>()).unwrap();
        let dirs = vec![Direction::new(&[0.3, 0.2, 1.0]).unwrap()];
        let r = projection_search_with(&cloud, &dirs, &ProjectionOptions::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].index, 0);
    }
}
