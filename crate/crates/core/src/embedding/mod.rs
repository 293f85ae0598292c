//! Classical MDS, Isomap, landmark Isomap and linear projections.

mod mds;
mod projection;

pub(crate) use mds::isomap_with_geodesics;
pub use mds::{auto_landmark_count, classical_mds, isomap, isomap_on_graph, l_isomap, l_isomap_on_graph, random_landmarks};
pub use projection::{
    linear_project, projection_search, projection_search_with, random_directions, sphere_directions, Direction,
    ProjectionOptions, ProjectionScore, RankMetric,
};

use serde::{Deserialize, Serialize};

use crate::geometry::{DistanceMatrix, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingMethod {
    #[serde(rename = "mds")]
    Mds,
    #[serde(rename = "isomap")]
    Isomap,
    #[serde(rename = "l-isomap-random")]
    LIsomapRandom,
    #[serde(rename = "l-isomap-homology")]
    LIsomapHomology,
    #[serde(rename = "linear-projection")]
    LinearProjection,
}

impl EmbeddingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMethod::Mds => "mds",
            EmbeddingMethod::Isomap => "isomap",
            EmbeddingMethod::LIsomapRandom => "l-isomap-random",
            EmbeddingMethod::LIsomapHomology => "l-isomap-homology",
            EmbeddingMethod::LinearProjection => "linear-projection",
        }
    }
}

impl std::fmt::Display for EmbeddingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EmbeddingMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Ok(match s {
            "mds" => EmbeddingMethod::Mds,
            "isomap" => EmbeddingMethod::Isomap,
            "l-isomap-random" => EmbeddingMethod::LIsomapRandom,
            "l-isomap-homology" => EmbeddingMethod::LIsomapHomology,
            "linear-projection" => EmbeddingMethod::LinearProjection,
            other => return Err(crate::Error::param("method", format!("unknown method {other:?}"))),
        })
    }
}

/// Everything besides the coordinates that shaped an embedding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca_normalize: Option<bool>,
    /// Share of the spectrum's absolute mass on negative eigenvalues;
    /// geodesic matrices are rarely exactly Euclidean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_eigen_fraction: Option<f64>,
    /// Set when the fraction above was estimated from Ritz values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_fraction_estimated: Option<bool>,
    /// Number of the top `d` eigenvalues that were negative and clamped to 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamped_eigenvalues: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

/// `N` points in `R^d` produced by one of the methods above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: PointCloud,
    pub method: EmbeddingMethod,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub landmarks: Option<Vec<usize>>,
    pub params: EmbeddingParams,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coords.dim()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Pairwise Euclidean distances in the embedding.
    pub fn distances(&self) -> DistanceMatrix {
        DistanceMatrix::euclidean(&self.coords)
    }
}
