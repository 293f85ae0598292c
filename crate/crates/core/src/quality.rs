//! Distance-based and homology-based quality of an embedding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diagram_metrics::wasserstein;
use crate::embedding::{Embedding, EmbeddingMethod};
use crate::error::{Error, Result};
use crate::geometry::{build_knn_graph, geodesic_distances, maxmin_subsample, DistanceKind, DistanceMatrix, PointCloud};
use crate::persistence::{persistent_betti, vr_persistence, PersistenceDiagram, ScaleCap};

/// `1 - R^2`, with `R` the Pearson correlation between the strict upper
/// triangles of two square matrices of the same size.
pub fn residual_variance(dx: &DistanceMatrix, dy: &DistanceMatrix) -> Result<f64> {
    if !dx.is_square() || !dy.is_square() || dx.rows() != dy.rows() {
        return Err(Error::DimensionMismatch(format!(
            "residual variance needs two square matrices of one size, got {}x{} and {}x{}",
            dx.rows(),
            dx.cols(),
            dy.rows(),
            dy.cols()
        )));
    }
    dx.require_complete()?;
    dy.require_complete()?;
    let n = dx.rows();
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs < 3 {
        return Err(Error::param("dist", "need at least three off-diagonal entries"));
    }
    let (mut mx, mut my) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            mx += dx.values()[i * n + j];
            my += dy.values()[i * n + j];
        }
    }
    mx /= pairs as f64;
    my /= pairs as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let a = dx.values()[i * n + j] - mx;
            let b = dy.values()[i * n + j] - my;
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("one distance matrix is constant".into()));
    }
    let r2 = (sxy * sxy) / (sxx * syy);
    Ok((1.0 - r2).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityOptions {
    /// Persistence is computed on a maxmin subsample of at most this many
    /// points, with the same indices on both sides.
    pub subsample_size: usize,
    pub seed: u64,
    /// Fixed persistence threshold for both Betti counts; widest gap if unset.
    pub threshold: Option<f64>,
}

impl Default for QualityOptions {
    fn default() -> Self {
        Self {
            subsample_size: 1024,
            seed: 0,
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub before: f64,
    pub after: f64,
}

/// Which distances each measure compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    /// Kind of the input-side matrix used for the residual variance.
    pub rv_input: DistanceKind,
    /// Wasserstein distances always compare Euclidean with Euclidean.
    pub wd_input: DistanceKind,
    pub wd_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub rv: f64,
    pub wd0: f64,
    pub wd1: f64,
    pub pb1_before: usize,
    pub pb1_after: usize,
    pub subsample_size: usize,
    pub thresholds: Thresholds,
    pub flags: Vec<String>,
    pub conventions: Conventions,
}

/// The input-side matrix for the residual variance: geodesic distances on
/// the kNN graph for the Isomap family, Euclidean distances otherwise.
pub fn rv_reference(cloud: &PointCloud, embedding: &Embedding) -> Result<DistanceMatrix> {
    match (embedding.method, embedding.params.k) {
        (EmbeddingMethod::Isomap | EmbeddingMethod::LIsomapRandom | EmbeddingMethod::LIsomapHomology, Some(k)) => {
            let g = build_knn_graph(cloud, k)?;
            g.require_connected()?;
            geodesic_distances(&g, None)
        }
        _ => Ok(DistanceMatrix::euclidean(cloud)),
    }
}

/// Input and embedding diagrams on a shared maxmin subsample.
pub(crate) struct SharedDiagrams {
    pub indices: Vec<usize>,
    pub input: Vec<PersistenceDiagram>,
}

impl SharedDiagrams {
    pub fn new(cloud: &PointCloud, subsample_size: usize, seed: u64) -> Result<Self> {
        let m = subsample_size.min(cloud.len());
        if m == 0 {
            return Err(Error::param("subsample_size", "must be at least 1"));
        }
        let indices = maxmin_subsample(cloud, m, seed)?;
        let input = vr_persistence(&DistanceMatrix::euclidean(&cloud.select(&indices)?), 1, ScaleCap::Enclosing)?;
        Ok(Self { indices, input })
    }

    pub fn embedding_diagrams(&self, coords: &PointCloud) -> Result<Vec<PersistenceDiagram>> {
        vr_persistence(&DistanceMatrix::euclidean(&coords.select(&self.indices)?), 1, ScaleCap::Enclosing)
    }
}

/// Full report for an embedding of `cloud`. `dx` is the input-side matrix
/// for the residual variance (see [`rv_reference`]).
pub fn quality_report(cloud: &PointCloud, embedding: &Embedding, dx: &DistanceMatrix, options: &QualityOptions) -> Result<QualityReport> {
    if embedding.len() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} rows, cloud has {}",
            embedding.len(),
            cloud.len()
        )));
    }
    let rv = residual_variance(dx, &embedding.distances())?;
    let shared = SharedDiagrams::new(cloud, options.subsample_size, options.seed)?;
    let after = shared.embedding_diagrams(&embedding.coords)?;
    report_from_parts(rv, dx.kind(), &shared, &after, options.threshold, embedding)
}

pub(crate) fn report_from_parts(
    rv: f64,
    rv_input: DistanceKind,
    shared: &SharedDiagrams,
    after: &[PersistenceDiagram],
    threshold: Option<f64>,
    embedding: &Embedding,
) -> Result<QualityReport> {
    let wd0 = wasserstein(&shared.input[0], &after[0], 2.0)?.0;
    let wd1 = wasserstein(&shared.input[1], &after[1], 2.0)?.0;
    let before_pb = persistent_betti(&shared.input[1], threshold);
    let after_pb = persistent_betti(&after[1], threshold);

    let mut flags = Vec::new();
    if before_pb.ambiguous {
        flags.push("pb1_before_ambiguous".to_string());
    }
    if after_pb.ambiguous {
        flags.push("pb1_after_ambiguous".to_string());
    }
    if embedding.params.clamped_eigenvalues.unwrap_or(0) > 0 {
        flags.push("negative_eigenvalues_clamped".to_string());
    }
    if shared.indices.len() < embedding.len() {
        flags.push("subsampled".to_string());
    }
    Ok(QualityReport {
        rv,
        wd0,
        wd1,
        pb1_before: before_pb.count,
        pb1_after: after_pb.count,
        subsample_size: shared.indices.len(),
        thresholds: Thresholds {
            before: before_pb.threshold,
            after: after_pb.threshold,
        },
        flags,
        conventions: Conventions {
            rv_input,
            wd_input: DistanceKind::Euclidean,
            wd_order: 2.0,
        },
    })
}

const CSV_HEADER: [&str; 10] = [
    "label",
    "rv",
    "wd0",
    "wd1",
    "pb1_before",
    "pb1_after",
    "subsample_size",
    "threshold_before",
    "threshold_after",
    "flags",
];

/// One CSV row per labelled report, with a header, for batch tables.
pub fn write_csv_summary<W: Write>(writer: W, rows: &[(String, QualityReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for (label, r) in rows {
        w.write_record([
            label.clone(),
            r.rv.to_string(),
            r.wd0.to_string(),
            r.wd1.to_string(),
            r.pb1_before.to_string(),
            r.pb1_after.to_string(),
            r.subsample_size.to_string(),
            r.thresholds.before.to_string(),
            r.thresholds.after.to_string(),
            r.flags.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingParams;

    fn upper(values: &[f64]) -> DistanceMatrix {
        // 3 points -> upper triangle (0,1), (0,2), (1,2)
        let [a, b, c] = [values[0], values[1], values[2]];
        DistanceMatrix::from_rows(&[vec![0.0, a, b], vec![a, 0.0, c], vec![b, c, 0.0]], DistanceKind::Euclidean).unwrap()
    }

    #[test]
    fn identical_and_scaled_inputs() {
        let d = upper(&[1.0, 2.0, 3.0]);
        assert_eq!(residual_variance(&d, &d).unwrap(), 0.0);
        assert!(residual_variance(&d, &d.scaled(3.0)).unwrap() < 1e-15);
    }

    #[test]
    fn hand_computed_correlation() {
        // Independent two-pass formula on the raw vectors.
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.5];
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&x), mean(&y));
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let r = cov / (vx * vy).sqrt();
        let rv = residual_variance(&upper(&x), &upper(&y)).unwrap();
        assert!((rv - (1.0 - r * r)).abs() < 1e-15);
    }

    #[test]
    fn constant_matrix_is_undefined() {
        let d = upper(&[1.0, 1.0, 1.0]);
        assert!(matches!(residual_variance(&d, &upper(&[1.0, 2.0, 3.0])), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn isometric_copy_scores_zero() {
        let rows: Vec<[f64; 3]> = (0..40).map(|i| {
            let t = i as f64 * 0.157;
            [t.cos() * 2.0, t.sin(), 0.0]
        }).collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let emb = Embedding {
            coords: PointCloud::from_rows(&rows.iter().map(|r| [r[0], r[1]]).collect::<Vec<_>>()).unwrap(),
            method: EmbeddingMethod::LinearProjection,
            landmarks: None,
            params: EmbeddingParams::default(),
        };
        let dx = rv_reference(&cloud, &emb).unwrap();
        let r = quality_report(&cloud, &emb, &dx, &QualityOptions::default()).unwrap();
        assert!(r.rv < 1e-12);
        assert_eq!((r.wd0, r.wd1), (0.0, 0.0));
        assert_eq!(r.pb1_before, r.pb1_after);
    }

    #[test]
    fn csv_summary_has_header_and_rows() {
        let r = QualityReport {
            rv: 0.1,
            wd0: 0.2,
            wd1: 0.3,
            pb1_before: 1,
            pb1_after: 1,
            subsample_size: 10,
            thresholds: Thresholds { before: 0.5, after: 0.4 },
            flags: vec!["a".into(), "b".into()],
            conventions: Conventions { rv_input: DistanceKind::Geodesic, wd_input: DistanceKind::Euclidean, wd_order: 2.0 },
        };
        let mut out = Vec::new();
        write_csv_summary(&mut out, &[("x".into(), r)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("x,0.1,0.2,0.3,1,1,10,0.5,0.4,a;b"));
    }
}
