use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Embedding, EmbeddingMethod, EmbeddingParams};
use crate::error::{Error, Result};
use crate::geometry::{build_knn_graph, geodesic_distances, DistanceMatrix, NeighborhoodGraph, PointCloud};
use crate::linalg::{center, pca_align, top_eigenpairs, TopEigen};

/// Eigenpairs of `-1/2 J D^2 J` for a complete square matrix given as
/// row-major values.
fn double_centered_eigen(n: usize, values: &[f64], d: usize) -> TopEigen {
    let mut b: Vec<f64> = values.iter().map(|v| v * v).collect();
    let row_mean: Vec<f64> = b.chunks_exact(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    // D^2 is symmetric, so column means equal row means.
    for i in 0..n {
        for j in 0..n {
            let v = &mut b[i * n + j];
            *v = -0.5 * (*v - row_mean[i] - row_mean[j] + grand);
        }
    }
    top_eigenpairs(n, &b, d)
}

fn mds_params(eig: &TopEigen) -> EmbeddingParams {
    EmbeddingParams {
        negative_eigen_fraction: Some(eig.negative_fraction),
        negative_fraction_estimated: eig.negative_estimated.then_some(true),
        clamped_eigenvalues: Some(eig.values.iter().filter(|&&v| v < 0.0).count()),
        ..Default::default()
    }
}

fn symmetric_values(dist: &DistanceMatrix) -> Vec<f64> {
    let n = dist.rows();
    let v = dist.values();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (v[i * n + j] + v[j * n + i]);
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// Classical (Torgerson) MDS into `d` dimensions. Negative eigenvalues among
/// the top `d` are clamped to zero and counted in the params.
pub fn classical_mds(dist: &DistanceMatrix, d: usize) -> Result<Embedding> {
    dist.require_complete()?;
    let n = dist.rows();
    let scale = dist.values().iter().fold(1.0f64, |m, v| m.max(*v));
    dist.validate_square(1e-9 * scale)?;
    if d == 0 || d >= n {
        return Err(Error::param("d", format!("need 1 <= d < {n}, got {d}")));
    }
    let eig = double_centered_eigen(n, &symmetric_values(dist), d);
    let mut coords = vec![0.0; n * d];
    for (c, (lambda, v)) in eig.values.iter().zip(&eig.vectors).enumerate() {
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            coords[i * d + c] = v[i] * s;
        }
    }
    center(d, &mut coords);
    Ok(Embedding {
        coords: PointCloud::from_flat(d, coords)?,
        method: EmbeddingMethod::Mds,
        landmarks: None,
        params: mds_params(&eig),
    })
}

fn check_target_dim(cloud: &PointCloud, d: usize) -> Result<()> {
    if d == 0 || d >= cloud.dim() {
        return Err(Error::param(
            "d",
            format!("target dimension must satisfy 1 <= d < {}, got {d}", cloud.dim()),
        ));
    }
    Ok(())
}

/// Isomap: classical MDS on the all-pairs geodesic distances of the kNN graph.
pub fn isomap(cloud: &PointCloud, k: usize, d: usize) -> Result<Embedding> {
    check_target_dim(cloud, d)?;
    let graph = build_knn_graph(cloud, k)?;
    isomap_on_graph(&graph, d)
}

/// Isomap on an existing (for example torn) neighborhood graph.
pub fn isomap_on_graph(graph: &NeighborhoodGraph, d: usize) -> Result<Embedding> {
    Ok(isomap_with_geodesics(graph, d)?.0)
}

/// Isomap that also hands back the geodesic matrix it embedded.
pub(crate) fn isomap_with_geodesics(graph: &NeighborhoodGraph, d: usize) -> Result<(Embedding, DistanceMatrix)> {
    graph.require_connected()?;
    let dg = geodesic_distances(graph, None)?;
    let mut e = classical_mds(&dg, d)?;
    e.method = EmbeddingMethod::Isomap;
    e.params.k = Some(graph.k());
    Ok((e, dg))
}

/// `ceil(sqrt(n))`, the default landmark count.
pub fn auto_landmark_count(n: usize) -> usize {
    let mut r = (n as f64).sqrt().ceil() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// `count` distinct indices drawn uniformly from `0..n`, sorted ascending.
pub fn random_landmarks(n: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || count > n {
        return Err(Error::param("n", format!("need 1 <= landmarks <= {n}, got {count}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, count).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Landmark Isomap on the kNN graph of `cloud`.
pub fn l_isomap(cloud: &PointCloud, landmarks: &[usize], k: usize, d: usize, pca_normalize: bool) -> Result<Embedding> {
    check_target_dim(cloud, d)?;
    let graph = build_knn_graph(cloud, k)?;
    l_isomap_on_graph(&graph, landmarks, d, pca_normalize)
}

/// Landmark Isomap on an existing graph. The result is tagged
/// `l-isomap-random`; callers passing skeleton landmarks retag it.
///
/// Landmarks are embedded by classical MDS on their geodesic distances.
/// Every other point `x` is placed by distance triangulation,
/// `y = -1/2 L# (delta_x - delta_mean)`, where `delta_x` holds the squared
/// geodesic distances from `x` to the landmarks, `delta_mean` is the mean
/// column of the squared landmark matrix and `L#` is the pseudoinverse
/// transpose of the landmark coordinates (rows `v_c / sqrt(lambda_c)`).
pub fn l_isomap_on_graph(graph: &NeighborhoodGraph, landmarks: &[usize], d: usize, pca_normalize: bool) -> Result<Embedding> {
    let n_all = graph.vertex_count();
    let nl = landmarks.len();
    if nl < d + 1 {
        return Err(Error::param(
            "landmarks",
            format!("need at least d + 1 = {} landmarks, got {nl}", d + 1),
        ));
    }
    if d == 0 {
        return Err(Error::param("d", "target dimension must be at least 1"));
    }
    let mut seen = vec![false; n_all];
    for &l in landmarks {
        if l >= n_all {
            return Err(Error::param("landmarks", format!("landmark {l} out of range")));
        }
        if std::mem::replace(&mut seen[l], true) {
            return Err(Error::param("landmarks", format!("landmark {l} listed twice")));
        }
    }
    graph.require_connected()?;

    let delta = geodesic_distances(graph, Some(landmarks))?;
    let raw: Vec<f64> = landmarks
        .iter()
        .enumerate()
        .flat_map(|(a, _)| landmarks.iter().map(move |&b| (a, b)))
        .map(|(a, b)| delta.get(a, b).expect("connected"))
        .collect();
    let mut block = vec![0.0; nl * nl];
    for a in 0..nl {
        for b in 0..nl {
            // Dijkstra from either end can differ in the last bits.
            block[a * nl + b] = if a == b { 0.0 } else { 0.5 * (raw[a * nl + b] + raw[b * nl + a]) };
        }
    }
    let eig = double_centered_eigen(nl, &block, d);

    // Column means of the squared landmark block.
    let mut mean_sq = vec![0.0; nl];
    for a in 0..nl {
        for b in 0..nl {
            mean_sq[b] += block[a * nl + b].powi(2);
        }
    }
    mean_sq.iter_mut().for_each(|m| *m /= nl as f64);

    let pinv: Vec<Vec<f64>> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .map(|(&lambda, v)| {
            if lambda > 0.0 {
                v.iter().map(|x| x / lambda.sqrt()).collect()
            } else {
                vec![0.0; nl]
            }
        })
        .collect();

    let mut coords = vec![0.0; n_all * d];
    for x in 0..n_all {
        for (c, row) in pinv.iter().enumerate() {
            let mut acc = 0.0;
            for a in 0..nl {
                let dx = delta.get(a, x).expect("connected");
                acc += row[a] * (dx * dx - mean_sq[a]);
            }
            coords[x * d + c] = -0.5 * acc;
        }
    }
    for (a, &l) in landmarks.iter().enumerate() {
        for (c, (&lambda, v)) in eig.values.iter().zip(&eig.vectors).enumerate() {
            coords[l * d + c] = v[a] * lambda.max(0.0).sqrt();
        }
    }
    center(d, &mut coords);
    if pca_normalize {
        pca_align(n_all, d, &mut coords);
    }

    let mut params = mds_params(&eig);
    params.k = Some(graph.k());
    params.pca_normalize = Some(pca_normalize);
    Ok(Embedding {
        coords: PointCloud::from_flat(d, coords)?,
        method: EmbeddingMethod::LIsomapRandom,
        landmarks: Some(landmarks.to_vec()),
        params,
    })
}
