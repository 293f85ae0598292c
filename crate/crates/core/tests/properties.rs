use proptest::prelude::*;

use skelmap::diagram_metrics::{bottleneck, brute_force_match, matching_cost, wasserstein};
use skelmap::embedding::{classical_mds, isomap, l_isomap, linear_project, Direction, Embedding, EmbeddingMethod, EmbeddingParams};
use skelmap::geometry::{build_knn_graph, geodesic_distances, generate_shape, DistanceKind, DistanceMatrix, PointCloud, ShapeSpec};
use skelmap::persistence::{brute_force_persistence, persistent_betti, vr_persistence, PersistenceDiagram, ScaleCap};
use skelmap::quality::{quality_report, residual_variance, QualityOptions};
use skelmap::skeleton::{build_skeleton, Eps, SkeletonParams};
use skelmap::tearing::{tear_graph, CutSpec, LocalityRadius};

fn cloud_strategy(min: usize, max: usize, dim: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), min..=max)
        .prop_map(|rows| PointCloud::from_rows(&rows).unwrap())
}

fn diagram_strategy(max: usize) -> impl Strategy<Value = PersistenceDiagram> {
    prop::collection::vec((0.0f64..5.0, 0.01f64..5.0), 0..=max)
        .prop_map(|v| PersistenceDiagram::new(1, f64::INFINITY, v.into_iter().map(|(b, l)| (b, b + l)).collect()))
}

fn mst_weights(dist: &DistanceMatrix) -> Vec<f64> {
    // Prim, independent of the union-find path in the library.
    let n = dist.rows();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut out = Vec::new();
    for step in 0..n {
        let v = (0..n).filter(|&v| !in_tree[v]).min_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        in_tree[v] = true;
        if step > 0 {
            out.push(best[v]);
        }
        for u in 0..n {
            if !in_tree[u] {
                best[u] = best[u].min(dist.get(v, u).unwrap());
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vr_matches_brute_force(cloud in cloud_strategy(2, 10, 2)) {
        let dist = DistanceMatrix::euclidean(&cloud);
        let fast = vr_persistence(&dist, 1, ScaleCap::Enclosing).unwrap();
        let slow = brute_force_persistence(&dist, 1).unwrap();
        for dim in 0..2 {
            prop_assert_eq!(fast[dim].sorted_pairs(), slow[dim].sorted_pairs());
        }
    }

    #[test]
    fn dim0_deaths_are_mst_weights(cloud in cloud_strategy(2, 12, 3)) {
        let dist = DistanceMatrix::euclidean(&cloud);
        let pd = vr_persistence(&dist, 0, ScaleCap::Enclosing).unwrap();
        let mut deaths: Vec<f64> = pd[0].finite_pairs().map(|p| p.1).collect();
        deaths.sort_by(f64::total_cmp);
        let mst: Vec<f64> = mst_weights(&dist).into_iter().filter(|&w| w > 0.0).collect();
        prop_assert_eq!(deaths, mst);
        prop_assert_eq!(pd[0].infinite_count(), 1);
    }

    #[test]
    fn persistence_scales(cloud in cloud_strategy(3, 10, 2), c in 0.5f64..4.0) {
        let dist = DistanceMatrix::euclidean(&cloud);
        let a = vr_persistence(&dist, 1, ScaleCap::Enclosing).unwrap();
        let b = vr_persistence(&dist.scaled(c), 1, ScaleCap::Enclosing).unwrap();
        for dim in 0..2 {
            let pa = a[dim].sorted_pairs();
            let pb = b[dim].sorted_pairs();
            prop_assert_eq!(pa.len(), pb.len());
            for ((b0, d0), (b1, d1)) in pa.into_iter().zip(pb) {
                prop_assert!((b0 * c - b1).abs() <= 1e-9 * (1.0 + b1.abs()));
                prop_assert!(d1 == d0 || (d0 * c - d1).abs() <= 1e-9 * (1.0 + d1.abs()));
            }
        }
    }

    #[test]
    fn betti_monotone_in_threshold(d in diagram_strategy(8), t0 in 0.0f64..5.0, dt in 0.0f64..5.0) {
        prop_assert!(persistent_betti(&d, Some(t0)).count >= persistent_betti(&d, Some(t0 + dt)).count);
    }

    #[test]
    fn metrics_match_brute_force(a in diagram_strategy(4), b in diagram_strategy(4)) {
        for p in [1.0, 2.0, f64::INFINITY] {
            let fast = if p.is_infinite() { bottleneck(&a, &b) } else { wasserstein(&a, &b, p) }.unwrap();
            let slow = brute_force_match(&a, &b, p).unwrap();
            prop_assert!((fast.0 - slow.0).abs() <= 1e-9, "p={} fast={} slow={}", p, fast.0, slow.0);
            prop_assert!((matching_cost(&a, &b, &fast.1.assignments, p) - fast.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn metric_axioms(a in diagram_strategy(6), b in diagram_strategy(6), c in diagram_strategy(6)) {
        let w = |x: &PersistenceDiagram, y: &PersistenceDiagram| wasserstein(x, y, 2.0).unwrap().0;
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() <= 1e-9);
        prop_assert_eq!(w(&a, &a), 0.0);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-9);
        if !a.is_empty() || !b.is_empty() {
            prop_assert!(bottleneck(&a, &b).unwrap().0 <= w(&a, &b) + 1e-12);
        }
    }

    #[test]
    fn mds_recovers_planar_distances(cloud in cloud_strategy(3, 20, 2)) {
        let dist = DistanceMatrix::euclidean(&cloud);
        let e = classical_mds(&dist, 2).unwrap();
        let back = e.distances();
        for (x, y) in dist.values().iter().zip(back.values()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn projection_is_one_lipschitz(cloud in cloud_strategy(2, 15, 4), v in prop::collection::vec(-1.0f64..1.0, 4)) {
        prop_assume!(v.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let e = linear_project(&cloud, &Direction::new(&v).unwrap()).unwrap();
        let (a, b) = (DistanceMatrix::euclidean(&cloud), e.distances());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(*y <= x + 1e-12);
        }
    }

    #[test]
    fn knn_permutation_invariant(cloud in cloud_strategy(6, 25, 3), seed in any::<u64>(), k in 1usize..5) {
        let n = cloud.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = cloud.select(&perm).unwrap();
        let g = build_knn_graph(&cloud, k).unwrap();
        let h = build_knn_graph(&shuffled, k).unwrap();
        let mut a: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.i.min(e.j), e.i.max(e.j))).collect();
        let mut b: Vec<(usize, usize)> = h.edges().iter().map(|e| {
            let (i, j) = (perm[e.i], perm[e.j]);
            (i.min(j), i.max(j))
        }).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn geodesics_are_a_metric(cloud in cloud_strategy(4, 20, 2)) {
        let g = build_knn_graph(&cloud, 3).unwrap();
        let d = geodesic_distances(&g, None).unwrap();
        let n = cloud.len();
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), Some(0.0));
            for j in 0..n {
                for k in 0..n {
                    if let (Some(ij), Some(jk), Some(ik)) = (d.get(i, j), d.get(j, k), d.get(i, k)) {
                        prop_assert!(ik <= ij + jk + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn rv_invariant_under_similarity(cloud in cloud_strategy(4, 15, 2), angle in 0.0f64..6.3, c in 0.1f64..10.0, tx in -5.0f64..5.0) {
        let dx = DistanceMatrix::euclidean(&cloud);
        prop_assume!(dx.values().iter().any(|&v| (v - dx.values()[1]).abs() > 1e-6));
        let moved: Vec<[f64; 2]> = cloud.points().map(|p| {
            let (s, co) = angle.sin_cos();
            [c * (co * p[0] - s * p[1]) + tx, c * (s * p[0] + co * p[1])]
        }).collect();
        let emb = PointCloud::from_rows(&moved).unwrap();
        let rv = residual_variance(&dx, &DistanceMatrix::euclidean(&emb)).unwrap();
        prop_assert!(rv <= 1e-9, "rv = {}", rv);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tearing_properties(seed in 0u64..1000, edge in any::<prop::sample::Index>(), t in 0.0f64..=1.0, r in 0.05f64..3.0) {
        let cloud = generate_shape(&ShapeSpec::new("cylinder_holes(3)".parse().unwrap(), 400, 0.0), seed).unwrap();
        let g = build_knn_graph(&cloud, 8).unwrap();
        prop_assume!(g.is_connected());
        let s = build_skeleton(&cloud, &g, &SkeletonParams { n: 6, eps: Eps::Value(0.6), ..Default::default() }).unwrap();
        prop_assume!(!s.edges.is_empty());
        let (u, v, _) = s.edges[edge.index(s.edges.len())];
        let cut = |radius| CutSpec { skeleton_edge: (u, v), t, locality_radius: radius };

        let first = tear_graph(&cloud, &g, &s, &cut(LocalityRadius::Value(r))).unwrap();
        let again = tear_graph(&cloud, &first.torn_graph, &s, &cut(LocalityRadius::Value(r))).unwrap();
        prop_assert_eq!(again.removed_count, 0);

        let wider = tear_graph(&cloud, &g, &s, &cut(LocalityRadius::Value(r * 1.5))).unwrap();
        let global = tear_graph(&cloud, &g, &s, &cut(LocalityRadius::Global)).unwrap();
        prop_assert!(first.removed_count <= wider.removed_count);
        prop_assert!(wider.removed_count <= global.removed_count);

        let before = geodesic_distances(&g, None).unwrap();
        let after = geodesic_distances(&first.torn_graph, None).unwrap();
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                let b = before.get(i, j).unwrap();
                prop_assert!(after.get(i, j).is_none_or(|a| a >= b - 1e-12));
            }
        }
    }
}

#[test]
fn isomap_outputs_are_centered() {
    let cloud = generate_shape(&ShapeSpec::new("swiss_roll".parse().unwrap(), 500, 0.0), 3).unwrap();
    let landmarks: Vec<usize> = (0..500).step_by(17).collect();
    for e in [isomap(&cloud, 8, 2).unwrap(), l_isomap(&cloud, &landmarks, 8, 2, true).unwrap(), l_isomap(&cloud, &landmarks, 8, 2, false).unwrap()] {
        let mean = e.coords.mean();
        assert!(mean.iter().all(|m| m.abs() < 1e-9), "{:?} {mean:?}", e.method);
    }
}

#[test]
fn identical_embedding_has_zero_wasserstein() {
    let cloud = generate_shape(&ShapeSpec::new("circle".parse().unwrap(), 120, 0.05), 1).unwrap();
    let emb = Embedding {
        coords: cloud.clone(),
        method: EmbeddingMethod::LinearProjection,
        landmarks: None,
        params: EmbeddingParams::default(),
    };
    let dx = DistanceMatrix::euclidean(&cloud);
    assert_eq!(dx.kind(), DistanceKind::Euclidean);
    let opts = QualityOptions { subsample_size: 64, ..Default::default() };
    let q = quality_report(&cloud, &emb, &dx, &opts).unwrap();
    assert_eq!((q.wd0, q.wd1, q.rv), (0.0, 0.0, 0.0));
    assert_eq!(q.pb1_before, q.pb1_after);
    assert_eq!(q, quality_report(&cloud, &emb, &dx, &opts).unwrap());
}
