mod common;

use common::*;
use lapreg::features::FeatureSet;
use lapreg::graph::{knn_heat_graph, laplacian_quadratic, GraphModel};
use rand::Rng;

#[test]
fn knn_graph_matches_brute_force() {
    let mut r = rng(11);
    let points = random_points(&mut r, 100, 3);
    let f = FeatureSet::from_rows(&points).unwrap();
    let g = knn_heat_graph(&f, 5, Some(0.02)).unwrap();
    let oracle = brute_force_weights(&points, 5, 0.02);
    let w = g.weights_dense();
    for i in 0..100 {
        for j in 0..100 {
            assert!((w[(i, j)] - oracle[i][j]).abs() <= 1e-15, "W[{i},{j}]");
        }
        let nnz = oracle[i].iter().filter(|&&v| v > 0.0).count();
        assert_eq!(g.neighbors(i).0.len(), nnz);
        assert!((5..100).contains(&nnz));
    }
}

#[test]
fn default_epsilon_is_mean_kth_neighbor_distance() {
    let mut r = rng(12);
    let points = random_points(&mut r, 40, 2);
    let f = FeatureSet::from_rows(&points).unwrap();
    let g = knn_heat_graph(&f, 4, None).unwrap();
    let mean: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| sq_dist(p, q))
                .collect();
            d.sort_by(f64::total_cmp);
            d[3]
        })
        .sum::<f64>()
        / 40.0;
    assert!((g.epsilon() - mean).abs() <= 1e-15 * mean.max(1.0));
    assert_eq!(g.k(), 4);
}

#[test]
fn quadratic_form_matches_double_sum() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let n = r.random_range(2..=50);
        let points = random_points(&mut r, n, 3);
        let f = FeatureSet::from_rows(&points).unwrap();
        let g = knn_heat_graph(&f, r.random_range(1..n), None).unwrap();
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let w = g.weights_dense();
        let mut oracle = 0.0;
        for i in 0..n {
            for j in 0..n {
                oracle += 0.5 * w[(i, j)] * (x[i] - x[j]).powi(2);
            }
        }
        let got = laplacian_quadratic(&g, &x).unwrap();
        assert!((got - oracle).abs() <= 1e-10 * oracle.abs().max(1e-300), "{got} vs {oracle}");
        assert!(got >= -1e-10 * dot(&x, &x));
    }
}

#[test]
fn two_node_quadratic_and_constants() {
    let g = GraphModel::from_edges(2, &[(0, 1, 0.3)]).unwrap();
    assert!((laplacian_quadratic(&g, &[2.0, -1.0]).unwrap() - 0.3 * 9.0).abs() < 1e-15);
    assert_eq!(laplacian_quadratic(&g, &[4.0, 4.0]).unwrap(), 0.0);
    assert!(laplacian_quadratic(&g, &[1.0]).is_err());
}

#[test]
fn constants_span_the_nullspace() {
    let mut r = rng(13);
    let points = random_points(&mut r, 60, 4);
    let g = knn_heat_graph(&FeatureSet::from_rows(&points).unwrap(), 6, None).unwrap();
    let l1 = g.laplacian_mul_vec(&[1.0; 60]);
    let max_deg = g.degrees().iter().fold(0.0f64, |m, &d| m.max(d));
    assert!(inf_norm(&l1) <= 1e-12 * max_deg);
    let l = laplacian_from_weights(&to_rows(g.weights_dense().as_ref()));
    let lib = g.laplacian_dense();
    for i in 0..60 {
        for j in 0..60 {
            assert_eq!(lib[(i, j)], l[i][j]);
        }
    }
}
