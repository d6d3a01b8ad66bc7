//! Oracles written independently of the library: naive dense arithmetic,
//! Gaussian elimination and brute-force neighbor search.

#![allow(dead_code)]

use faer::{Mat, MatRef};
use lapreg::features::FeatureSet;
use lapreg::graph::{knn_heat_graph, GraphModel};
use lapreg::kernel::KernelGrams;
use lapreg::solvers::LabeledItem;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_rows(m: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            let aip = a[i][p];
            for j in 0..m {
                c[i][j] += aip * b[p][j];
            }
        }
    }
    c
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖∞ / (‖b‖∞ + 1e-12)`.
pub fn rel_inf_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    inf_norm(&d) / (inf_norm(b) + 1e-12)
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        for row in col + 1..n {
            let f = aug[row][col] / aug[col][col];
            if f != 0.0 {
                for c in col..n + m {
                    aug[row][c] -= f * aug[col][c];
                }
            }
        }
    }
    let mut x = vec![vec![0.0; m]; n];
    for row in (0..n).rev() {
        for c in 0..m {
            let mut s = aug[row][n + c];
            for k in row + 1..n {
                s -= aug[row][k] * x[k][c];
            }
            x[row][c] = s / aug[row][row];
        }
    }
    x
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Dense weights of the max-symmetrized k-NN heat graph, by sorting every
/// row of the full distance table.
pub fn brute_force_weights(points: &[Vec<f64>], k: usize, epsilon: f64) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_dist(&points[i], &points[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, j) in &others[..k] {
            let v = (-d / (4.0 * epsilon)).exp();
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    w
}

pub fn laplacian_from_weights(w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        let d: f64 = w[i].iter().sum();
        for j in 0..n {
            l[i][j] = -w[i][j];
        }
        l[i][i] = d;
    }
    l
}

pub fn gaussian_gram_naive(points: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| points.iter().map(|q| (-sq_dist(p, q) / (2.0 * sigma * sigma)).exp()).collect())
        .collect()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// A random problem drawn from the ranges used by the equivalence checks.
pub struct Instance {
    pub points: Vec<Vec<f64>>,
    pub features: FeatureSet,
    pub graph: GraphModel,
    pub grams: KernelGrams,
    pub item: LabeledItem,
    pub sigma: f64,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn lambda(&self) -> f64 {
        self.grams.lambda()
    }

    pub fn gamma(&self) -> f64 {
        self.grams.gamma()
    }

    pub fn k(&self) -> Vec<Vec<f64>> {
        to_rows(self.grams.k())
    }

    pub fn l(&self) -> Vec<Vec<f64>> {
        to_rows(self.graph.laplacian_dense().as_ref())
    }

    /// `K_S` as an `n × ℓ` table.
    pub fn k_s(&self) -> Vec<Vec<f64>> {
        let k = self.grams.k();
        (0..self.n())
            .map(|i| self.item.label_idx.iter().map(|&s| k[(i, s)]).collect())
            .collect()
    }

    /// `(K_S K_Sᵀ + λK + γKLK, K_S y)` by naive arithmetic.
    pub fn normal_equations(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (k, l, ks) = (self.k(), self.l(), self.k_s());
        let kst: Vec<Vec<f64>> = (0..self.item.len()).map(|j| ks.iter().map(|r| r[j]).collect()).collect();
        let kk = matmul(&ks, &kst);
        let klk = matmul(&matmul(&k, &l), &k);
        let n = self.n();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| kk[i][j] + self.lambda() * k[i][j] + self.gamma() * klk[i][j])
                    .collect()
            })
            .collect();
        (a, matvec(&ks, &self.item.y))
    }
}

pub struct Ranges {
    pub n: (usize, usize),
    pub d: (usize, usize),
}

pub const EQUIVALENCE_RANGES: Ranges = Ranges { n: (20, 200), d: (2, 20) };

/// `n, d` uniform in the ranges, `ℓ ∈ [1, n/2]`, `λ` log-uniform in
/// `[1e-4, 1]`, `γ ∈ [0, 1]`, points uniform in the unit cube, `σ` a random
/// fraction of the cube diagonal, `k ∈ [1, min(10, n−1)]`.
pub fn random_instance(seed: u64, ranges: &Ranges) -> Instance {
    let mut rng = rng(seed);
    let n = rng.random_range(ranges.n.0..=ranges.n.1);
    let d = rng.random_range(ranges.d.0..=ranges.d.1);
    let l = rng.random_range(1..=(n / 2).max(1));
    let lambda = 10f64.powf(rng.random_range(-4.0..=0.0));
    let gamma = rng.random_range(0.0..=1.0);
    let sigma = rng.random_range(0.15..=0.6) * (d as f64).sqrt();
    let k = rng.random_range(1..=10.min(n - 1));
    let points = random_points(&mut rng, n, d);
    let features = FeatureSet::from_rows(&points).unwrap();
    let graph = knn_heat_graph(&features, k, None).unwrap();
    let grams = KernelGrams::build(&features, &graph, sigma, lambda, gamma).unwrap();
    let mut label_idx = sample(&mut rng, n, l).into_vec();
    label_idx.sort_unstable();
    let y = (0..l).map(|_| rng.random_range(1.0..=5.0)).collect();
    let item = LabeledItem::new(0, label_idx, y).unwrap();
    Instance {
        points,
        features,
        graph,
        grams,
        item,
        sigma,
    }
}

pub fn mat_from_rows(rows: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}
