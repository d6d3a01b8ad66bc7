//! k-nearest-neighbor graphs with heat-kernel weights and their
//! combinatorial Laplacian `L = D − W`.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::features::FeatureSet;

/// Exact pairwise squared Euclidean distances between feature vectors.
///
/// Each unordered pair is evaluated once, so the result is exactly
/// symmetric with a zero diagonal.
pub fn pairwise_sq_dists(features: &FeatureSet) -> Mat<f64> {
    let (n, d) = (features.len(), features.dim());
    let v = features.vectors();
    // Row-major copy so the inner loop is contiguous.
    let mut rows = vec![0.0; n * d];
    for i in 0..n {
        for k in 0..d {
            rows[i * d + k] = v[(i, k)];
        }
    }
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        let a = &rows[i * d..(i + 1) * d];
        for j in i + 1..n {
            let b = &rows[j * d..(j + 1) * d];
            let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

/// Symmetric weight graph in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphModel {
    n: usize,
    k: usize,
    epsilon: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

impl GraphModel {
    /// Builds a graph from undirected weighted edges. Each `(i, j, w)` sets
    /// both `W_ij` and `W_ji`; repeated edges keep the larger weight.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::arg(format!("edge ({i}, {j}) outside {n} nodes")));
            }
            if i == j {
                return Err(Error::arg(format!("self loop on node {i}")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::arg(format!("edge ({i}, {j}) has weight {w}")));
            }
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        Ok(Self::from_adjacency(adj, 0, f64::NAN))
    }

    fn from_adjacency(mut adj: Vec<Vec<(usize, f64)>>, k: usize, epsilon: f64) -> Self {
        let n = adj.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let (mut cols, mut weights, mut degrees) = (Vec::new(), Vec::new(), Vec::with_capacity(n));
        row_ptr.push(0);
        for row in &mut adj {
            row.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
            row.dedup_by_key(|e| e.0);
            degrees.push(row.iter().map(|e| e.1).sum());
            for &(j, w) in row.iter() {
                cols.push(j);
                weights.push(w);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            k,
            epsilon,
            row_ptr,
            cols,
            weights,
            degrees,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Neighbor count used at construction (0 for explicit edge lists).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Heat-kernel bandwidth used at construction (NaN for explicit edge
    /// lists).
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Neighbors of `i` (ascending) and the corresponding weights.
    pub fn neighbors(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[span.clone()], &self.weights[span])
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (cols, w) = self.neighbors(i);
        cols.binary_search(&j).map_or(0.0, |k| w[k])
    }

    /// Number of stored (directed) nonzeros of `W`.
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn weights_dense(&self) -> Mat<f64> {
        let mut w = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.neighbors(i);
            for (&j, &v) in cols.iter().zip(vals) {
                w[(i, j)] = v;
            }
        }
        w
    }

    pub fn laplacian_dense(&self) -> Mat<f64> {
        let mut l = self.weights_dense();
        for i in 0..self.n {
            for j in 0..self.n {
                l[(i, j)] = -l[(i, j)];
            }
            l[(i, i)] = self.degrees[i];
        }
        l
    }

    /// `L f`.
    pub fn laplacian_mul_vec(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.neighbors(i);
                let wf: f64 = cols.iter().zip(vals).map(|(&j, &w)| w * f[j]).sum();
                self.degrees[i] * f[i] - wf
            })
            .collect()
    }

    /// `L X` for a dense `X` with `n` rows.
    pub fn laplacian_mul(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut out = Mat::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let col = x.col(c);
            for i in 0..self.n {
                let (cols, vals) = self.neighbors(i);
                let mut s = self.degrees[i] * col[i];
                for (&j, &w) in cols.iter().zip(vals) {
                    s -= w * col[j];
                }
                out[(i, c)] = s;
            }
        }
        out
    }

    /// Coordinate-list CSV `i,j,weight` of the upper triangle of `W`.
    pub fn write_edges_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "weight"])?;
        for i in 0..self.n {
            let (cols, vals) = self.neighbors(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    w.write_record(&[i.to_string(), j.to_string(), v.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// k-NN graph with heat-kernel weights `W_ij = exp(−‖v_i − v_j‖² / 4ε)`.
///
/// Each node links to its `k` nearest neighbors (distance ties broken by the
/// lower index); the directed relation is symmetrized by `W ← max(W, Wᵀ)`.
/// Without an explicit `epsilon` the bandwidth is the mean, over nodes, of the
/// squared distance to the k-th nearest neighbor.
pub fn knn_heat_graph(features: &FeatureSet, k: usize, epsilon: Option<f64>) -> Result<GraphModel> {
    knn_heat_graph_from_dists(pairwise_sq_dists(features).as_ref(), k, epsilon)
}

/// [`knn_heat_graph`] over a precomputed squared-distance matrix.
pub fn knn_heat_graph_from_dists(
    sq_dists: MatRef<'_, f64>,
    k: usize,
    epsilon: Option<f64>,
) -> Result<GraphModel> {
    let n = sq_dists.nrows();
    if k == 0 || k >= n {
        return Err(Error::arg(format!("k must satisfy 1 <= k < n = {n}, got {k}")));
    }
    if let Some(e) = epsilon {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::arg(format!("epsilon must be > 0, got {e}")));
        }
    }

    let mut knn: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (sq_dists[(i, j)], j)));
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k - 1, by_dist);
        cand[..k].sort_unstable_by(by_dist);
        knn.push(cand[..k].iter().map(|&(d, j)| (j, d)).collect());
    }

    let epsilon = match epsilon {
        Some(e) => e,
        None => {
            let e = knn.iter().map(|nb| nb[k - 1].1).sum::<f64>() / n as f64;
            if e.is_nan() || e <= 0.0 {
                return Err(Error::arg(
                    "all k-th neighbor distances are zero (duplicate points); \
                     supply epsilon explicitly",
                ));
            }
            e
        }
    };

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2 * k); n];
    for (i, nb) in knn.iter().enumerate() {
        for &(j, d) in nb {
            let w = (-d / (4.0 * epsilon)).exp();
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    Ok(GraphModel::from_adjacency(adj, k, epsilon))
}

/// The Laplacian quadratic form `fᵀ L f`.
pub fn laplacian_quadratic(graph: &GraphModel, f: &[f64]) -> Result<f64> {
    if f.len() != graph.n() {
        return Err(Error::arg(format!(
            "signal has length {} but the graph has {} nodes",
            f.len(),
            graph.n()
        )));
    }
    Ok(f.iter().zip(graph.laplacian_mul_vec(f)).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_heat_weight() {
        let f = FeatureSet::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let g = knn_heat_graph(&f, 1, Some(1.0)).unwrap();
        assert!((g.weight(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(g.weight(0, 1), g.weight(1, 0));
        assert_eq!(g.weight(0, 0), 0.0);
        assert!((g.weight(0, 1) - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn default_epsilon_is_mean_kth_distance() {
        // points on a line at 0, 1, 3: 1-NN squared distances 1, 1, 4
        let f = FeatureSet::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let g = knn_heat_graph(&f, 1, None).unwrap();
        assert!((g.epsilon() - 2.0).abs() < 1e-15);
        // 0-1 mutual, 2 -> 1 added by symmetrization
        assert!(g.weight(1, 2) > 0.0 && g.weight(0, 2) == 0.0);
    }

    #[test]
    fn duplicates_need_explicit_epsilon() {
        let f = FeatureSet::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(knn_heat_graph(&f, 1, None), Err(Error::Argument(_))));
        let g = knn_heat_graph(&f, 1, Some(0.5)).unwrap();
        assert_eq!(g.weight(0, 1), 1.0);
    }

    #[test]
    fn k_must_be_below_n() {
        let f = FeatureSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(knn_heat_graph(&f, 2, None).is_err());
        assert!(knn_heat_graph(&f, 0, None).is_err());
    }

    #[test]
    fn two_node_quadratic() {
        let g = GraphModel::from_edges(2, &[(0, 1, 0.7)]).unwrap();
        let q = laplacian_quadratic(&g, &[3.0, -1.0]).unwrap();
        assert!((q - 0.7 * 16.0).abs() < 1e-12);
        assert_eq!(laplacian_quadratic(&g, &[2.0, 2.0]).unwrap(), 0.0);
        assert!(laplacian_quadratic(&g, &[1.0]).is_err());
    }

    #[test]
    fn ties_prefer_lower_index() {
        // node 0 is equidistant from 1 and 2
        let f = FeatureSet::from_rows(&[vec![0.0], vec![-1.0], vec![1.0]]).unwrap();
        let g = knn_heat_graph(&f, 1, Some(1.0)).unwrap();
        assert!(g.weight(0, 1) > 0.0);
        // 2's nearest is 0, so 0-2 appears only through symmetrization
        assert!(g.weight(0, 2) > 0.0);
        assert_eq!(g.weight(1, 2), 0.0);
    }

    #[test]
    fn edges_csv() {
        let g = GraphModel::from_edges(3, &[(0, 1, 0.5), (2, 1, 0.25)]).unwrap();
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j,weight\n0,1,0.5\n1,2,0.25\n");
    }
}
