//! The three per-item backends and the whole-matrix driver.
//!
//! Every backend predicts one item column at a time from the users that rated
//! it. Item-independent work is split into [`precompute`], so the per-item
//! cost of each method is what the timing tables compare:
//!
//! | method | per-item system | per-item cost |
//! |--------|-----------------|---------------|
//! | `Ori`  | `(K_S K_Sᵀ + λK + γKLK) a = K_S y`, `n × n` | `O(n³)` |
//! | `GBa`  | `(QQᵀ + M₀) c = Q y`, `k_b × k_b`, `Q = U_kᵀ K_S` | `O(n k_b ℓ + k_b³)` |
//! | `Prop` | `(I + R_SS) d = y`, `ℓ × ℓ` | `O(ℓ³ + nℓ)` |

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{RatingMatrix, RatingRange};
use crate::error::{Error, Result};
use crate::graph::GraphModel;
use crate::kernel::{check_labels, kernel_times_laplacian, KernelGrams};
use crate::linalg::{cholesky_solve_in_place, solve_psd_in_place, Lu};
use crate::probe;

/// Prediction backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Dense `n × n` normal equations in the `K` basis.
    Ori,
    /// Normal equations restricted to the first `kb` Laplacian eigenvectors.
    GBa { kb: usize },
    /// `ℓ × ℓ` solve in the equivalent-kernel basis.
    Prop,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ori => f.write_str("Ori"),
            Method::GBa { kb } => write!(f, "GBa{kb}"),
            Method::Prop => f.write_str("Prop"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `Ori`, `Prop`, `GBa<k>` and `GBa(<k>)`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "ori" => return Ok(Method::Ori),
            "prop" => return Ok(Method::Prop),
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("gba") {
            let rest = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .unwrap_or(rest);
            if let Ok(kb) = rest.parse::<usize>() {
                if kb >= 1 {
                    return Ok(Method::GBa { kb });
                }
            }
        }
        Err(Error::invalid(format!(
            "unknown method {s:?} (expected Ori, Prop or GBa<k>)"
        )))
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The labeled users of one item.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub item_index: usize,
    pub label_idx: Vec<usize>,
    pub y: Vec<f64>,
}

impl LabeledItem {
    pub fn new(item_index: usize, label_idx: Vec<usize>, y: Vec<f64>) -> Result<Self> {
        if label_idx.len() != y.len() {
            return Err(Error::arg(format!(
                "{} label indices but {} values",
                label_idx.len(),
                y.len()
            )));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite label value {v}")));
        }
        Ok(Self {
            item_index,
            label_idx,
            y,
        })
    }

    /// Column `item` of `train`.
    pub fn from_column(train: &RatingMatrix, item: usize) -> Self {
        let (users, values) = train.item_labels(item);
        Self {
            item_index: item,
            label_idx: users.to_vec(),
            y: values.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Full eigensystem of a graph Laplacian, eigenvalues ascending.
///
/// Each eigenvector is signed so that its first component with magnitude
/// above `1e-12` is positive.
#[derive(Debug, Clone)]
pub struct LaplacianEigen {
    values: Vec<f64>,
    vectors: Mat<f64>,
}

impl LaplacianEigen {
    pub fn compute(graph: &GraphModel) -> Result<Self> {
        let l = graph.laplacian_dense();
        let evd = l.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numeric {
            message: format!("Laplacian eigendecomposition failed: {e:?}"),
            condition: f64::INFINITY,
        })?;
        let n = graph.n();
        let s = evd.S().column_vector();
        let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let mut vectors = evd.U().to_owned();
        for k in 0..n {
            let first = (0..n).map(|i| vectors[(i, k)]).find(|v| v.abs() > 1e-12);
            if first.is_some_and(|v| v < 0.0) {
                for i in 0..n {
                    vectors[(i, k)] = -vectors[(i, k)];
                }
            }
        }
        Ok(Self { values, vectors })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    /// The first `kb` eigenvectors.
    pub fn leading(&self, kb: usize) -> MatRef<'_, f64> {
        self.vectors.as_ref().subcols(0, kb)
    }
}

enum Cache {
    Ori {
        b: Mat<f64>,
    },
    GBa {
        u: Mat<f64>,
        p: Mat<f64>,
        m0: Mat<f64>,
        values: Vec<f64>,
    },
    Prop,
}

/// Item-independent work for one method over one `(K, L)` pair.
pub struct SolverState<'a> {
    method: Method,
    grams: &'a KernelGrams,
    graph: &'a GraphModel,
    cache: Cache,
    precompute_seconds: f64,
}

impl fmt::Debug for SolverState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverState")
            .field("method", &self.method)
            .field("n", &self.n())
            .field("precompute_seconds", &self.precompute_seconds)
            .finish()
    }
}

impl<'a> SolverState<'a> {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn n(&self) -> usize {
        self.grams.n()
    }

    pub fn grams(&self) -> &'a KernelGrams {
        self.grams
    }

    pub fn graph(&self) -> &'a GraphModel {
        self.graph
    }

    /// Wall time spent in [`precompute`], excluding the gram construction.
    pub fn precompute_seconds(&self) -> f64 {
        self.precompute_seconds
    }

    /// `B = λK + γKLK` (Ori only).
    pub fn ori_system(&self) -> Option<MatRef<'_, f64>> {
        match &self.cache {
            Cache::Ori { b } => Some(b.as_ref()),
            _ => None,
        }
    }

    /// `(U_kb, eigenvalues)` (GBa only).
    pub fn gba_basis(&self) -> Option<(MatRef<'_, f64>, &[f64])> {
        match &self.cache {
            Cache::GBa { u, values, .. } => Some((u.as_ref(), values)),
            _ => None,
        }
    }

    /// `M₀ = U_kᵀ B U_k` (GBa only).
    pub fn gba_reduced_system(&self) -> Option<MatRef<'_, f64>> {
        match &self.cache {
            Cache::GBa { m0, .. } => Some(m0.as_ref()),
            _ => None,
        }
    }
}

fn check_sizes(grams: &KernelGrams, graph: &GraphModel) -> Result<()> {
    if grams.n() != graph.n() {
        return Err(Error::arg(format!(
            "grams have {} nodes but the graph has {}",
            grams.n(),
            graph.n()
        )));
    }
    Ok(())
}

/// Does the item-independent work for `method`.
///
/// GBa computes the full Laplacian eigensystem; use
/// [`precompute_gba_with`] to share one decomposition across bandwidths.
pub fn precompute<'a>(
    method: Method,
    grams: &'a KernelGrams,
    graph: &'a GraphModel,
) -> Result<SolverState<'a>> {
    check_sizes(grams, graph)?;
    let start = Instant::now();
    let cache = match method {
        Method::Prop => Cache::Prop,
        Method::Ori => {
            let k = grams.k();
            let kl = kernel_times_laplacian(k, graph);
            let b = k * grams.lambda() + (&kl * k) * grams.gamma();
            Cache::Ori { b }
        }
        Method::GBa { kb } => {
            check_kb(kb, graph.n())?;
            let eigen = LaplacianEigen::compute(graph)?;
            return gba_state(kb, grams, graph, &eigen, start);
        }
    };
    Ok(SolverState {
        method,
        grams,
        graph,
        cache,
        precompute_seconds: start.elapsed().as_secs_f64(),
    })
}

/// GBa precompute reusing an existing eigensystem of `graph`'s Laplacian.
pub fn precompute_gba_with<'a>(
    kb: usize,
    grams: &'a KernelGrams,
    graph: &'a GraphModel,
    eigen: &LaplacianEigen,
) -> Result<SolverState<'a>> {
    check_sizes(grams, graph)?;
    check_kb(kb, graph.n())?;
    if eigen.values.len() != graph.n() {
        return Err(Error::arg("eigensystem does not match the graph"));
    }
    gba_state(kb, grams, graph, eigen, Instant::now())
}

fn check_kb(kb: usize, n: usize) -> Result<()> {
    if kb == 0 || kb > n {
        return Err(Error::arg(format!("k_b must be in 1..={n}, got {kb}")));
    }
    Ok(())
}

fn gba_state<'a>(
    kb: usize,
    grams: &'a KernelGrams,
    graph: &'a GraphModel,
    eigen: &LaplacianEigen,
    start: Instant,
) -> Result<SolverState<'a>> {
    let u = eigen.leading(kb).to_owned();
    let p = grams.k() * &u;
    let lp = graph.laplacian_mul(p.as_ref());
    let mut m0 = (u.transpose() * &p) * grams.lambda() + (p.transpose() * &lp) * grams.gamma();
    for j in 0..kb {
        for i in j + 1..kb {
            let v = 0.5 * (m0[(i, j)] + m0[(j, i)]);
            m0[(i, j)] = v;
            m0[(j, i)] = v;
        }
    }
    Ok(SolverState {
        method: Method::GBa { kb },
        grams,
        graph,
        cache: Cache::GBa {
            u,
            p,
            m0,
            values: eigen.values[..kb].to_vec(),
        },
        precompute_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Method-specific solution coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// `a` with `f* = K a`.
    Kernel(Vec<f64>),
    /// `c` with `f* = K U_kb c`.
    Bandlimited(Vec<f64>),
    /// `d` with `f* = R_S d`.
    Equivalent { label_idx: Vec<usize>, d: Vec<f64> },
}

/// One predicted item column.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub f_star: Vec<f64>,
    pub coefficients: Coefficients,
    /// Wall time of the per-item solve in seconds.
    pub seconds: f64,
}

fn check_item(state: &SolverState<'_>, item: &LabeledItem, want: &str) -> Result<()> {
    let ok = matches!(
        (want, state.method),
        ("Ori", Method::Ori) | ("GBa", Method::GBa { .. }) | ("Prop", Method::Prop)
    );
    if !ok {
        return Err(Error::arg(format!(
            "{want} solve requested on a {} state",
            state.method
        )));
    }
    if item.is_empty() {
        return Err(Error::arg(format!(
            "item {} has no labels",
            item.item_index
        )));
    }
    if item.label_idx.len() != item.y.len() {
        return Err(Error::arg("label indices and values differ in length"));
    }
    check_labels(&item.label_idx, state.n())
}

fn numeric(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric {
            message: format!("{what} produced non-finite values"),
            condition: f64::INFINITY,
        })
    }
}

/// Solves the dense normal equations for one item.
pub fn ori_predict_item(state: &SolverState<'_>, item: &LabeledItem) -> Result<Prediction> {
    check_item(state, item, "Ori")?;
    let Cache::Ori { b } = &state.cache else {
        unreachable!()
    };
    let start = Instant::now();
    let k = state.grams.k();
    let n = state.n();
    let l = item.len();
    let ks = Mat::from_fn(n, l, |i, j| k[(i, item.label_idx[j])]);
    let a_mat = &ks * ks.transpose() + b;
    let y = Mat::from_fn(l, 1, |i, _| item.y[i]);
    let mut rhs = &ks * &y;
    solve_psd_in_place(a_mat.as_ref(), &mut rhs, "K_S K_Sᵀ + λK + γKLK")?;
    let f = k * &rhs;
    let a: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    let f_star: Vec<f64> = (0..n).map(|i| f[(i, 0)]).collect();
    let seconds = start.elapsed().as_secs_f64();
    numeric("Ori solve", &f_star)?;
    Ok(Prediction {
        f_star,
        coefficients: Coefficients::Kernel(a),
        seconds,
    })
}

/// Solves the bandlimited normal equations for one item.
pub fn gba_predict_item(state: &SolverState<'_>, item: &LabeledItem) -> Result<Prediction> {
    check_item(state, item, "GBa")?;
    let Cache::GBa { u, p, m0, .. } = &state.cache else {
        unreachable!()
    };
    let start = Instant::now();
    let k = state.grams.k();
    let (n, l, kb) = (state.n(), item.len(), u.ncols());
    let ks = Mat::from_fn(n, l, |i, j| k[(i, item.label_idx[j])]);
    let q = u.transpose() * &ks;
    let a_mat = &q * q.transpose() + m0;
    let y = Mat::from_fn(l, 1, |i, _| item.y[i]);
    let mut c = &q * &y;
    solve_psd_in_place(a_mat.as_ref(), &mut c, "QQᵀ + M₀")?;
    let f = p * &c;
    let f_star: Vec<f64> = (0..n).map(|i| f[(i, 0)]).collect();
    let seconds = start.elapsed().as_secs_f64();
    numeric("GBa solve", &f_star)?;
    Ok(Prediction {
        f_star,
        coefficients: Coefficients::Bandlimited((0..kb).map(|i| c[(i, 0)]).collect()),
        seconds,
    })
}

/// Solves `(I + R_SS) d = y` for one item and expands `f* = R_S d`.
///
/// Only `ℓ × ℓ` and length-`n` buffers are allocated.
pub fn prop_predict_item(state: &SolverState<'_>, item: &LabeledItem) -> Result<Prediction> {
    check_item(state, item, "Prop")?;
    let start = Instant::now();
    let r = state.grams.r();
    let (n, l) = (state.n(), item.len());
    let s = &item.label_idx;
    let mut m = probe::zeros(l * l);
    for j in 0..l {
        for i in 0..l {
            m[i + j * l] = r[(s[i], s[j])];
        }
        m[j + j * l] += 1.0;
    }
    let mut d = probe::zeros(l);
    d.copy_from_slice(&item.y);
    let mut work = probe::zeros(l * l);
    work.copy_from_slice(&m);
    if !cholesky_solve_in_place(&mut work, &mut d) {
        let mut a = probe::zeros_mat(l, l);
        for j in 0..l {
            for i in 0..l {
                a[(i, j)] = m[i + j * l];
            }
        }
        let lu = Lu::new(a.as_ref(), "I + R_SS")?;
        let mut rhs = probe::zeros_mat(l, 1);
        for i in 0..l {
            rhs[(i, 0)] = item.y[i];
        }
        lu.solve_in_place(&mut rhs);
        for i in 0..l {
            d[i] = rhs[(i, 0)];
        }
    }
    let mut f_star = probe::zeros(n);
    for (&sj, &dj) in s.iter().zip(&d) {
        let col = r.col(sj);
        for (fi, &rij) in f_star.iter_mut().zip(col.iter()) {
            *fi += rij * dj;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    numeric("Prop solve", &f_star)?;
    Ok(Prediction {
        f_star,
        coefficients: Coefficients::Equivalent {
            label_idx: s.clone(),
            d,
        },
        seconds,
    })
}

/// Dispatches to the per-item solver matching the state's method.
pub fn predict_item(state: &SolverState<'_>, item: &LabeledItem) -> Result<Prediction> {
    match state.method {
        Method::Ori => ori_predict_item(state, item),
        Method::GBa { .. } => gba_predict_item(state, item),
        Method::Prop => prop_predict_item(state, item),
    }
}

/// `K`-basis coefficients `a = T_S d` of a Prop solution, so that `K a = f*`
/// and `a` solves the dense normal equations.
pub fn recover_alpha(state: &SolverState<'_>, item: &LabeledItem, d: &[f64]) -> Result<Vec<f64>> {
    if state.method != Method::Prop {
        return Err(Error::arg(format!(
            "coefficient recovery needs a Prop state, got {}",
            state.method
        )));
    }
    state.grams.k_coefficients(&item.label_idx, d)
}

/// Value of the regularized objective
/// `Σ_S (f_s − y_s)² + λ aᵀKa + γ fᵀLf` at `f = K a`.
pub fn objective(grams: &KernelGrams, graph: &GraphModel, item: &LabeledItem, a: &[f64]) -> Result<f64> {
    let n = grams.n();
    if a.len() != n {
        return Err(Error::arg(format!("{} coefficients for {n} nodes", a.len())));
    }
    check_labels(&item.label_idx, n)?;
    let k = grams.k();
    let f: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[(i, j)] * a[j]).sum())
        .collect();
    let fit: f64 = item
        .label_idx
        .iter()
        .zip(&item.y)
        .map(|(&s, &y)| (f[s] - y).powi(2))
        .sum();
    let ka: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum();
    let lap = crate::graph::laplacian_quadratic(graph, &f)?;
    Ok(fit + grams.lambda() * ka + grams.gamma() * lap)
}

/// Dense `n × m` completion of a training matrix.
#[derive(Debug, Clone)]
pub struct PredictedMatrix {
    /// `values[(user, item)]`.
    pub values: Mat<f64>,
    /// Per-item solve time in seconds; 0 for unlabeled items.
    pub item_seconds: Vec<f64>,
    /// Items with no training labels, filled with the global mean.
    pub unlabeled_items: Vec<usize>,
}

impl PredictedMatrix {
    pub fn total_item_seconds(&self) -> f64 {
        self.item_seconds.iter().sum()
    }

    pub fn get(&self, user: usize, item: usize) -> f64 {
        self.values[(user, item)]
    }

    /// CSV `user,item,prediction` over the requested 0-based pairs, written
    /// with 1-based ids like the rating files.
    pub fn write_csv<W: std::io::Write>(
        &self,
        pairs: impl IntoIterator<Item = (usize, usize)>,
        out: W,
    ) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user", "item", "prediction"])?;
        for (u, i) in pairs {
            w.write_record(&[
                (u + 1).to_string(),
                (i + 1).to_string(),
                self.values[(u, i)].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian dump: `n`, `m` as `u64`, then the values column-major.
    pub fn write_binary<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let (n, m) = (self.values.nrows(), self.values.ncols());
        out.write_all(&(n as u64).to_le_bytes())?;
        out.write_all(&(m as u64).to_le_bytes())?;
        for j in 0..m {
            for i in 0..n {
                out.write_all(&self.values[(i, j)].to_le_bytes())?;
            }
        }
        out.flush()
    }

    /// Inverse of [`PredictedMatrix::write_binary`]; timings are not stored.
    pub fn read_binary<R: std::io::Read>(mut src: R) -> std::io::Result<Mat<f64>> {
        let mut word = [0u8; 8];
        src.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        src.read_exact(&mut word)?;
        let m = u64::from_le_bytes(word) as usize;
        let mut values = Mat::zeros(n, m);
        for j in 0..m {
            for i in 0..n {
                src.read_exact(&mut word)?;
                values[(i, j)] = f64::from_le_bytes(word);
            }
        }
        Ok(values)
    }
}

/// Predicts every column of `train`, whose rows must be the state's nodes.
///
/// Known training entries are written back over the predictions; unlabeled
/// items get the global training mean. With `clip`, predictions are clamped
/// to that range.
pub fn predict_matrix(
    state: &SolverState<'_>,
    train: &RatingMatrix,
    clip: Option<RatingRange>,
) -> Result<PredictedMatrix> {
    let n = state.n();
    if train.n_users() != n {
        return Err(Error::arg(format!(
            "training matrix has {} rows on the prediction axis but the state has {n} nodes",
            train.n_users()
        )));
    }
    let mean = train
        .global_mean()
        .ok_or_else(|| Error::arg("training matrix has no ratings"))?;
    let m = train.n_items();
    let mut values = Mat::zeros(n, m);
    let mut item_seconds = vec![0.0; m];
    let mut unlabeled_items = Vec::new();
    for item in 0..m {
        let labeled = LabeledItem::from_column(train, item);
        if labeled.is_empty() {
            unlabeled_items.push(item);
            for u in 0..n {
                values[(u, item)] = mean;
            }
            continue;
        }
        let p = predict_item(state, &labeled)?;
        item_seconds[item] = p.seconds;
        for (u, v) in p.f_star.into_iter().enumerate() {
            values[(u, item)] = match clip {
                Some(r) => r.clamp(v),
                None => v,
            };
        }
        for (&u, &y) in labeled.label_idx.iter().zip(&labeled.y) {
            values[(u, item)] = y;
        }
    }
    Ok(PredictedMatrix {
        values,
        item_seconds,
        unlabeled_items,
    })
}
