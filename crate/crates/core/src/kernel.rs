//! Gaussian kernel gram `K` and the equivalent-kernel gram
//! `R = K (λI + γLK)⁻¹`.
//!
//! `R` is the reproducing kernel of the same function space as `K`, equipped
//! with the inner product `⟨f, g⟩_R = λ⟨f, g⟩_K + γ fᵀLg`. Minimizing
//! `Σ_S (f(v_s) − y_s)² + ‖f‖²_R` therefore reproduces the Laplacian-regularized
//! least squares solution, but by the representer theorem the minimizer lives
//! in the span of the `ℓ` labeled columns of `R` instead of all `n` columns of
//! `K`.
//!
//! `R` is obtained without forming the inverse: since
//! `K(λI + γLK) = (λI + γKL)K`, we have `R = (λI + γKL)⁻¹ K`, one LU
//! factorization and `n` right-hand sides. The factorization is kept so that
//! coefficient vectors in the `K` basis can be recovered later.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::graph::{pairwise_sq_dists, GraphModel};
use crate::linalg::{frobenius, Lu};

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("sigma must be > 0, got {sigma}")))
    }
}

/// `K_ij = exp(−‖v_i − v_j‖² / 2σ²)`.
pub fn gaussian_gram(features: &FeatureSet, sigma: f64) -> Result<Mat<f64>> {
    check_sigma(sigma)?;
    gaussian_gram_from_dists(pairwise_sq_dists(features).as_ref(), sigma)
}

/// Gaussian gram over precomputed squared distances.
pub fn gaussian_gram_from_dists(sq_dists: MatRef<'_, f64>, sigma: f64) -> Result<Mat<f64>> {
    check_sigma(sigma)?;
    let n = sq_dists.nrows();
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut k = Mat::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = 1.0;
        for i in j + 1..n {
            let v = (-sq_dists[(i, j)] * scale).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

fn check_params(lambda: f64, gamma: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!("lambda must be > 0, got {lambda}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::arg(format!("gamma must be >= 0, got {gamma}")));
    }
    Ok(())
}

/// `K L` for symmetric `K` and the graph Laplacian, as `(L K)ᵀ`.
pub(crate) fn kernel_times_laplacian(k: MatRef<'_, f64>, graph: &GraphModel) -> Mat<f64> {
    graph.laplacian_mul(k).transpose().to_owned()
}

/// Relative Frobenius residual `‖λR + γKLR − K‖ / ‖K‖`.
pub fn relation_residual(
    k: MatRef<'_, f64>,
    r: MatRef<'_, f64>,
    graph: &GraphModel,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let lr = graph.laplacian_mul(r);
    let resid = r * lambda + (k * &lr) * gamma - k;
    let denom = frobenius(k);
    if denom == 0.0 {
        frobenius(resid.as_ref())
    } else {
        frobenius(resid.as_ref()) / denom
    }
}

/// Gram matrices `K` and `R` for one node set, with the factorization of
/// `λI + γKL` that links them.
#[derive(Debug)]
pub struct KernelGrams {
    k: Mat<f64>,
    r: Mat<f64>,
    lambda: f64,
    gamma: f64,
    sigma: f64,
    relation_residual: f64,
    system: Lu,
}

impl KernelGrams {
    /// Gaussian gram of `features` followed by [`KernelGrams::from_gram`].
    pub fn build(
        features: &FeatureSet,
        graph: &GraphModel,
        sigma: f64,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        let k = gaussian_gram(features, sigma)?;
        Self::from_gram(k, sigma, graph, lambda, gamma)
    }

    /// Computes `R` from a symmetric PSD gram `k`. `sigma` is recorded only.
    pub fn from_gram(
        k: Mat<f64>,
        sigma: f64,
        graph: &GraphModel,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        check_params(lambda, gamma)?;
        let n = k.nrows();
        if k.ncols() != n || graph.n() != n {
            return Err(Error::arg(format!(
                "gram is {}x{} but the graph has {} nodes",
                k.nrows(),
                k.ncols(),
                graph.n()
            )));
        }
        let (system, r) = solve_equivalent(k.as_ref(), graph, lambda, gamma)?;
        let relation_residual = relation_residual(k.as_ref(), r.as_ref(), graph, lambda, gamma);
        Ok(Self {
            k,
            r,
            lambda,
            gamma,
            sigma,
            relation_residual,
            system,
        })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn k(&self) -> MatRef<'_, f64> {
        self.k.as_ref()
    }

    pub fn r(&self) -> MatRef<'_, f64> {
        self.r.as_ref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `‖λR + γKLR − K‖_F / ‖K‖_F` measured at construction.
    pub fn relation_residual(&self) -> f64 {
        self.relation_residual
    }

    /// Pivot-ratio condition estimate of `λI + γKL`.
    pub fn condition_estimate(&self) -> f64 {
        self.system.condition()
    }

    /// `T_S d` with `T = (λI + γLK)⁻¹`: the `K`-basis coefficients of
    /// `f = Σ_j d_j R(v_{s_j}, ·)`.
    pub fn k_coefficients(&self, label_idx: &[usize], d: &[f64]) -> Result<Vec<f64>> {
        check_labels(label_idx, self.n())?;
        if d.len() != label_idx.len() {
            return Err(Error::arg(format!(
                "{} coefficients for {} labels",
                d.len(),
                label_idx.len()
            )));
        }
        let mut rhs = Mat::zeros(self.n(), 1);
        for (&s, &v) in label_idx.iter().zip(d) {
            rhs[(s, 0)] = v;
        }
        // (λI + γLK) = (λI + γKL)ᵀ
        let a = self.system.solve_transpose(rhs.as_ref());
        Ok((0..self.n()).map(|i| a[(i, 0)]).collect())
    }
}

fn solve_equivalent(
    k: MatRef<'_, f64>,
    graph: &GraphModel,
    lambda: f64,
    gamma: f64,
) -> Result<(Lu, Mat<f64>)> {
    let n = k.nrows();
    let mut a = kernel_times_laplacian(k, graph) * gamma;
    for i in 0..n {
        a[(i, i)] += lambda;
    }
    let system = Lu::new(a.as_ref(), "lambda*I + gamma*K*L")?;
    let x = system.solve(k);
    let mut r = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            if !v.is_finite() {
                return Err(Error::Numeric {
                    message: "equivalent gram has non-finite entries".into(),
                    condition: system.condition(),
                });
            }
            r[(i, j)] = v;
        }
    }
    Ok((system, r))
}

/// `R = K(λI + γLK)⁻¹` for a symmetric PSD gram and a graph Laplacian.
pub fn equivalent_gram(k: MatRef<'_, f64>, graph: &GraphModel, lambda: f64, gamma: f64) -> Result<Mat<f64>> {
    check_params(lambda, gamma)?;
    if k.nrows() != k.ncols() || k.nrows() != graph.n() {
        return Err(Error::arg("gram and graph sizes differ"));
    }
    Ok(solve_equivalent(k, graph, lambda, gamma)?.1)
}

pub(crate) fn check_labels(label_idx: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &s in label_idx {
        if s >= n {
            return Err(Error::arg(format!("label index {s} out of range for {n} nodes")));
        }
        if std::mem::replace(&mut seen[s], true) {
            return Err(Error::arg(format!("label index {s} repeated")));
        }
    }
    Ok(())
}

/// The three quantities in `‖f‖²_R = λ‖f‖²_K + γ fᵀLf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkhsNorms {
    /// `dᵀ R_SS d`.
    pub norm_r_sq: f64,
    /// `aᵀ K a` with `a = T_S d`.
    pub norm_k_sq: f64,
    /// `fᵀ L f` with `f = R_S d`.
    pub laplacian_term: f64,
}

/// Norms of `f = Σ_j d_j R(v_{s_j}, ·)` in both geometries.
pub fn rkhs_norms(
    d: &[f64],
    label_idx: &[usize],
    grams: &KernelGrams,
    graph: &GraphModel,
) -> Result<RkhsNorms> {
    let a = grams.k_coefficients(label_idx, d)?;
    let (n, r, k) = (grams.n(), grams.r(), grams.k());
    let mut f = vec![0.0; n];
    let mut norm_r_sq = 0.0;
    for (p, (&sp, &dp)) in label_idx.iter().zip(d).enumerate() {
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += r[(i, sp)] * dp;
        }
        for (&sq, &dq) in label_idx.iter().zip(d).skip(p) {
            let term = dp * r[(sp, sq)] * dq;
            norm_r_sq += if sq == sp { term } else { 2.0 * term };
        }
    }
    let mut norm_k_sq = 0.0;
    for j in 0..n {
        let kj: f64 = (0..n).map(|i| k[(i, j)] * a[i]).sum();
        norm_k_sq += a[j] * kj;
    }
    let laplacian_term = crate::graph::laplacian_quadratic(graph, &f)?;
    Ok(RkhsNorms {
        norm_r_sq,
        norm_k_sq,
        laplacian_term,
    })
}
