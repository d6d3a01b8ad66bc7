//! Thin wrappers over the dense factorizations used by the solvers: every
//! factorization is reported to [`crate::probe`] and checked for breakdown.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::probe;

/// Ratio of largest to smallest absolute diagonal entry of a triangular
/// factor. A cheap lower bound on the condition number.
fn pivot_ratio(diag: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for d in diag {
        let d = d.abs();
        if !d.is_finite() {
            return f64::INFINITY;
        }
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo == 0.0 {
        f64::INFINITY
    } else if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

/// Partial-pivoting LU with a pivot-ratio condition estimate.
///
/// Construction fails only when a pivot is exactly zero or non-finite.
pub struct Lu {
    inner: PartialPivLu<f64>,
    condition: f64,
}

impl std::fmt::Debug for Lu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lu")
            .field("dim", &self.inner.U().nrows())
            .field("condition", &self.condition)
            .finish()
    }
}

impl Lu {
    pub fn new(a: MatRef<'_, f64>, what: &str) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "LU of a non-square matrix");
        probe::factorization(a.nrows());
        let inner = a.partial_piv_lu();
        let u = inner.U();
        let condition = pivot_ratio((0..u.nrows()).map(|i| u[(i, i)]));
        // Rank-deficient kernel systems are routine (a Gaussian gram with a
        // narrow width is numerically low rank) and still determine `K a`,
        // so only a vanished or non-finite pivot counts as a breakdown.
        if condition.is_infinite() {
            return Err(Error::Numeric {
                message: format!("{what} is numerically singular"),
                condition,
            });
        }
        Ok(Self { inner, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.inner.U().nrows()
    }

    /// Solves `A X = B`.
    pub fn solve(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        self.inner.solve(rhs)
    }

    /// Solves `Aᵀ X = B`.
    pub fn solve_transpose(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        self.inner.solve_transpose(rhs)
    }

    pub fn solve_in_place(&self, rhs: &mut Mat<f64>) {
        self.inner.solve_in_place(rhs.as_mut());
    }
}

const RESIDUAL_TOL: f64 = 1e-10;

/// Solves `A X = B` in place for symmetric positive semidefinite `A` whose
/// right-hand sides lie in its range.
///
/// A partial-pivoting LU is tried first and accepted when its residual is
/// below `1e-10 ‖B‖`. Otherwise (a vanished pivot, or a numerically singular
/// `A` whose LU solution is dominated by null-space noise, as happens when a
/// Gaussian gram has near-duplicate nodes) the minimum-norm solution is taken
/// from an eigendecomposition of `A`, discarding eigenvalues below
/// `n · ε · λ_max`. For the kernel normal equations every solution yields the
/// same predictions, so the fallback changes only the coefficients. Returns
/// the condition estimate used.
pub fn solve_psd_in_place(a: MatRef<'_, f64>, rhs: &mut Mat<f64>, what: &str) -> Result<f64> {
    match Lu::new(a, what) {
        Ok(lu) => {
            let b = rhs.clone();
            lu.solve_in_place(rhs);
            let resid = (a * &*rhs - &b).norm_max();
            if resid.is_finite() && resid <= RESIDUAL_TOL * b.norm_max() {
                return Ok(lu.condition());
            }
            *rhs = b;
        }
        Err(Error::Numeric { .. }) => {}
        Err(e) => return Err(e),
    }
    let n = a.nrows();
    probe::factorization(n);
    let evd = a.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::Numeric {
        message: format!("{what}: eigendecomposition failed: {e:?}"),
        condition: f64::INFINITY,
    })?;
    let (u, s) = (evd.U(), evd.S().column_vector());
    let top = (0..n).fold(0.0f64, |m, i| m.max(s[i].abs()));
    let cutoff = n as f64 * f64::EPSILON * top;
    let mut proj = u.transpose() * &*rhs;
    let mut smallest = f64::INFINITY;
    for i in 0..n {
        let keep = s[i] > cutoff;
        if keep {
            smallest = smallest.min(s[i]);
        }
        for j in 0..proj.ncols() {
            proj[(i, j)] = if keep { proj[(i, j)] / s[i] } else { 0.0 };
        }
    }
    *rhs = u * proj;
    if !rhs.norm_max().is_finite() || top == 0.0 {
        return Err(Error::Numeric {
            message: format!("{what} is singular"),
            condition: f64::INFINITY,
        });
    }
    Ok(top / smallest)
}

/// Solves the symmetric positive definite system `A x = b` in place by an
/// unpivoted Cholesky factorization. `a` is column-major `n × n`; only its
/// lower triangle is read and it is overwritten by the factor.
///
/// Returns `false` (leaving `a`/`b` unspecified) when a non-positive pivot is
/// met.
pub fn cholesky_solve_in_place(a: &mut [f64], b: &mut [f64]) -> bool {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    probe::factorization(n);
    for j in 0..n {
        let mut d = a[j + j * n];
        for k in 0..j {
            d -= a[j + k * n] * a[j + k * n];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j + j * n] = d;
        for i in j + 1..n {
            let mut s = a[i + j * n];
            for k in 0..j {
                s -= a[i + k * n] * a[j + k * n];
            }
            a[i + j * n] = s / d;
        }
    }
    // L y = b
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i + k * n] * b[k];
        }
        b[i] = s / a[i + i * n];
    }
    // Lᵀ x = y
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k + i * n] * b[k];
        }
        b[i] = s / a[i + i * n];
    }
    true
}

pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}
