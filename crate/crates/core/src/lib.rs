//! Graph-Laplacian-regularized rating prediction.
//!
//! Each item's ratings are a signal over a k-nearest-neighbor graph of users
//! (or of items, for item-based prediction). Missing ratings are filled by
//! the minimizer of
//!
//! ```text
//! Σ_S (f(v_s) − y_s)² + λ‖f‖²_K + γ fᵀLf
//! ```
//!
//! over a Gaussian-kernel function space. Three interchangeable solvers are
//! provided in [`solvers`]; `Prop` reaches the same minimizer as the dense
//! `Ori` solver through an `ℓ × ℓ` system in the equivalent kernel
//! `R = K(λI + γLK)⁻¹` built by [`kernel`].
//!
//! Pipeline: [`data`] → [`features`] → [`graph`] → [`kernel`] → [`solvers`]
//! → [`eval`].

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod kernel;
pub mod linalg;
pub mod probe;
pub mod solvers;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/equivalent-kernel.md")]
    mod equivalent_kernel {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
