//! Entropic Riemannian neural optimal transport.
//!
//! Core numerics for entropic optimal transport on Riemannian manifolds:
//! intrinsic geometry for five manifold families, wrapped-normal sampling and
//! feature embeddings, a small MLP potential with exact reverse-mode
//! gradients, the semidual objective and Gibbs plans, minibatch training, a
//! log-domain Sinkhorn reference solver, intrinsic transport extraction
//! (Karcher barycenter and heat-smoothed mode), and evaluation metrics.
//!
//! The crate is `no_std`-compatible (with `alloc`): disable default features
//! and enable `libm` to build without the standard library. All computations
//! are deterministic for a fixed seed.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("enable either the `std` or `libm` feature of `ernot`");

extern crate alloc;

pub mod extract;
pub mod features;
pub mod geometry;
pub mod mat;
pub mod measure;
pub mod metrics;
pub mod mlp;
pub mod num;
pub mod rng;
pub mod sampling;
pub mod semidual;
pub mod sinkhorn;
pub mod trainer;

mod error;

pub use error::Error;
pub use geometry::{GeometryError, ManifoldKind, ManifoldPoint, SpdMetric, TangentVector};
pub use mat::Mat;
pub use measure::DiscreteMeasure;
