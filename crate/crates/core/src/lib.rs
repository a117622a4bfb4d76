//! Smoothness-controlled dynamics modeling on graphs and triangle meshes.
//!
//! The library is organized bottom-up:
//!
//! - [`scalar`] / [`linalg`]: the real/complex scalar abstraction, dense
//!   kernels (matrix exponentials, skew/unitary parameterizations, LU), and
//!   the symmetric sparse container used by mesh operators.
//! - [`autodiff`]: a reverse-mode tape over dense matrices with a fixed op
//!   set and a finite-difference gradient checker.
//! - [`graph`] / [`mesh`]: normalized adjacency operators and Rayleigh
//!   quotient diagnostics for graphs, and the triangle-mesh pipeline
//!   (manifold checks, cotangent weights, intrinsic Delaunay rewiring).
//! - [`dynamics`]: reference PDE simulators (heat, wave, Cahn-Hilliard) and
//!   dataset generation, plus the binary trajectory format.
//! - [`layers`] / [`train`]: unitary and relaxed-unitary convolution layers
//!   recorded on the tape, model assembly, Adam, and rollout.
//! - [`metrics`] / [`bound`]: evaluation metrics and the Monte-Carlo
//!   approximation-error lower bound.

pub mod autodiff;
pub mod bound;
pub mod dynamics;
pub mod graph;
pub mod layers;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod scalar;
pub mod train;
pub mod util;

pub use scalar::{Scalar, ScalarKind};
