//! Scalar abstraction shared by matrices, layers, and the autodiff tape.
//!
//! Everything numeric is generic over [`Scalar`], instantiated at `f64`
//! (real kind) or [`Complex64`] (complex kind). Complex support is
//! first-class because separable unitary convolutions require the imaginary
//! unit; real instantiations of the same layers yield orthogonal weights.

use ndarray::LinalgScalar;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Tag distinguishing the two supported scalar fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    Real64,
    Complex128,
}

impl std::fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarKind::Real64 => write!(f, "real64"),
            ScalarKind::Complex128 => write!(f, "complex128"),
        }
    }
}

/// Field element for dense kernels and tape ops.
///
/// `standard_normal` draws unit-variance samples: over the complex field the
/// real and imaginary parts each carry variance 1/2 so that `E|z|^2 = 1`.
pub trait Scalar:
    LinalgScalar
    + std::ops::Neg<Output = Self>
    + std::fmt::Debug
    + std::fmt::Display
    + PartialEq
    + Send
    + Sync
    + 'static
{
    const KIND: ScalarKind;

    fn from_f64(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;

    /// `i` over the complex field, `None` over the reals.
    fn imaginary_unit() -> Option<Self>;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn abs2(self) -> f64 {
        self.re() * self.re() + self.im() * self.im()
    }

    fn abs(self) -> f64 {
        self.abs2().sqrt()
    }

    fn is_finite(self) -> bool {
        self.re().is_finite() && self.im().is_finite()
    }
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real64;

    fn from_f64(x: f64) -> Self {
        x
    }

    fn conj(self) -> Self {
        self
    }

    fn re(self) -> f64 {
        self
    }

    fn im(self) -> f64 {
        0.0
    }

    fn imaginary_unit() -> Option<Self> {
        None
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for Complex64 {
    const KIND: ScalarKind = ScalarKind::Complex128;

    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn conj(self) -> Self {
        Complex64::conj(&self)
    }

    fn re(self) -> f64 {
        self.re
    }

    fn im(self) -> f64 {
        self.im
    }

    fn imaginary_unit() -> Option<Self> {
        Some(Complex64::new(0.0, 1.0))
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
    }
}
