//! Numerical toolkit for non-local elliptic operators
//!
//! ```text
//! L u(x) = ∫ ( u(x+y) - u(x) - y·∇u(x) χ(y) ) K(y) dy,    K(y) = a(y) / |y|^(d+σ)
//! ```
//!
//! with `0 < σ < 2` and a merely measurable density `a` trapped in the band
//! `(2-σ)ν ≤ a ≤ (2-σ)Λ`. The compensator `χ` is `0` for `σ < 1`, the
//! indicator of a ball for `σ = 1` and `1` for `σ > 1`.
//!
//! The crate is `no_std` (it needs `alloc`). It provides
//!
//! * [`kernel`]: piecewise-constant polar kernels, validation, even/odd and
//!   min/residual splits, drift vectors and a seeded random generator.
//! * [`symbol`]: the Fourier symbol `m(ξ)` by exact radial integration.
//! * [`grid`] and [`operator`]: periodic grids, spectral and direct
//!   (principal value) application of `L`, Riesz potentials.
//! * [`solver`]: `(L - λ)u = f` and the drift variant.
//! * [`norms`] and [`analysis`]: Bessel, Hölder and weighted norms, maximal
//!   and sharp functions.
//! * [`process`]: compound-Poisson simulation of the jump process and a
//!   Monte Carlo generator check.
//! * [`harness`]: estimate experiments returning [`harness::EstimateReport`]s.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod fft;
pub mod fields;
pub mod grid;
pub mod harness;
pub mod images;
pub mod kernel;
pub mod norms;
pub mod operator;
pub mod process;
pub mod quad;
pub mod solver;
pub mod symbol;

pub use error::{Error, Result};
pub use grid::{Extension, ScalarField, Spectrum, TorusGrid};
pub use kernel::{Chi, Kernel, KernelSpec};
pub use num_complex::Complex64;
pub use symbol::SymbolTable;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point (or vector) in ℝ^d padded with zeros up to [`MAX_DIM`].
pub type Point = [f64; MAX_DIM];

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Copies the first `d` components of a slice into a zero-padded [`Point`].
pub fn point(x: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    for (dst, src) in p.iter_mut().zip(x) {
        *dst = *src;
    }
    p
}
