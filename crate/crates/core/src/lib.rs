//! Numerical phase-space analysis of linear operators on L^2(R): Gabor
//! matrices, Wigner kernels, their smoothing identity, and off-diagonal
//! decay about a linear canonical map.
//!
//! Everything lives on a uniform periodic grid of n points on [-L/2, L/2)
//! with the dual grid xi_k = (k - n/2)/L; phase-space fields are n x n and
//! operator kernels in phase space are n^4 tensors.

// `!(a > b)` is used on purpose so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classes;
pub mod error;
pub mod fft;
pub mod gabor;
pub mod grid;
pub mod memory;
pub mod operators;
pub mod symbol;
pub mod tensor;
pub mod tfr;
pub mod wigner_kernel;

pub use error::{Error, Result};
pub use num_complex::Complex64;
