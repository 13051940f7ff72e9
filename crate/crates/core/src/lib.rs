//! Matrix-free IMEX discontinuous Galerkin building blocks for the
//! compressible Euler equations with gravity.

pub mod basis;
pub mod error;
pub mod helmholtz;
pub mod imex;
pub mod kernels;
pub mod krylov;
pub mod mesh;
pub mod operators;
pub mod par;
pub mod profile;
pub mod quadrature;
pub mod state;

pub use error::{Error, Result};
