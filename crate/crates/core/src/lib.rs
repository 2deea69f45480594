//! Whitney-layer wavelet solver for interior Neumann Laplace problems on
//! star-shaped planar domains.

pub mod assembly;
pub mod data;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod quadrature;
pub mod solver;
pub mod wavelets;
pub mod whitney;

pub use error::{Error, Result};
