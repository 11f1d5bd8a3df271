//! Numerical pluripotential theory on admissible polynomial meshes.
//!
//! The crate approximates the Siciak–Zaharjuta extremal function, the
//! transfinite diameter and the equilibrium-measure density of compact
//! subsets of ℝ², all from orthonormal polynomials computed on finite meshes.

pub mod basis;
pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod extremal;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod ortho;
pub mod probe;
pub mod rho;
pub mod transfinite;

pub use error::{Error, Result};
