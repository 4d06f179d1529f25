//! Particle regularisation by projection onto tensor-product spline spaces.
//!
//! Particle fields are moving quadrature rules. Instead of remeshing, the
//! carried values are turned back into a function by solving a small SPD
//! system with the particle-sampled spline mass matrix.

pub mod advect;
pub mod bench;
pub mod bspline;
pub mod cg;
pub mod error;
pub mod field_solver;
pub mod grid;
pub mod norms;
pub mod operator;
pub mod particles;
pub mod projection;
mod par;
pub mod quadrature;
pub mod quasi;
pub mod rk;
pub mod space;
pub mod tensor;

pub use error::{Error, Result};
