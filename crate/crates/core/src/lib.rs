//! Numerical homogenization of periodic higher-order elliptic systems.

pub mod bvp;
pub mod cell;
pub mod error;
pub mod func;
pub mod geometry;
pub mod linalg;
pub mod monitors;
pub mod quadrature;
pub mod scenario;
pub mod spectral;
pub mod twoscale;
pub mod tensor;

pub use error::{Error, Result};
