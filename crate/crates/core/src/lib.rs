//! Numerical laboratory for fixed-point geometry in `L¹`.
//!
//! Functions are simple functions on finite partitions ([`grid_space`]); on
//! top of that sit uniform-integrability certificates ([`integrability`]),
//! Chebyshev radius and center computations ([`convex_geometry`]),
//! executable nonexpansive maps and their iterations ([`fixed_point_lab`]),
//! and the Lorentz `(p,1)` sequence norm ([`lorentz`]).

pub mod convex_geometry;
pub mod error;
pub mod families;
pub mod fixed_point_lab;
pub mod grid_space;
pub mod integrability;
pub mod lorentz;
pub mod rng;

pub use error::{Error, Result};
pub use grid_space::{FunctionFamily, GridFunction, Partition};
