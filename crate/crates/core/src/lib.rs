//! Local multilevel preconditioners for second-order elliptic problems with
//! piecewise-constant jump coefficients, discretized by linear finite
//! elements on newest-vertex bisection grids.
//!
//! The pipeline is: build an initial mesh ([`mesh`]), refine it adaptively
//! ([`adapt`]), recover the compatible-bisection hierarchy from the finest
//! mesh alone ([`hierarchy`]), assemble the weighted stiffness system
//! ([`fem`]), and solve with conjugate gradients ([`solver`]) preconditioned
//! by three-point BPX or V-cycle methods ([`precond`]). [`spectral`] measures
//! the eigenvalue distribution of the preconditioned operator.

pub mod adapt;
pub mod error;
pub mod fem;
pub mod hierarchy;
pub mod mesh;
pub mod precond;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
