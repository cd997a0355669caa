//! Mixed finite elements (Taylor–Hood and MINI) for the stationary
//! Navier–Stokes equations on rectangles, and optimal control of the flow
//! from pointwise velocity observations under box constraints.
//!
//! The pieces, bottom-up:
//!
//! * [`mesh`]: structured triangulations and point location.
//! * [`quadrature`], [`elements`]: reference rules, basis functions, dof maps.
//! * [`assembly`], [`sparse`], [`sparse_linalg`]: discrete operators and the
//!   saddle-point solver.
//! * [`nse_state`], [`adjoint`]: Newton state solver, linearized and adjoint
//!   equations.
//! * [`optimize`]: reduced cost, gradients, projections and optimization loops.
//! * [`experiments`]: convergence studies, derivative checks, inf-sup
//!   diagnostics and report output.

pub mod adjoint;
pub mod assembly;
pub mod elements;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod nse_state;
pub mod optimize;
pub mod quadrature;
pub mod sparse;
pub mod sparse_linalg;

pub use error::{Error, Result};
