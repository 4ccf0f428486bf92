//! Multilayer heat-equation solvers on a strip.
//!
//! The Laplace-domain layered solver in [`layered`] is the workhorse. The
//! closed-form strip solution ([`analytic`]) and the Crank-Nicolson solver
//! ([`fd`]) serve as references, [`volterra`] handles a single layer with
//! moving ends, and [`transforms`] reduces pricing equations to heat charts.

pub mod analytic;
pub mod error;
pub mod fd;
pub mod laplace;
pub mod layered;
pub mod quad;
pub mod special;
pub mod transforms;
pub mod volterra;

pub use error::{Error, Result};
