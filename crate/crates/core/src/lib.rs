//! Explicit convolution-stencil solvers for the 2D acoustic wave equation,
//! with dispersion analysis, error metrics and training of optimized
//! stencils against analytic solutions.

pub mod analytic;
pub mod dispersion;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod simulator;
pub mod stencil;

pub use error::{Error, Result};
pub use grid::{Discretization, Field};
pub use simulator::{Scheme, Simulator};
pub use stencil::{FreeParams, Order, Stencil, SymmetricWeights};
