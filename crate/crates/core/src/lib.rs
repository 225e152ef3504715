//! Gaussian-process posterior sample paths and their use in global sensitivity
//! analysis and Thompson-sampling optimization.

pub mod bo;
pub mod error;
pub(crate) mod fastmath;
pub mod gaussian;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod mo;
pub mod optim;
pub mod paths;
pub mod rng;
pub mod sobol;
pub mod stats;
pub mod testbeds;

pub use error::{Error, Result};
