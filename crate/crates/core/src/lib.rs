//! Random-matrix limit laws and the high-dimensional covariance procedures
//! built on them.

mod error;

pub mod laws;
pub mod normal;
pub mod quad;
pub mod sampling;
pub mod changepoint;
pub mod cov_tests;
pub mod harness;
pub mod signals;
pub mod spiked;
pub mod spectral;
pub mod tracy_widom;

pub use error::{Error, Result};
