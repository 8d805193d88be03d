//! Numerical lab for fractional Brownian motion with drift: parabolic box
//! dimensions of graphs over fractal time sets, occupation measures and
//! Gaussian conditioning.

pub mod error;
pub mod estimators;
pub mod fbm;
pub mod fractal;
pub mod experiment;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod occupation;
pub mod parabolic;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use fbm::{HurstIndex, SamplePath, TimeGrid};
