//! Unsupervised fusion of a low-resolution hyperspectral cube with a
//! high-resolution multispectral cube.
//!
//! Two encoder/decoder networks share one linear decoder whose weight
//! product is the spectral basis. Their bottlenecks are stick-breaking
//! layers, so every pixel's representation lies on the probability simplex;
//! an entropy penalty makes them sparse and an angle loss ties the
//! multispectral representation to the upsampled hyperspectral one. The
//! fused cube is the multispectral representation times the learned basis.
//!
//! Modules, bottom up:
//!
//! * [`diffcore`]: reverse-mode tape, parameter store, gradient checker
//! * [`stickbreak`]: Kumaraswamy inverse transform and stick breaking
//! * [`losses`]: reconstruction, entropy, angle and decay terms
//! * [`networks`]: densely connected encoders and the shared decoder
//! * [`trainer`]: alternating optimization and the full pipeline
//! * [`data`]: cubes, degradation operators, synthetic scenes, file formats
//! * [`metrics`]: RMSE and spectral angle mapper
//! * [`cli`]: the `usdn` command-line front end

pub mod cli;
pub mod data;
pub mod diffcore;
mod error;
pub mod gradcheck_suite;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod stickbreak;
pub mod trainer;

pub use error::{Error, Result};
