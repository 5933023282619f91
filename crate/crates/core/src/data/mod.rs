//! Image cubes, degradation operators, synthetic scenes and file formats.

mod cube;
pub mod io;
mod response;
pub mod synth;

pub use cube::{apply_spectral_response, block_downsample, fold, unfold, ImageCube};
pub(crate) use cube::spectral_angle;
pub use io::{load_cube, save_cube, LoadedCube};
pub use response::SpectralResponse;
pub use synth::{synth_generate, SynthScene, SynthSpec};
