//! Minimal reverse-mode differentiation over dense matrices.

mod gradcheck;
mod params;
mod tape;

pub use gradcheck::{
    finite_diff_check, relative_error, CoordinateMismatch, GradCheckOptions, GradCheckReport,
};
pub use params::{ParamId, ParamStore};
pub use tape::{sigmoid, softplus, CustomOp, Tape, Value};

/// Cosines are clamped into this interval before `acos`, whose derivative
/// is singular at ±1.
pub const ACOS_CLAMP: f64 = 1.0 - 1e-12;
