//! Masked photoacoustic forward model.

mod geometry;
mod kb;
mod model;
mod wave;

pub use geometry::{ImageGrid, ScanGeometry, StripeMask};
pub use kb::{bessel_i, kb_eval, KBParams};
pub use model::{apply_mask, assemble_model_matrix, build_forward, PatSetup, Truncation};
pub use wave::{integrate, spherical_mean, trace_potential, wave_trace, wave_trace_radial};
