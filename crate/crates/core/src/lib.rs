//! Noise-based enhancement of foveated images.
//!
//! A foveated image lacks the frequencies that peripheral vision can detect
//! but not resolve. This crate estimates, per location, how much of that
//! band is missing and fills it with procedural Gabor noise whose
//! frequency, amplitude and orientation follow the surrounding content.
//!
//! The main entry points are [`pipeline::Enhancer`] for single frames and
//! [`pipeline::process_sequence`] for image sequences. [`analysis`] holds
//! the spectral and temporal measurements used to check the output.

pub mod analysis;
pub mod blur;
pub mod color;
pub mod error;
pub mod field;
pub mod frame;
pub mod gabor;
pub mod io;
pub mod params;
pub mod pipeline;
pub mod pyramid;
pub mod retina;
pub mod scenes;

pub use error::{Error, Result};
pub use field::FieldMap;
pub use frame::Frame;
pub use params::EnhanceConfig;
pub use retina::ViewingSetup;
