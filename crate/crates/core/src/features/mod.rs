//! Hand-crafted per-cell features.

pub mod color_names;
pub mod histogram;
pub mod hog;
pub mod intensity;

pub use color_names::{color_names, ColorNameTable, CN_CHANNELS, COLOR_NAMES};
pub use histogram::{foreground_probability, ColorHistogram, ColorProbabilityMap};
pub use hog::{hog, HOG_CHANNELS};
pub use intensity::{intensity_channels, IC_CHANNELS};
