//! Correlation-filter visual tracking: kernelized ridge-regression filters,
//! response-map confidence gating, adaptive response merging, scale search
//! and one-pass evaluation.

pub mod error;
pub mod eval;
pub mod features;
pub mod fft;
pub mod filter;
pub mod fusion;
pub mod geometry;
pub mod grid;
pub mod image;
pub mod peaks;
pub mod scale;
pub mod synthetic;
pub mod tracker;

pub use error::{Error, Result};
pub use eval::{EvalCurves, Sequence};
pub use filter::{FeatureMap, FilterModel, LabelMap, SpectrumMap};
pub use fusion::{MergeBranch, MergeFactor};
pub use geometry::BoundingBox;
pub use grid::Grid;
pub use image::{Image, ImagePatch};
pub use peaks::{AdaptiveThresholds, ConfidenceReport, ResponseMap};
pub use scale::ScaleState;
pub use tracker::{
    run_frames, run_sequence, FrameRecord, GateKind, GateMode, TrackOutput, Tracker,
    TrackerConfig, TrackerState, Variant,
};
