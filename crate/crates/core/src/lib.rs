//! Randomness analysis of two-station time-tagged photon detection data.
//!
//! The pipeline: ingest or synthesize an event stream, derive binary series
//! from analyzer outcomes and inter-detection time differences, score each
//! series with a statistical test battery and complexity/entropy/stationarity
//! estimators, probe for low-dimensional dynamics, and post-process rejected
//! series with a Toeplitz extractor.

pub mod battery;
pub mod bits;
pub mod coincidence;
pub mod complexity;
pub mod event;
pub mod nonlinear;
pub mod report;
pub mod series;
pub mod stationarity;
pub mod synth;
pub mod toeplitz;

pub use bits::Bits;
pub use event::{Channel, DetectionEvent, EventStream, RunMetadata, Station};
