//! Received-power / C/N0 interference detection for low-cost GNSS
//! receivers.
//!
//! Raw spectrum snapshots are calibrated into an environment-referenced
//! power density and paired with per-satellite C/N0. A Gaussian fitted to
//! interference-free data defines the nominal region; an elliptical
//! threshold around it is sized by importance-sampled false-positive
//! estimates, and the plane outside is split into jamming, blockage,
//! spoofing and unrealistic regions.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod ellipse;
pub mod evaluation;
pub mod ingest;
pub mod io;
pub mod nominal;
pub mod numeric;
pub mod pipeline;
pub mod regions;
pub mod simulator;
pub mod threshold;

pub use calibration::{CalibrationConfig, MetricPoint};
pub use ellipse::ThresholdEllipse;
pub use nominal::NominalModel;
pub use regions::{Label, LossCause, RegionMap};
