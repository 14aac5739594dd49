//! Digital twin of a pulsed, Purcell-enhanced single-photon source.
//!
//! The crate covers the whole chain from emitter physics to analysed histograms:
//! photon records are generated per laser pulse, routed through HBT or HOM benches,
//! detected as timetag streams, correlated and fitted.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod correlate;
pub mod detector;
pub mod error;
pub mod fit;
pub mod interferometer;
pub mod physics;
pub mod pipeline;
pub mod presets;
pub mod report;
pub mod rng;
pub mod source;
pub mod special;
pub mod sweep;
pub mod timetag;

pub use error::{Error, Result};
pub use physics::{CavityModel, EmitterConfig, FourierLimit, VisibilityReport};
pub use source::{PhotonRecord, PulseTrain};
