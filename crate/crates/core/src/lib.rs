//! Simulation and signal-processing toolkit for a frequency-stepped chirp
//! radar.
//!
//! The pipeline mirrors the receive chain of a stretch-processing radar
//! whose transmit waveform is a train of narrowband chirps with stepped
//! carriers:
//!
//! ```text
//! plan ──► scene ──► dechirp ──► (apply_gap) ──► synth::stitch ──► (gapfill)
//!                                                      │
//!                                                      ▼
//!                                        profile ──► isar::form_image
//! ```
//!
//! * [`plan`] holds the waveform parameters and their feasibility rules.
//! * [`scene`] describes point scatterers on a turntable.
//! * [`txgen`] renders the full-rate transmit waveform for inspection.
//! * [`dechirp`] evaluates the per-subpulse de-chirped signals.
//! * [`synth`] time-shifts and splices them into one wideband-equivalent signal.
//! * [`gapfill`] reconstructs masked subpulses by AR prediction.
//! * [`profile`] performs FFT metrology (3.92-dB widths, peaks).
//! * [`isar`] forms range-Doppler images from a slow-time sequence.
//! * [`scenario`] drives all of the above from a TOML configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dechirp;
pub mod error;
pub mod export;
pub mod gapfill;
pub mod interp;
pub mod isar;
pub mod plan;
pub mod profile;
pub mod scenario;
pub mod scene;
pub mod synth;
pub mod txgen;
pub mod window;

pub use error::{Error, Result};
pub use rustfft::num_complex::Complex64;

/// Propagation speed in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
