//! Virtual instrument for a pulsed, optically pumped room-temperature maser.
//!
//! The crate is split along the measurement chain:
//!
//! * [`resonator`]: tunable dielectric-loaded cavity, one-port reflection
//!   response, loaded-Q extraction and coupling classification.
//! * [`dynamics`]: mean-field spin–cavity integration producing burst
//!   envelopes, passband scope traces and detuning sweeps, plus the
//!   calibration procedure for the default gain-medium parameters.
//! * [`pulse`]: scalar measurements on traces (peak power, delay, envelope
//!   demodulation, time-domain Rabi frequency).
//! * [`spectral`]: Burg maximum-entropy spectra and peak analysis.
//! * [`analysis`]: the full trace → metrics + spectrum pipeline.
//! * [`formats`]: CSV/JSON readers and writers for every exchanged artifact.
//!
//! Batch work (sweeps, parameter grids, calibration scans) goes through
//! [`par`], which uses rayon when the `parallel` feature is enabled and
//! falls back to a sequential loop otherwise.

pub mod analysis;
pub mod constants;
pub mod dynamics;
pub mod formats;
pub mod par;
pub mod pulse;
pub mod resonator;
pub mod spectral;

pub use num_complex::Complex64;
