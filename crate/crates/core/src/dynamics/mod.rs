//! Mean-field spin–cavity dynamics of a pulsed maser.
//!
//! [`simulate_burst`] integrates the field, collective polarisation and
//! inversion in the frame rotating at the spin frequency. The pump deposits
//! its inversion instantaneously at t = 0 and the burst builds up from a
//! seeded spontaneous-emission field.

pub mod calibration;
mod detect;
mod integrator;
mod model;
mod params;
mod scope;
mod sweep;

pub use calibration::{calibrate, CalibrationOptions, CalibrationReport, StoredCalibration};
pub use detect::{emitted_frequency, is_burst, noise_floor_power, BURST_FACTOR, EMISSION_MIN_PHOTONS};
pub use model::{simulate_burst, MaserEnvelope};
pub use params::{
    deposit_inversion, GainMediumParams, PumpPulse, SimConfig, DEFAULT_COUPLING_EFFICIENCY,
    DEFAULT_DURATION_S, DEFAULT_OUTPUT_DT_S, DEFAULT_PUMP_ENERGY_J, DEFAULT_RTOL,
    REP_RATE_RANGE_HZ,
};
pub use scope::{synthesize_scope_trace, MaserTrace, DEFAULT_SCOPE_RATE_HZ};
pub use sweep::{detuning_sweep, SweepEntry, SweepMetrics};


use crate::resonator::ResonatorError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Resonator(#[from] ResonatorError),
    #[error("integrator step size underflow at t = {t_s} s")]
    IntegrationFailure { t_s: f64 },
    #[error("non-physical state at t = {t_s} s")]
    NonPhysicalState { t_s: f64 },
    #[error("sample rate {sample_rate_hz} Hz is below 4× the carrier {carrier_hz} Hz")]
    UndersampledCarrier { sample_rate_hz: f64, carrier_hz: f64 },
    #[error("no burst above the noise floor")]
    NoBurst,
}
