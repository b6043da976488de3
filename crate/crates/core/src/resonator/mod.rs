//! Tunable STO-loaded aluminium cavity.
//!
//! The TE01δ mode is modelled as a single Lorentzian one-port resonance seen
//! through the coupling loop. The mode frequency is set by the ceiling height
//! through a monotone calibration table ([`TuningCurve`]).

mod coupling;
mod qfactor;
mod reflection;
mod tuning;

pub use coupling::{classify_coupling, classify_coupling_with, CircleFit, Coupling, CouplingClass};
pub use qfactor::{
    estimate_q_loaded, estimate_q_loaded_with, DipConvention, QEstimateOptions, QFactorEstimate,
};
pub use reflection::{reflection_trace, s11_at, ReflectionNoise, ReflectionTrace};
pub use tuning::TuningCurve;

use crate::constants::F_SPIN_HZ;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest ceiling position: the dielectric stand height.
pub const CEILING_MIN_MM: f64 = 4.5;
/// Highest ceiling position allowed by the housing.
pub const CEILING_MAX_MM: f64 = 20.0;

/// Loaded Q of the assembled cavity with the coupling loop inserted.
pub const DEFAULT_Q_LOADED: f64 = 2042.0;
/// The loop is undercoupled.
pub const DEFAULT_COUPLING_BETA: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonatorError {
    #[error("ceiling height {height_mm} mm outside [{CEILING_MIN_MM}, {CEILING_MAX_MM}] mm")]
    HeightOutOfRange { height_mm: f64 },
    #[error("frequency {freq_hz} Hz outside the tuning range [{min_hz}, {max_hz}] Hz")]
    FrequencyUnreachable { freq_hz: f64, min_hz: f64, max_hz: f64 },
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("invalid reflection trace: {0}")]
    InvalidTrace(String),
    #[error("no resonance dip deeper than {threshold_db} dB (found {depth_db:.3} dB)")]
    NoResonanceFound { depth_db: f64, threshold_db: f64 },
    #[error("bandwidth crossing not bracketed by the frequency grid")]
    BandwidthOutsideSpan,
    #[error("invalid resonator parameter: {0}")]
    InvalidParameter(String),
}

/// Descriptive dimensions of the dielectric ring and housing. Metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub sto_outer_diameter_mm: f64,
    pub sto_inner_diameter_mm: f64,
    pub sto_height_mm: f64,
    pub cavity_inner_diameter_mm: f64,
    pub stand_height_mm: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            sto_outer_diameter_mm: 12.2,
            sto_inner_diameter_mm: 4.1,
            sto_height_mm: 8.7,
            cavity_inner_diameter_mm: 22.0,
            stand_height_mm: CEILING_MIN_MM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorConfig {
    pub f_mode_hz: f64,
    pub q_loaded: f64,
    pub q_unloaded: f64,
    pub coupling_beta: f64,
    pub ceiling_height_mm: f64,
    pub f_spin_hz: f64,
    #[serde(default)]
    pub tuning: TuningCurve,
    #[serde(default)]
    pub geometry: Geometry,
}

impl Default for ResonatorConfig {
    fn default() -> Self {
        let tuning = TuningCurve::default();
        let height = tuning
            .height_for(F_SPIN_HZ)
            .expect("default tuning curve covers the spin frequency");
        Self {
            f_mode_hz: F_SPIN_HZ,
            q_loaded: DEFAULT_Q_LOADED,
            q_unloaded: DEFAULT_Q_LOADED * (1.0 + DEFAULT_COUPLING_BETA),
            coupling_beta: DEFAULT_COUPLING_BETA,
            ceiling_height_mm: height,
            f_spin_hz: F_SPIN_HZ,
            tuning,
            geometry: Geometry::default(),
        }
    }
}

impl ResonatorConfig {
    /// Default cavity with a given loaded Q and coupling; Q0 = Q_L·(1 + β).
    pub fn with_loaded_q(q_loaded: f64, coupling_beta: f64) -> Self {
        Self {
            q_loaded,
            q_unloaded: q_loaded * (1.0 + coupling_beta),
            coupling_beta,
            ..Self::default()
        }
    }

    /// Cavity detuning from the spin line, Hz.
    pub fn detuning_hz(&self) -> f64 {
        self.f_mode_hz - self.f_spin_hz
    }

    pub fn validate(&self) -> Result<(), ResonatorError> {
        let bad = |msg: &str| Err(ResonatorError::InvalidParameter(msg.to_string()));
        if !(self.q_loaded > 0.0 && self.q_loaded.is_finite()) {
            return bad("q_loaded must be positive");
        }
        if !(self.q_loaded <= self.q_unloaded) {
            return bad("q_loaded must not exceed q_unloaded");
        }
        if !(self.coupling_beta > 0.0) {
            return bad("coupling_beta must be positive");
        }
        if !(CEILING_MIN_MM..=CEILING_MAX_MM).contains(&self.ceiling_height_mm) {
            return Err(ResonatorError::HeightOutOfRange {
                height_mm: self.ceiling_height_mm,
            });
        }
        let (lo, hi) = self.tuning.frequency_range();
        if !(lo..=hi).contains(&self.f_mode_hz) {
            return Err(ResonatorError::FrequencyUnreachable {
                freq_hz: self.f_mode_hz,
                min_hz: lo,
                max_hz: hi,
            });
        }
        Ok(())
    }

    /// Move the ceiling to `height_mm`; the mode frequency follows the
    /// calibration curve and every other field is preserved.
    pub fn tune_ceiling(&self, height_mm: f64) -> Result<Self, ResonatorError> {
        if !(CEILING_MIN_MM..=CEILING_MAX_MM).contains(&height_mm) {
            return Err(ResonatorError::HeightOutOfRange { height_mm });
        }
        Ok(Self {
            f_mode_hz: self.tuning.frequency_at(height_mm)?,
            ceiling_height_mm: height_mm,
            ..self.clone()
        })
    }

    /// Tune to an absolute mode frequency by inverting the calibration curve.
    pub fn tune_frequency(&self, f_hz: f64) -> Result<Self, ResonatorError> {
        let height = self.tuning.height_for(f_hz)?;
        let mut out = self.tune_ceiling(height)?;
        // The inverse lookup can be off by an ulp; keep the requested value.
        out.f_mode_hz = f_hz;
        Ok(out)
    }

    /// Decay rate of the loaded mode.
    pub fn decay(&self) -> DecayRate {
        cavity_decay_rate(self.q_loaded, self.f_mode_hz)
    }
}

/// Energy decay rate κ = 2π·f/Q_L and the corresponding FWHM linewidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRate {
    pub kappa_rad_s: f64,
    pub linewidth_hz: f64,
}

pub fn cavity_decay_rate(q_loaded: f64, f_res_hz: f64) -> DecayRate {
    assert!(q_loaded > 0.0, "q_loaded must be positive");
    assert!(f_res_hz > 0.0, "resonance frequency must be positive");
    let linewidth_hz = f_res_hz / q_loaded;
    DecayRate {
        kappa_rad_s: 2.0 * std::f64::consts::PI * linewidth_hz,
        linewidth_hz,
    }
}
