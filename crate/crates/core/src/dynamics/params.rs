use super::calibration::StoredCalibration;
use super::DynamicsError;
use crate::constants::{photon_energy, PLANCK, PUMP_DURATION_S, PUMP_WAVELENGTH_M, SPEED_OF_LIGHT};
use crate::resonator::ResonatorConfig;
use serde::{Deserialize, Serialize};

/// Effective gain-medium parameters of the pumped crystal in the mode volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMediumParams {
    /// Capacity of invertible spins coupled to the mode.
    pub n_spins: f64,
    /// Single spin–photon coupling, rad/s.
    pub g_single_rad_s: f64,
    /// Spin-lattice relaxation, s.
    pub t1_s: f64,
    /// Dephasing, s.
    pub t2_s: f64,
    /// Inverted spins per pump photon.
    pub pump_efficiency: f64,
    #[serde(default = "default_doping")]
    pub doping: String,
}

fn default_doping() -> String {
    "0.1% pentacene in para-terphenyl".to_string()
}

impl Default for GainMediumParams {
    /// The stored calibration result.
    fn default() -> Self {
        StoredCalibration::bundled().medium
    }
}

impl GainMediumParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("n_spins", self.n_spins),
            ("g_single_rad_s", self.g_single_rad_s),
            ("t1_s", self.t1_s),
            ("t2_s", self.t2_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.t2_s > 2.0 * self.t1_s {
            return Err(DynamicsError::InvalidConfig("t2 must not exceed 2·t1".into()));
        }
        if !(self.pump_efficiency > 0.0 && self.pump_efficiency <= 1.0) {
            return Err(DynamicsError::InvalidConfig(
                "pump_efficiency must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Collective coupling g·√N, rad/s.
    pub fn g_collective(&self) -> f64 {
        self.g_single_rad_s * self.n_spins.sqrt()
    }

    /// Inversion at which gain equals cavity loss, spins.
    pub fn threshold_inversion(&self, kappa_rad_s: f64) -> f64 {
        kappa_rad_s / (2.0 * self.g_single_rad_s.powi(2) * self.t2_s)
    }
}

/// One optical pump shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpPulse {
    /// Energy reaching the crystal, J.
    pub energy_j: f64,
    pub wavelength_m: f64,
    pub duration_s: f64,
    /// Free-running repetition rate; `None` for single shot.
    pub rep_rate_hz: Option<f64>,
}

pub const DEFAULT_PUMP_ENERGY_J: f64 = 30e-3;
pub const REP_RATE_RANGE_HZ: (f64, f64) = (0.5, 10.0);

impl Default for PumpPulse {
    fn default() -> Self {
        Self::single_shot(DEFAULT_PUMP_ENERGY_J)
    }
}

impl PumpPulse {
    pub fn single_shot(energy_j: f64) -> Self {
        Self {
            energy_j,
            wavelength_m: PUMP_WAVELENGTH_M,
            duration_s: PUMP_DURATION_S,
            rep_rate_hz: None,
        }
    }

    pub fn photon_energy_j(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / self.wavelength_m
    }

    pub fn photons(&self) -> f64 {
        self.energy_j / self.photon_energy_j()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.energy_j >= 0.0 && self.energy_j.is_finite()) {
            return Err(DynamicsError::InvalidConfig("pump energy must be ≥ 0".into()));
        }
        if !(self.duration_s > 0.0) || !(self.wavelength_m > 0.0) {
            return Err(DynamicsError::InvalidConfig(
                "pump duration and wavelength must be positive".into(),
            ));
        }
        if let Some(r) = self.rep_rate_hz {
            if !(REP_RATE_RANGE_HZ.0..=REP_RATE_RANGE_HZ.1).contains(&r) {
                return Err(DynamicsError::InvalidConfig(format!(
                    "repetition rate {r} Hz outside [0.5, 10] Hz"
                )));
            }
        }
        Ok(())
    }
}

/// Initial inversion left by the pump: one spin per absorbed-and-converted
/// photon, capped at the spin capacity. Deposited instantaneously at t = 0.
pub fn deposit_inversion(medium: &GainMediumParams, pump: &PumpPulse) -> f64 {
    (medium.pump_efficiency * pump.photons()).min(medium.n_spins).max(0.0)
}

pub const DEFAULT_DURATION_S: f64 = 40e-6;
pub const DEFAULT_OUTPUT_DT_S: f64 = 2e-9;
pub const DEFAULT_COUPLING_EFFICIENCY: f64 = 0.3;
pub const DEFAULT_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub resonator: ResonatorConfig,
    pub medium: GainMediumParams,
    pub pump: PumpPulse,
    /// f_mode − f_spin, Hz. Kept in step with `resonator`.
    pub detuning_hz: f64,
    pub duration_s: f64,
    pub output_dt_s: f64,
    pub seed: u64,
    /// Fraction of the cavity loss rate delivered to the output port.
    pub coupling_efficiency: f64,
    /// Mean photon number the spontaneous seed field sustains in an empty
    /// cavity; 0 switches the seed off.
    #[serde(default = "one")]
    pub seed_photons: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    /// Optional cap on the internal step, s.
    #[serde(default)]
    pub max_step_s: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_rtol() -> f64 {
    DEFAULT_RTOL
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::new(
            ResonatorConfig::default(),
            GainMediumParams::default(),
            PumpPulse::default(),
        )
    }
}

impl SimConfig {
    pub fn new(resonator: ResonatorConfig, medium: GainMediumParams, pump: PumpPulse) -> Self {
        Self {
            detuning_hz: resonator.detuning_hz(),
            resonator,
            medium,
            pump,
            duration_s: DEFAULT_DURATION_S,
            output_dt_s: DEFAULT_OUTPUT_DT_S,
            seed: 0,
            coupling_efficiency: DEFAULT_COUPLING_EFFICIENCY,
            seed_photons: 1.0,
            rtol: DEFAULT_RTOL,
            max_step_s: None,
        }
    }

    /// Same configuration with the cavity retuned to f_spin + `detuning_hz`.
    pub fn with_detuning(&self, detuning_hz: f64) -> Result<Self, DynamicsError> {
        let resonator = self
            .resonator
            .tune_frequency(self.resonator.f_spin_hz + detuning_hz)?;
        Ok(Self {
            detuning_hz,
            resonator,
            ..self.clone()
        })
    }

    pub fn with_energy(&self, energy_j: f64) -> Self {
        let mut out = self.clone();
        out.pump.energy_j = energy_j;
        out
    }

    /// Field energy decay rate, rad/s. The linewidth is taken at the spin
    /// frequency, so tuning changes only the detuning and runs at ±Δ are
    /// mirror images.
    pub fn kappa(&self) -> f64 {
        crate::resonator::cavity_decay_rate(self.resonator.q_loaded, self.resonator.f_spin_hz).kappa_rad_s
    }

    /// Output power per intracavity photon, W.
    pub fn watts_per_photon(&self) -> f64 {
        self.coupling_efficiency * self.kappa() * photon_energy(self.resonator.f_spin_hz)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.resonator.validate()?;
        self.medium.validate()?;
        self.pump.validate()?;
        let bad = |m: &str| Err(DynamicsError::InvalidConfig(m.to_string()));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.output_dt_s > 0.0) || self.output_dt_s > self.duration_s {
            return bad("output_dt must be positive and shorter than the duration");
        }
        if (self.detuning_hz - self.resonator.detuning_hz()).abs() > 1.0 {
            return bad("detuning disagrees with the resonator tuning by more than 1 Hz");
        }
        if !(self.coupling_efficiency > 0.0 && self.coupling_efficiency <= 1.0) {
            return bad("coupling_efficiency must lie in (0, 1]");
        }
        if !(self.seed_photons >= 0.0 && self.seed_photons.is_finite()) {
            return bad("seed_photons must be ≥ 0");
        }
        if !(self.rtol > 0.0 && self.rtol < 1e-2) {
            return bad("rtol must lie in (0, 1e-2)");
        }
        if let Some(h) = self.max_step_s {
            if !(h > 0.0) {
                return bad("max_step must be positive");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pump_photon_count() {
        let p = PumpPulse::single_shot(7e-3);
        assert!((p.photon_energy_j() - 3.734e-19).abs() < 1e-22);
        assert!((p.photons() / 1.8747e16 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn deposit_edges() {
        let m = GainMediumParams::default();
        assert_eq!(deposit_inversion(&m, &PumpPulse::single_shot(0.0)), 0.0);
        assert_eq!(deposit_inversion(&m, &PumpPulse::single_shot(1e3)), m.n_spins);
    }

    #[test]
    fn calibrated_threshold_at_7_mj() {
        let cfg = SimConfig::default();
        let w_thr = cfg.medium.threshold_inversion(cfg.kappa());
        let w0 = deposit_inversion(&cfg.medium, &PumpPulse::single_shot(7e-3));
        assert!((w0 / w_thr - 1.0).abs() < 1e-6, "w0 {w0} w_thr {w_thr}");
    }

    #[test]
    fn retune_keeps_detuning_consistent() {
        let cfg = SimConfig::default().with_detuning(1.0e6).unwrap();
        cfg.validate().unwrap();
        assert!((cfg.detuning_hz - 1.0e6).abs() < 1e-6);
        assert!(SimConfig::default().with_detuning(3e6).is_err());
    }

    #[test]
    fn rep_rate_range() {
        let mut p = PumpPulse::default();
        p.rep_rate_hz = Some(12.0);
        assert!(p.validate().is_err());
        p.rep_rate_hz = Some(0.5);
        assert!(p.validate().is_ok());
    }
}
