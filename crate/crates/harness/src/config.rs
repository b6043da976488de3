//! Declarative bench configuration. Every dimensioned key carries its unit.

use crate::error::BenchError;
use maser_core::dynamics::calibration::StoredCalibration;
use maser_core::dynamics::{GainMediumParams, PumpPulse, SimConfig};
use maser_core::resonator::ResonatorConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable that overrides `run_dir`.
pub const RUN_DIR_ENV: &str = "MASER_RUN_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub master_seed: u64,
    pub run_dir: Option<PathBuf>,
    /// TOML written by `maser calibrate`; the bundled result when absent.
    pub calibration_file: Option<PathBuf>,
    pub cavity: CavitySection,
    pub pump: PumpSection,
    pub medium: MediumSection,
    pub simulation: SimulationSection,
    pub scope: ScopeSection,
    pub vna: VnaSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavitySection {
    /// At most one of the three tuning keys may be set. With none, the
    /// mode sits on the spin line.
    pub ceiling_height_mm: Option<f64>,
    pub detuning_mhz: Option<f64>,
    pub f_mode_hz: Option<f64>,
    pub q_loaded: f64,
    pub coupling_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSection {
    pub energy_mj: f64,
    pub rep_rate_hz: Option<f64>,
}

/// Optional overrides of the calibrated gain medium.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumSection {
    pub n_spins: Option<f64>,
    pub g_single_rad_s: Option<f64>,
    pub t1_us: Option<f64>,
    pub t2_ns: Option<f64>,
    pub pump_efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub duration_us: f64,
    pub output_dt_ns: f64,
    pub coupling_efficiency: f64,
    pub seed_photons: f64,
    pub rtol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScopeSection {
    pub sample_rate_ghz: f64,
    pub load_ohms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VnaSection {
    pub span_mhz: f64,
    pub points: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            run_dir: None,
            calibration_file: None,
            cavity: CavitySection::default(),
            pump: PumpSection::default(),
            medium: MediumSection::default(),
            simulation: SimulationSection::default(),
            scope: ScopeSection::default(),
            vna: VnaSection::default(),
        }
    }
}

impl Default for CavitySection {
    fn default() -> Self {
        Self {
            ceiling_height_mm: None,
            detuning_mhz: None,
            f_mode_hz: None,
            q_loaded: maser_core::resonator::DEFAULT_Q_LOADED,
            coupling_beta: maser_core::resonator::DEFAULT_COUPLING_BETA,
        }
    }
}

impl Default for PumpSection {
    fn default() -> Self {
        Self {
            energy_mj: maser_core::dynamics::DEFAULT_PUMP_ENERGY_J * 1e3,
            rep_rate_hz: None,
        }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            duration_us: maser_core::dynamics::DEFAULT_DURATION_S * 1e6,
            output_dt_ns: maser_core::dynamics::DEFAULT_OUTPUT_DT_S * 1e9,
            coupling_efficiency: maser_core::dynamics::DEFAULT_COUPLING_EFFICIENCY,
            seed_photons: 1.0,
            rtol: maser_core::dynamics::DEFAULT_RTOL,
        }
    }
}

impl Default for ScopeSection {
    fn default() -> Self {
        Self {
            sample_rate_ghz: maser_core::dynamics::DEFAULT_SCOPE_RATE_HZ * 1e-9,
            load_ohms: maser_core::constants::DEFAULT_LOAD_OHMS,
        }
    }
}

impl Default for VnaSection {
    fn default() -> Self {
        Self {
            span_mhz: 8.0,
            points: 801,
        }
    }
}

impl BenchConfig {
    pub fn from_toml(s: &str) -> Result<Self, BenchError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative paths inside the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = cfg.calibration_file.take() {
            cfg.calibration_file = Some(base.join(p));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// `run_dir` after the environment override, falling back to `./maser-run`.
    pub fn resolved_run_dir(&self) -> PathBuf {
        std::env::var_os(RUN_DIR_ENV)
            .map(PathBuf::from)
            .or_else(|| self.run_dir.clone())
            .unwrap_or_else(|| PathBuf::from("maser-run"))
    }

    pub fn resonator(&self) -> Result<ResonatorConfig, BenchError> {
        let c = &self.cavity;
        if !(c.q_loaded > 0.0 && c.coupling_beta > 0.0) {
            return Err(BenchError::Config("q_loaded and coupling_beta must be positive".into()));
        }
        let base = ResonatorConfig::with_loaded_q(c.q_loaded, c.coupling_beta);
        let r = match (c.ceiling_height_mm, c.detuning_mhz, c.f_mode_hz) {
            (None, None, None) => base,
            (Some(h), None, None) => base.tune_ceiling(h)?,
            (None, Some(d), None) => base.tune_frequency(base.f_spin_hz + d * 1e6)?,
            (None, None, Some(f)) => base.tune_frequency(f)?,
            _ => {
                return Err(BenchError::Config(
                    "set at most one of cavity.ceiling_height_mm, cavity.detuning_mhz, cavity.f_mode_hz".into(),
                ))
            }
        };
        Ok(r)
    }

    pub fn medium(&self) -> Result<GainMediumParams, BenchError> {
        let mut m = match &self.calibration_file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| BenchError::io(p, e))?;
                StoredCalibration::from_toml(&text)?.medium
            }
            None => GainMediumParams::default(),
        };
        let o = &self.medium;
        if let Some(v) = o.n_spins {
            m.n_spins = v;
        }
        if let Some(v) = o.g_single_rad_s {
            m.g_single_rad_s = v;
        }
        if let Some(v) = o.t1_us {
            m.t1_s = v / 1e6;
        }
        if let Some(v) = o.t2_ns {
            m.t2_s = v / 1e9;
        }
        if let Some(v) = o.pump_efficiency {
            m.pump_efficiency = v;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn pump(&self) -> PumpPulse {
        PumpPulse {
            rep_rate_hz: self.pump.rep_rate_hz,
            ..PumpPulse::single_shot(self.pump.energy_mj / 1e3)
        }
    }

    /// Simulation settings for the given cavity, medium, pump and seed.
    pub fn sim_config(
        &self,
        resonator: ResonatorConfig,
        medium: GainMediumParams,
        pump: PumpPulse,
        seed: u64,
    ) -> SimConfig {
        let s = &self.simulation;
        let mut cfg = SimConfig::new(resonator, medium, pump);
        cfg.duration_s = s.duration_us / 1e6;
        cfg.output_dt_s = s.output_dt_ns / 1e9;
        cfg.coupling_efficiency = s.coupling_efficiency;
        cfg.seed_photons = s.seed_photons;
        cfg.rtol = s.rtol;
        cfg.seed = seed;
        cfg
    }

    /// The full simulation this file describes, with its master seed.
    pub fn to_sim_config(&self) -> Result<SimConfig, BenchError> {
        let cfg = self.sim_config(self.resonator()?, self.medium()?, self.pump(), self.master_seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.scope.sample_rate_ghz * 1e9
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_bench() {
        let cfg = BenchConfig::from_toml("").unwrap();
        assert_eq!(cfg, BenchConfig::default());
        let sim = cfg.to_sim_config().unwrap();
        assert_eq!(sim, SimConfig::default());
    }

    #[test]
    fn units_are_converted() {
        let cfg = BenchConfig::from_toml(
            "master_seed = 9\n[cavity]\ndetuning_mhz = 0.5\n[pump]\nenergy_mj = 12.5\n[medium]\nt2_ns = 80\n",
        )
        .unwrap();
        let sim = cfg.to_sim_config().unwrap();
        assert_eq!(sim.pump.energy_j, 12.5e-3);
        assert_eq!(sim.seed, 9);
        assert!((sim.detuning_hz - 0.5e6).abs() < 1e-6);
        assert!((sim.medium.t2_s - 80e-9).abs() < 1e-20);
    }

    #[test]
    fn typos_are_rejected() {
        assert!(matches!(
            BenchConfig::from_toml("[pump]\nenergy_j = 0.03\n"),
            Err(BenchError::Config(_))
        ));
    }

    #[test]
    fn serialised_default_reads_back() {
        let cfg = BenchConfig::default();
        assert_eq!(BenchConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
