//! The virtual instrument: one cavity, one gain medium, one pump laser and
//! a log of shots kept on disk.

use crate::config::BenchConfig;
use crate::error::BenchError;
use crate::shot::{read_record, take_shot, write_shot_dir, Scope, ShotRecord};
use maser_core::dynamics::{GainMediumParams, PumpPulse, SimConfig};
use maser_core::resonator::{
    classify_coupling, estimate_q_loaded, reflection_trace, Coupling, QFactorEstimate, ReflectionTrace,
    ResonatorConfig,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const SESSION_FILE: &str = "session.toml";
pub const SHOTS_DIR: &str = "shots";

/// Seed of shot `id` under `master`: one ChaCha stream per shot.
pub fn derive_seed(master: u64, id: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneTarget {
    HeightMm(f64),
    FrequencyHz(f64),
    /// Relative to the current mode frequency.
    StepHz(f64),
}

/// A VNA sweep with the quantities read off it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S11Sweep {
    pub freq_hz: Vec<f64>,
    pub s11_re: Vec<f64>,
    pub s11_im: Vec<f64>,
    pub magnitude_db: Vec<f64>,
    pub q: Option<QFactorEstimate>,
    pub coupling: Option<Coupling>,
}

impl From<&ReflectionTrace> for S11Sweep {
    fn from(t: &ReflectionTrace) -> Self {
        Self {
            freq_hz: t.freq_hz().to_vec(),
            s11_re: t.s11().iter().map(|s| s.re).collect(),
            s11_im: t.s11().iter().map(|s| s.im).collect(),
            magnitude_db: t.magnitude_db(),
            q: estimate_q_loaded(t).ok(),
            coupling: classify_coupling(t).ok(),
        }
    }
}

/// Sweep centred on the mode, at least ten linewidths wide.
pub fn s11_sweep(resonator: &ResonatorConfig, span_hz: f64, points: usize) -> Result<ReflectionTrace, BenchError> {
    let span = span_hz.max(10.0 * resonator.decay().linewidth_hz);
    let f = resonator.f_mode_hz;
    Ok(reflection_trace(resonator, f - 0.5 * span, f + 0.5 * span, points, None)?)
}

#[derive(Debug)]
pub struct BenchSession {
    config: BenchConfig,
    resonator: ResonatorConfig,
    medium: GainMediumParams,
    pump: PumpPulse,
    shot_log: Vec<ShotRecord>,
    run_dir: PathBuf,
    next_id: u64,
}

impl BenchSession {
    /// Open `config`'s run directory. A directory that already holds a
    /// session resumes it (tuning, pump and shot log); otherwise a new
    /// session starts from `config`.
    pub fn open(config: BenchConfig) -> Result<Self, BenchError> {
        let run_dir = config.resolved_run_dir();
        Self::open_in(config, run_dir)
    }

    /// [`Self::open`] with an explicit run directory.
    pub fn open_in(config: BenchConfig, run_dir: PathBuf) -> Result<Self, BenchError> {
        if run_dir.join(SESSION_FILE).exists() {
            return Self::load(&run_dir);
        }
        let shots = run_dir.join(SHOTS_DIR);
        std::fs::create_dir_all(&shots).map_err(|e| BenchError::io(&shots, e))?;
        let s = Self {
            resonator: config.resonator()?,
            medium: config.medium()?,
            pump: config.pump(),
            config,
            shot_log: Vec::new(),
            run_dir,
            next_id: 1,
        };
        s.save_state()?;
        Ok(s)
    }

    /// Reconstruct a session from its run directory.
    pub fn load(run_dir: &Path) -> Result<Self, BenchError> {
        let mut config = BenchConfig::load(&run_dir.join(SESSION_FILE))?;
        config.run_dir = Some(run_dir.to_path_buf());
        let shots_dir = run_dir.join(SHOTS_DIR);
        let mut ids: Vec<u64> = std::fs::read_dir(&shots_dir)
            .map_err(|e| BenchError::io(&shots_dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().to_str()?.parse().ok())
            .collect();
        ids.sort_unstable();
        let shot_log = ids
            .iter()
            .map(|id| read_record(&shots_dir.join(id.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let next_id = ids.last().map_or(1, |l| l + 1);
        Ok(Self {
            resonator: config.resonator()?,
            medium: config.medium()?,
            pump: config.pump(),
            config,
            shot_log,
            run_dir: run_dir.to_path_buf(),
            next_id,
        })
    }

    /// Current state as a config file; reopening it reproduces the session.
    pub fn state_config(&self) -> BenchConfig {
        let mut c = self.config.clone();
        c.run_dir = None;
        c.cavity.detuning_mhz = None;
        c.cavity.ceiling_height_mm = None;
        c.cavity.f_mode_hz = Some(self.resonator.f_mode_hz);
        c.pump.energy_mj = self.pump.energy_j * 1e3;
        c.pump.rep_rate_hz = self.pump.rep_rate_hz;
        c.medium.n_spins = Some(self.medium.n_spins);
        c.medium.g_single_rad_s = Some(self.medium.g_single_rad_s);
        c.medium.t1_us = Some(self.medium.t1_s * 1e6);
        c.medium.t2_ns = Some(self.medium.t2_s * 1e9);
        c.medium.pump_efficiency = Some(self.medium.pump_efficiency);
        c.calibration_file = None;
        c
    }

    fn save_state(&self) -> Result<(), BenchError> {
        let path = self.run_dir.join(SESSION_FILE);
        let tmp = path.with_extension("toml.partial");
        std::fs::write(&tmp, self.state_config().to_toml()).map_err(|e| BenchError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| BenchError::io(&path, e))
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn resonator(&self) -> &ResonatorConfig {
        &self.resonator
    }

    pub fn medium(&self) -> &GainMediumParams {
        &self.medium
    }

    pub fn pump(&self) -> &PumpPulse {
        &self.pump
    }

    pub fn config(&self) -> &BenchConfig {
        &self.config
    }

    pub fn shots(&self) -> &[ShotRecord] {
        &self.shot_log
    }

    pub fn shot_dir(&self, id: u64) -> PathBuf {
        self.run_dir.join(SHOTS_DIR).join(id.to_string())
    }

    pub fn master_seed(&self) -> u64 {
        self.config.master_seed
    }

    /// Move the ceiling and return a fresh sweep around the new mode.
    pub fn tune(&mut self, target: TuneTarget) -> Result<ReflectionTrace, BenchError> {
        let r = &self.resonator;
        let next = match target {
            TuneTarget::HeightMm(h) => r.tune_ceiling(h)?,
            TuneTarget::FrequencyHz(f) => r.tune_frequency(f)?,
            TuneTarget::StepHz(df) => r.tune_frequency(r.f_mode_hz + df)?,
        };
        self.resonator = next;
        self.save_state()?;
        self.s11(None, None)
    }

    pub fn s11(&self, span_hz: Option<f64>, points: Option<usize>) -> Result<ReflectionTrace, BenchError> {
        s11_sweep(
            &self.resonator,
            span_hz.unwrap_or(self.config.vna.span_mhz * 1e6),
            points.unwrap_or(self.config.vna.points),
        )
    }

    pub fn set_pump_energy(&mut self, energy_j: f64) -> Result<(), BenchError> {
        let pump = PumpPulse {
            energy_j,
            ..self.pump.clone()
        };
        pump.validate()?;
        self.pump = pump;
        self.save_state()
    }

    /// Simulation settings the next shot would use, before its seed is drawn.
    pub fn next_config(&self, energy_j: Option<f64>) -> Result<SimConfig, BenchError> {
        let mut pump = self.pump.clone();
        if let Some(e) = energy_j {
            pump.energy_j = e;
        }
        let seed = derive_seed(self.config.master_seed, self.next_id);
        let cfg = self
            .config
            .sim_config(self.resonator.clone(), self.medium.clone(), pump, seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fire the pump laser once. `energy_j` overrides the session pump for
    /// this shot only.
    pub fn fire(&mut self, energy_j: Option<f64>) -> Result<ShotRecord, BenchError> {
        let cfg = self.next_config(energy_j)?;
        let scope = Scope {
            sample_rate_hz: self.config.sample_rate_hz(),
            load_ohms: self.config.scope.load_ohms,
        };
        let data = take_shot(&cfg, scope)?;
        let id = self.next_id;
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let record = ShotRecord::new(id, timestamp_ms, cfg, &data);
        write_shot_dir(&self.shot_dir(id), &record, &data)?;
        self.next_id += 1;
        self.shot_log.push(record.clone());
        Ok(record)
    }
}
