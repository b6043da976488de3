use super::{
    emitted_frequency, is_burst, noise_floor_power, simulate_burst, DynamicsError, MaserEnvelope,
    SimConfig,
};
use crate::par::{self, Execution};
use crate::pulse::{delay_to_peak, mw_to_dbm, rabi_frequency_td};
use crate::spectral::{envelope_spectrum, rabi_splitting, EnvelopeSpectrumOptions};
use serde::{Deserialize, Serialize};

/// Per-detuning summary of one simulated burst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetrics {
    pub peak_power_w: f64,
    pub peak_dbm: Option<f64>,
    pub peak_photons: f64,
    pub mased: bool,
    pub delay_to_peak_s: Option<f64>,
    pub rabi_freq_td_hz: Option<f64>,
    /// Completed envelope modulation periods above 10% of the peak.
    pub rabi_cycles: usize,
    pub splitting_hz: Option<f64>,
    pub emitted_freq_hz: Option<f64>,
}

impl SweepMetrics {
    pub fn from_envelope(cfg: &SimConfig, env: &MaserEnvelope, noise_peak_w: f64) -> Self {
        let peak = env.peak_power();
        let mased = is_burst(env, noise_peak_w);
        let rabi = rabi_frequency_td(env).ok().filter(|_| mased);
        let splitting = envelope_spectrum(
            &env.a,
            env.dt(),
            cfg.resonator.f_spin_hz,
            &EnvelopeSpectrumOptions::default(),
        )
        .ok()
        .and_then(|(s, _)| rabi_splitting(&s).ok())
        .filter(|_| mased);
        Self {
            peak_power_w: peak,
            peak_dbm: mw_to_dbm(peak * 1e3),
            peak_photons: env.peak_photons(),
            mased,
            delay_to_peak_s: delay_to_peak(env, 0.0).ok(),
            rabi_cycles: rabi.as_ref().map_or(0, |r| r.cycles()),
            rabi_freq_td_hz: rabi.map(|r| r.freq_hz),
            splitting_hz: splitting,
            emitted_freq_hz: emitted_frequency(env, cfg.resonator.f_spin_hz).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub detuning_hz: f64,
    pub outcome: Result<(MaserEnvelope, SweepMetrics), DynamicsError>,
}

impl SweepEntry {
    pub fn metrics(&self) -> Option<&SweepMetrics> {
        self.outcome.as_ref().ok().map(|(_, m)| m)
    }
}

/// Simulate one burst per detuning with the base seed and pump. Failures
/// are reported per entry; the output order matches `detunings`.
pub fn detuning_sweep(base: &SimConfig, detunings: &[f64], exec: Execution) -> Vec<SweepEntry> {
    par::map(detunings, exec, |&d| SweepEntry {
        detuning_hz: d,
        outcome: run_one(base, d),
    })
}

fn run_one(base: &SimConfig, detuning_hz: f64) -> Result<(MaserEnvelope, SweepMetrics), DynamicsError> {
    let cfg = base.with_detuning(detuning_hz)?;
    let env = simulate_burst(&cfg)?;
    let noise = noise_floor_power(&cfg)?;
    let metrics = SweepMetrics::from_envelope(&cfg, &env, noise);
    Ok((env, metrics))
}
