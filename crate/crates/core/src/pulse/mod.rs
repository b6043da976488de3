//! Scalar measurements on maser shots: peak power, delay to the first peak,
//! quadrature demodulation and the time-domain Rabi frequency.

mod demod;
mod rabi;

pub use demod::{demodulate, demodulate_with, Baseband, DemodOptions};
pub use rabi::{rabi_frequency_td, rabi_frequency_td_with, RabiEstimate, RabiOptions};

use crate::dynamics::{MaserEnvelope, MaserTrace};
use crate::spectral::find_peaks;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("no burst above the noise floor")]
    NoBurst,
    #[error("sample rate {sample_rate_hz} Hz is below 4× the reference {carrier_hz} Hz")]
    UndersampledCarrier { sample_rate_hz: f64, carrier_hz: f64 },
    #[error("fewer than two envelope maxima in the burst ({found} found)")]
    InsufficientCycles { found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Anything with a sampled, non-negative envelope magnitude.
pub trait Envelope {
    fn times(&self) -> &[f64];
    fn magnitude(&self) -> Vec<f64>;
}

impl Envelope for MaserEnvelope {
    fn times(&self) -> &[f64] {
        &self.t
    }
    fn magnitude(&self) -> Vec<f64> {
        self.a.iter().map(|a| a.norm()).collect()
    }
}

/// A bare magnitude series.
#[derive(Debug, Clone, PartialEq)]
pub struct Magnitude {
    pub t: Vec<f64>,
    pub mag: Vec<f64>,
}

impl Envelope for Magnitude {
    fn times(&self) -> &[f64] {
        &self.t
    }
    fn magnitude(&self) -> Vec<f64> {
        self.mag.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPower {
    pub v_peak_v: f64,
    pub p_mw: f64,
    /// Absent for a zero trace.
    pub p_dbm: Option<f64>,
}

pub fn mw_to_dbm(p_mw: f64) -> Option<f64> {
    (p_mw > 0.0).then(|| 10.0 * p_mw.log10())
}

pub fn dbm_to_mw(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

/// Peak power with P = V_peak²/R.
pub fn peak_power_from_voltage(v_peak_v: f64, load_ohms: f64) -> Result<PeakPower, PulseError> {
    if !(load_ohms > 0.0) {
        return Err(PulseError::InvalidInput("load must be positive".into()));
    }
    let v = v_peak_v.abs();
    let p_mw = v * v / load_ohms * 1000.0;
    Ok(PeakPower {
        v_peak_v: v,
        p_mw,
        p_dbm: mw_to_dbm(p_mw),
    })
}

pub fn peak_power(trace: &MaserTrace) -> Result<PeakPower, PulseError> {
    if trace.v.is_empty() {
        return Err(PulseError::EmptyTrace);
    }
    let v_peak = trace.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    peak_power_from_voltage(v_peak, trace.load_ohms)
}

/// Fraction of the global maximum the first peak must reach.
pub const FIRST_PEAK_FRACTION: f64 = 0.8;
/// Peak-to-median ratio below which an envelope is treated as noise.
pub const BURST_TO_MEDIAN: f64 = 5.0;

/// Time from the trigger to the first envelope maximum reaching 80% of the
/// global maximum.
pub fn delay_to_peak<E: Envelope + ?Sized>(env: &E, trigger_time_s: f64) -> Result<f64, PulseError> {
    delay_to_peak_with(env, trigger_time_s, FIRST_PEAK_FRACTION)
}

pub fn delay_to_peak_with<E: Envelope + ?Sized>(
    env: &E,
    trigger_time_s: f64,
    fraction: f64,
) -> Result<f64, PulseError> {
    let t = env.times();
    let mag = env.magnitude();
    if mag.is_empty() {
        return Err(PulseError::EmptyTrace);
    }
    let max = mag.iter().copied().fold(0.0, f64::max);
    if !(max > BURST_TO_MEDIAN * median(&mag)) {
        return Err(PulseError::NoBurst);
    }
    let level = fraction * max;
    // A maximum sitting on the last sample still counts.
    let mut padded = mag.clone();
    padded.push(f64::NEG_INFINITY);
    padded.insert(0, f64::NEG_INFINITY);
    let first = find_peaks(&padded, 0.0)
        .into_iter()
        .map(|p| p.index - 1)
        .find(|&i| mag[i] >= level)
        .ok_or(PulseError::NoBurst)?;
    Ok(t[first] - trigger_time_s)
}

pub(crate) fn median(x: &[f64]) -> f64 {
    let mut v: Vec<f64> = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// The exported per-shot measurement record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseMetrics {
    pub v_peak_v: f64,
    pub p_peak_mw: f64,
    pub p_peak_dbm: Option<f64>,
    pub delay_to_peak_s: Option<f64>,
    pub rabi_freq_td_hz: Option<f64>,
    pub carrier_est_hz: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scope_reading_converts_to_dbm() {
        let p = peak_power_from_voltage(0.13, 50.0).unwrap();
        assert_eq!(p.p_mw, 0.13 * 0.13 / 50.0 * 1000.0);
        assert!((p.p_mw - 0.338).abs() < 1e-12);
        assert!((p.p_dbm.unwrap() - (-4.710_833_1)).abs() < 1e-6);
        let p = peak_power_from_voltage(0.2236, 50.0).unwrap();
        assert!((p.p_mw - 1.0).abs() < 1e-3 && p.p_dbm.unwrap().abs() < 2e-3);
    }

    #[test]
    fn zero_trace_has_no_dbm() {
        let tr = MaserTrace::new(vec![0.0; 4], vec![0.0; 4], 6e9, 50.0, 1.4495e9).unwrap();
        let p = peak_power(&tr).unwrap();
        assert_eq!(p.p_mw, 0.0);
        assert_eq!(p.p_dbm, None);
        let empty = MaserTrace::new(vec![], vec![], 6e9, 50.0, 1.4495e9).unwrap();
        assert_eq!(peak_power(&empty), Err(PulseError::EmptyTrace));
    }

    #[test]
    fn delay_of_constructed_envelope() {
        let dt = 10e-9;
        let t: Vec<f64> = (0..1000).map(|k| k as f64 * dt).collect();
        let mag = t
            .iter()
            .map(|&t| (-((t - 3.0e-6) / 0.5e-6).powi(2)).exp() + 1e-3)
            .collect();
        let d = delay_to_peak(&Magnitude { t, mag }, 0.0).unwrap();
        assert!((d - 3.0e-6).abs() <= dt);
    }

    #[test]
    fn first_of_several_peaks_above_80_percent() {
        let dt = 10e-9;
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * dt).collect();
        let bump = |t: f64, c: f64, h: f64| h * (-((t - c) / 0.3e-6).powi(2)).exp();
        let mag = t
            .iter()
            .map(|&t| bump(t, 2e-6, 0.5) + bump(t, 5e-6, 0.85) + bump(t, 9e-6, 1.0))
            .collect();
        let d = delay_to_peak(&Magnitude { t, mag }, 0.0).unwrap();
        assert!((d - 5e-6).abs() <= dt);
    }

    #[test]
    fn flat_noise_has_no_burst() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let t: Vec<f64> = (0..8000).map(|k| k as f64 * 5e-9).collect();
        let mag = (0..8000)
            .map(|_| {
                let (x, y): (f64, f64) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                (x * x + y * y).sqrt()
            })
            .collect();
        assert_eq!(delay_to_peak(&Magnitude { t, mag }, 0.0), Err(PulseError::NoBurst));
    }

    #[test]
    fn dbm_round_trip() {
        for v in [1e-6, 0.01, 0.13, 1.0, 17.0] {
            let p = peak_power_from_voltage(v, 50.0).unwrap();
            let back = dbm_to_mw(p.p_dbm.unwrap());
            assert!((back / p.p_mw - 1.0).abs() < 1e-12);
        }
    }
}
