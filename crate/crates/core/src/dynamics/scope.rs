use super::{DynamicsError, MaserEnvelope};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_SCOPE_RATE_HZ: f64 = 6e9;

/// Real passband voltage across the scope load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaserTrace {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub sample_rate_hz: f64,
    pub load_ohms: f64,
    pub carrier_hint_hz: f64,
}

impl MaserTrace {
    pub fn new(
        t: Vec<f64>,
        v: Vec<f64>,
        sample_rate_hz: f64,
        load_ohms: f64,
        carrier_hint_hz: f64,
    ) -> Result<Self, DynamicsError> {
        if t.len() != v.len() {
            return Err(DynamicsError::InvalidConfig("t and v differ in length".into()));
        }
        if !(load_ohms > 0.0) {
            return Err(DynamicsError::InvalidConfig("load must be positive".into()));
        }
        check_sampling(sample_rate_hz, carrier_hint_hz)?;
        Ok(Self {
            t,
            v,
            sample_rate_hz,
            load_ohms,
            carrier_hint_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

pub(crate) fn check_sampling(sample_rate_hz: f64, carrier_hz: f64) -> Result<(), DynamicsError> {
    if !(sample_rate_hz > 0.0) || sample_rate_hz < 4.0 * carrier_hz.abs() {
        return Err(DynamicsError::UndersampledCarrier {
            sample_rate_hz,
            carrier_hz,
        });
    }
    Ok(())
}

const LANCZOS_A: usize = 8;

fn lanczos(x: f64) -> f64 {
    let a = LANCZOS_A as f64;
    if x == 0.0 {
        1.0
    } else if x.abs() >= a {
        0.0
    } else {
        let px = PI * x;
        a * px.sin() * (px / a).sin() / (px * px)
    }
}

/// Band-limited (Lanczos) resampling of a uniformly sampled complex series
/// starting at t = 0. Samples outside the record count as zero.
pub(crate) fn resample(z: &[Complex64], dt_in: f64, t_out: &[f64]) -> Vec<Complex64> {
    let n = z.len() as isize;
    let half = LANCZOS_A as isize;
    t_out
        .iter()
        .map(|&t| {
            let u = t / dt_in;
            let i0 = u.floor() as isize;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in (i0 - half + 1)..=(i0 + half) {
                if k >= 0 && k < n {
                    acc += z[k as usize] * lanczos(u - k as f64);
                }
            }
            acc
        })
        .collect()
}

/// Put the envelope on a carrier and sample it like the oscilloscope.
///
/// The amplitude is √(p_out·R), so the trace's V_peak²/R equals the peak
/// output power. The envelope phase carries any offset from `carrier_hz`.
pub fn synthesize_scope_trace(
    env: &MaserEnvelope,
    carrier_hz: f64,
    sample_rate_hz: f64,
    load_ohms: f64,
) -> Result<MaserTrace, DynamicsError> {
    check_sampling(sample_rate_hz, carrier_hz)?;
    if !(load_ohms > 0.0) {
        return Err(DynamicsError::InvalidConfig("load must be positive".into()));
    }
    if env.len() < 2 {
        return Err(DynamicsError::InvalidConfig("envelope needs at least two samples".into()));
    }
    let dt_env = env.dt();
    let t_end = env.t[env.len() - 1];
    let n = (t_end * sample_rate_hz).floor() as usize + 1;
    let t: Vec<f64> = (0..n).map(|k| k as f64 / sample_rate_hz).collect();
    let z = resample(&env.voltage_envelope(load_ohms), dt_env, &t);
    let w = 2.0 * PI * carrier_hz;
    let v = t
        .iter()
        .zip(&z)
        .map(|(&tk, zk)| {
            let ph = (w * tk).rem_euclid(2.0 * PI);
            zk.re * ph.cos() - zk.im * ph.sin()
        })
        .collect();
    MaserTrace::new(t, v, sample_rate_hz, load_ohms, carrier_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_envelope(p_w: f64, n: usize, dt: f64) -> MaserEnvelope {
        MaserEnvelope {
            t: (0..n).map(|k| k as f64 * dt).collect(),
            a: vec![Complex64::new(1.0, 0.0); n],
            n_photons: vec![1.0; n],
            w: vec![0.0; n],
            p_out: vec![p_w; n],
        }
    }

    #[test]
    fn constant_power_gives_expected_voltage() {
        let env = flat_envelope(0.338e-3, 1001, 2e-9);
        let tr = synthesize_scope_trace(&env, 1.4495e9, 6e9, 50.0).unwrap();
        // Away from the record edges the resampled amplitude is flat.
        let mid = &tr.v[tr.len() / 4..3 * tr.len() / 4];
        let vmax = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((vmax - 0.13).abs() < 1e-3, "{vmax}");
    }

    #[test]
    fn zero_envelope_gives_zero_trace() {
        let env = flat_envelope(0.0, 100, 2e-9);
        let tr = synthesize_scope_trace(&env, 1.4495e9, 6e9, 50.0).unwrap();
        assert!(tr.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn undersampled_carrier_is_rejected() {
        let env = flat_envelope(1e-3, 100, 2e-9);
        assert!(matches!(
            synthesize_scope_trace(&env, 1.4495e9, 5e9, 50.0),
            Err(DynamicsError::UndersampledCarrier { .. })
        ));
    }

    #[test]
    fn resample_reproduces_band_limited_tone() {
        let dt = 2e-9;
        let f = 3e6;
        let z: Vec<Complex64> = (0..2000)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * f * k as f64 * dt))
            .collect();
        let t: Vec<f64> = (0..500).map(|k| 1e-6 + k as f64 * 0.37e-9).collect();
        let r = resample(&z, dt, &t);
        for (tk, rk) in t.iter().zip(&r) {
            let exact = Complex64::from_polar(1.0, 2.0 * PI * f * tk);
            assert!((rk - exact).norm() < 1e-3);
        }
    }
}
