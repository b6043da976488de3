use super::{Envelope, PulseError};
use crate::spectral::{find_peaks, parabolic_vertex};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiOptions {
    /// The burst region is where |a| exceeds this fraction of its maximum.
    pub region_fraction: f64,
    /// Minimum prominence of a modulation maximum, as a fraction of the
    /// envelope maximum.
    pub min_prominence: f64,
}

impl Default for RabiOptions {
    fn default() -> Self {
        Self {
            region_fraction: 0.1,
            min_prominence: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiEstimate {
    /// From the mean spacing of successive maxima.
    pub freq_hz: f64,
    /// First non-zero-lag maximum of the envelope autocorrelation, when
    /// one exists.
    pub autocorr_hz: Option<f64>,
    /// Interpolated times of the maxima used, s.
    pub maxima_s: Vec<f64>,
}

impl RabiEstimate {
    /// Completed modulation periods inside the burst region.
    pub fn cycles(&self) -> usize {
        self.maxima_s.len().saturating_sub(1)
    }
}

pub fn rabi_frequency_td<E: Envelope + ?Sized>(env: &E) -> Result<RabiEstimate, PulseError> {
    rabi_frequency_td_with(env, &RabiOptions::default())
}

pub fn rabi_frequency_td_with<E: Envelope + ?Sized>(
    env: &E,
    opts: &RabiOptions,
) -> Result<RabiEstimate, PulseError> {
    let t = env.times();
    let mag = env.magnitude();
    if mag.len() < 3 {
        return Err(PulseError::InsufficientCycles { found: 0 });
    }
    let max = mag.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(PulseError::InsufficientCycles { found: 0 });
    }
    let level = opts.region_fraction * max;
    let start = mag.iter().position(|&m| m >= level).unwrap_or(0);
    let end = mag.iter().rposition(|&m| m >= level).unwrap_or(mag.len() - 1);
    let region = &mag[start..=end];
    let peaks = find_peaks(region, opts.min_prominence * max);
    if peaks.len() < 2 {
        return Err(PulseError::InsufficientCycles { found: peaks.len() });
    }
    let dt = t[1] - t[0];
    let maxima_s: Vec<f64> = peaks
        .iter()
        .map(|p| t[start] + parabolic_vertex(region, p.index) * dt)
        .collect();
    let span = maxima_s[maxima_s.len() - 1] - maxima_s[0];
    let freq_hz = (maxima_s.len() - 1) as f64 / span;
    Ok(RabiEstimate {
        freq_hz,
        autocorr_hz: autocorr_frequency(region, dt),
        maxima_s,
    })
}

fn autocorr_frequency(x: &[f64], dt: f64) -> Option<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let r: Vec<f64> = (0..n / 2)
        .map(|lag| {
            d[..n - lag]
                .iter()
                .zip(&d[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (n - lag) as f64
        })
        .collect();
    if r.is_empty() || r[0] <= 0.0 {
        return None;
    }
    let first_neg = r.iter().position(|&v| v < 0.0)?;
    let rest = &r[first_neg..];
    let peaks = find_peaks(rest, 0.0);
    let p = peaks.iter().find(|p| p.height > 0.0)?;
    let lag = first_neg as f64 + parabolic_vertex(rest, p.index);
    Some(1.0 / (lag * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::Magnitude;
    use std::f64::consts::PI;

    fn series(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Magnitude {
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let mag = t.iter().map(|&t| f(t)).collect();
        Magnitude { t, mag }
    }

    #[test]
    fn cosine_modulation_frequency() {
        let env = series(|t| 1.0 + 0.5 * (2.0 * PI * 0.8e6 * t).cos(), 5e-9, 4000);
        let est = rabi_frequency_td(&env).unwrap();
        assert!((est.freq_hz / 0.8e6 - 1.0).abs() < 0.02, "{}", est.freq_hz);
        let ac = est.autocorr_hz.unwrap();
        assert!((ac / 0.8e6 - 1.0).abs() < 0.02, "{ac}");
        assert!(est.cycles() >= 14);
    }

    #[test]
    fn monotone_decay_has_insufficient_cycles() {
        let env = series(|t| (-t / 2e-6).exp(), 5e-9, 4000);
        assert!(matches!(
            rabi_frequency_td(&env),
            Err(PulseError::InsufficientCycles { .. })
        ));
    }

    #[test]
    fn decaying_ringing() {
        let env = series(
            |t| (-t / 4e-6).exp() * (1.0 + 0.8 * (2.0 * PI * 1.2e6 * t).cos()),
            5e-9,
            4000,
        );
        let est = rabi_frequency_td(&env).unwrap();
        assert!((est.freq_hz / 1.2e6 - 1.0).abs() < 0.02, "{}", est.freq_hz);
    }
}
