use super::{Envelope, PulseError};
use crate::dynamics::MaserTrace;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemodOptions {
    pub cutoff_hz: f64,
    /// Target rate of the returned envelope; the actual rate is the input
    /// rate divided by the nearest integer factor not exceeding it.
    pub output_rate_hz: f64,
}

impl Default for DemodOptions {
    fn default() -> Self {
        Self {
            cutoff_hz: 25e6,
            output_rate_hz: 200e6,
        }
    }
}

/// Complex baseband envelope of a passband trace, V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseband {
    pub t: Vec<f64>,
    pub z: Vec<Complex64>,
    pub f_ref_hz: f64,
}

impl Baseband {
    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

impl Envelope for Baseband {
    fn times(&self) -> &[f64] {
        &self.t
    }
    fn magnitude(&self) -> Vec<f64> {
        self.z.iter().map(|z| z.norm()).collect()
    }
}

pub fn demodulate(trace: &MaserTrace, f_ref_hz: f64) -> Result<Baseband, PulseError> {
    demodulate_with(trace, f_ref_hz, &DemodOptions::default())
}

/// Mix down by f_ref and low-pass with a symmetric Hamming-windowed sinc.
///
/// The filter is evaluated only at the decimated output instants and is
/// centred on them, so the output needs no group-delay correction.
pub fn demodulate_with(
    trace: &MaserTrace,
    f_ref_hz: f64,
    opts: &DemodOptions,
) -> Result<Baseband, PulseError> {
    let fs = trace.sample_rate_hz;
    if !(fs > 0.0) || fs < 4.0 * f_ref_hz.abs() {
        return Err(PulseError::UndersampledCarrier {
            sample_rate_hz: fs,
            carrier_hz: f_ref_hz,
        });
    }
    if !(opts.cutoff_hz > 0.0 && opts.cutoff_hz < 0.5 * fs) {
        return Err(PulseError::InvalidInput("cutoff must lie in (0, fs/2)".into()));
    }
    if trace.v.is_empty() {
        return Err(PulseError::EmptyTrace);
    }
    let decim = ((fs / opts.output_rate_hz).floor() as usize).max(1);
    let taps = lowpass_taps(opts.cutoff_hz / fs);
    let half = (taps.len() / 2) as isize;

    let w = 2.0 * PI * f_ref_hz;
    let mixed: Vec<Complex64> = trace
        .t
        .iter()
        .zip(&trace.v)
        .map(|(&t, &v)| {
            let ph = (w * t).rem_euclid(2.0 * PI);
            Complex64::new(2.0 * v * ph.cos(), -2.0 * v * ph.sin())
        })
        .collect();

    let n = mixed.len() as isize;
    let mut t_out = Vec::with_capacity(mixed.len() / decim + 1);
    let mut z_out = Vec::with_capacity(mixed.len() / decim + 1);
    for c in (0..n).step_by(decim) {
        let lo = (c - half).max(0);
        let hi = (c + half).min(n - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in lo..=hi {
            acc += mixed[k as usize] * taps[(k - c + half) as usize];
        }
        t_out.push(trace.t[c as usize]);
        z_out.push(acc);
    }
    Ok(Baseband {
        t: t_out,
        z: z_out,
        f_ref_hz,
    })
}

/// Unit-DC-gain linear-phase low-pass; `fc` is cutoff / sample rate.
/// Length is chosen so the Hamming transition band is about one cutoff wide.
fn lowpass_taps(fc: f64) -> Vec<f64> {
    let half = (1.65 / fc).ceil() as usize;
    let len = 2 * half + 1;
    let mut h: Vec<f64> = (0..len)
        .map(|i| {
            let m = i as f64 - half as f64;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * m).sin() / (PI * m)
            };
            let win = 0.54 - 0.46 * (2.0 * PI * i as f64 / (len - 1) as f64).cos();
            sinc * win
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= sum);
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn passband(f_ref: f64, fs: f64, dur: f64, sig: impl Fn(f64) -> f64) -> MaserTrace {
        let n = (dur * fs) as usize;
        let t: Vec<f64> = (0..n).map(|k| k as f64 / fs).collect();
        let v = t.iter().map(|&t| sig(t)).collect();
        MaserTrace::new(t, v, fs, 50.0, f_ref).unwrap()
    }

    #[test]
    fn pure_tone_gives_flat_envelope() {
        let f = 1.4495e9;
        let tr = passband(f, 6e9, 4e-6, |t| 0.7 * (2.0 * PI * f * t + 0.3).cos());
        let bb = demodulate(&tr, f).unwrap();
        let mag = bb.magnitude();
        let settled = &mag[20..mag.len() - 20];
        for m in settled {
            assert!((m / 0.7 - 1.0).abs() < 0.01, "{m}");
        }
        let ph = bb.z[bb.len() / 2].arg();
        assert!((ph - 0.3).abs() < 1e-3);
        assert!((bb.dt() - 5e-9).abs() < 1e-15);
    }

    #[test]
    fn two_tones_beat_at_their_spacing() {
        let f = 1.4495e9;
        let df = 0.4e6;
        let tr = passband(f, 6e9, 10e-6, |t| {
            (2.0 * PI * (f + df) * t).cos() + (2.0 * PI * (f - df) * t).cos()
        });
        let bb = demodulate(&tr, f).unwrap();
        let est = crate::pulse::rabi_frequency_td(&bb).unwrap();
        assert!((est.freq_hz / 0.8e6 - 1.0).abs() < 0.01, "{}", est.freq_hz);
    }

    #[test]
    fn undersampled_reference_is_rejected() {
        let tr = passband(1e9, 6e9, 1e-7, |_| 0.0);
        assert!(matches!(
            demodulate(&tr, 2e9),
            Err(PulseError::UndersampledCarrier { .. })
        ));
    }

    #[test]
    fn taps_are_symmetric_with_unit_gain() {
        let h = lowpass_taps(25e6 / 6e9);
        assert_eq!(h.len() % 2, 1);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..h.len() / 2 {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-15);
        }
    }
}
