use super::{simulate_burst, DynamicsError, MaserEnvelope, SimConfig};
use std::f64::consts::PI;

/// A burst must beat the unpumped seed-noise peak by this factor.
pub const BURST_FACTOR: f64 = 10.0;

/// Photon number that marks a real burst for frequency estimation.
pub const EMISSION_MIN_PHOTONS: f64 = 100.0;

/// Peak output power of the same configuration with the pump off: the seed
/// noise alone, with the same noise realisation.
pub fn noise_floor_power(cfg: &SimConfig) -> Result<f64, DynamicsError> {
    let quiet = cfg.with_energy(0.0);
    Ok(simulate_burst(&quiet)?.peak_power())
}

pub fn is_burst(env: &MaserEnvelope, noise_peak_w: f64) -> bool {
    env.peak_power() > BURST_FACTOR * noise_peak_w
}

/// f_spin plus the power-weighted mean phase velocity of the field over the
/// part of the record above 10% of the peak power.
pub fn emitted_frequency(env: &MaserEnvelope, f_spin_hz: f64) -> Result<f64, DynamicsError> {
    let peak_n = env.peak_photons();
    if !(peak_n > EMISSION_MIN_PHOTONS) || env.len() < 2 {
        return Err(DynamicsError::NoBurst);
    }
    let p_max = env.peak_power();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..env.len() - 1 {
        let p = 0.5 * (env.p_out[k] + env.p_out[k + 1]);
        if p < 0.1 * p_max {
            continue;
        }
        let dphi = (env.a[k + 1] * env.a[k].conj()).arg();
        let f = dphi / (2.0 * PI * (env.t[k + 1] - env.t[k]));
        num += p * f;
        den += p;
    }
    if den == 0.0 {
        return Err(DynamicsError::NoBurst);
    }
    Ok(f_spin_hz + num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn tone_offset_is_recovered() {
        let dt = 2e-9;
        let n = 2000;
        let env = MaserEnvelope {
            t: (0..n).map(|k| k as f64 * dt).collect(),
            a: (0..n)
                .map(|k| Complex64::from_polar(1e4, 2.0 * PI * 0.6e6 * k as f64 * dt))
                .collect(),
            n_photons: vec![1e8; n],
            w: vec![0.0; n],
            p_out: vec![1e-3; n],
        };
        let f = emitted_frequency(&env, 1.4495e9).unwrap();
        assert!((f - 1.4495e9 - 0.6e6).abs() < 1.0);
    }

    #[test]
    fn zero_envelope_has_no_burst() {
        let env = MaserEnvelope {
            t: vec![0.0, 1e-9, 2e-9],
            a: vec![Complex64::new(0.0, 0.0); 3],
            n_photons: vec![0.0; 3],
            w: vec![0.0; 3],
            p_out: vec![0.0; 3],
        };
        assert_eq!(emitted_frequency(&env, 1.4495e9), Err(DynamicsError::NoBurst));
    }
}
