use super::{ResonatorConfig, ResonatorError};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Complex one-port reflection sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionTrace {
    freq_hz: Vec<f64>,
    s11: Vec<Complex64>,
}

impl ReflectionTrace {
    pub fn new(freq_hz: Vec<f64>, s11: Vec<Complex64>) -> Result<Self, ResonatorError> {
        if freq_hz.len() != s11.len() {
            return Err(ResonatorError::InvalidTrace(format!(
                "{} frequencies but {} samples",
                freq_hz.len(),
                s11.len()
            )));
        }
        if freq_hz.len() < 3 {
            return Err(ResonatorError::InvalidTrace("need at least 3 points".into()));
        }
        if freq_hz.iter().any(|f| !f.is_finite()) || s11.iter().any(|s| !s.is_finite()) {
            return Err(ResonatorError::InvalidTrace("non-finite value".into()));
        }
        if let Some(i) = freq_hz.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ResonatorError::InvalidGrid(format!(
                "frequency not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = s11.iter().position(|s| s.norm() > 1.0 + 1e-9) {
            return Err(ResonatorError::InvalidTrace(format!(
                "|s11| = {} > 1 at index {i}",
                s11[i].norm()
            )));
        }
        Ok(Self { freq_hz, s11 })
    }

    pub fn freq_hz(&self) -> &[f64] {
        &self.freq_hz
    }

    pub fn s11(&self) -> &[Complex64] {
        &self.s11
    }

    pub fn len(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_hz.is_empty()
    }

    /// |S11|² per point.
    pub fn power(&self) -> Vec<f64> {
        self.s11.iter().map(|s| s.norm_sqr()).collect()
    }

    /// |S11| in dB per point.
    pub fn magnitude_db(&self) -> Vec<f64> {
        self.s11.iter().map(|s| 10.0 * s.norm_sqr().log10()).collect()
    }
}

/// Additive complex Gaussian noise on each S11 sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionNoise {
    pub seed: u64,
    /// Standard deviation per quadrature, |S11| units.
    pub sigma: f64,
}

/// Closed-form single-resonance reflection at `f_hz`.
pub fn s11_at(cfg: &ResonatorConfig, f_hz: f64) -> Complex64 {
    let beta = cfg.coupling_beta;
    let x = 2.0 * cfg.q_unloaded * (f_hz - cfg.f_mode_hz) / cfg.f_mode_hz;
    Complex64::new(beta - 1.0, -x) / Complex64::new(beta + 1.0, x)
}

/// Virtual VNA sweep over `n_points` evenly spaced frequencies.
///
/// Noisy samples whose magnitude would exceed one are pulled back onto the
/// unit circle so the result stays passive.
pub fn reflection_trace(
    cfg: &ResonatorConfig,
    f_start_hz: f64,
    f_stop_hz: f64,
    n_points: usize,
    noise: Option<ReflectionNoise>,
) -> Result<ReflectionTrace, ResonatorError> {
    if !(f_start_hz < f_stop_hz) || !f_start_hz.is_finite() || !f_stop_hz.is_finite() {
        return Err(ResonatorError::InvalidGrid(format!(
            "f_start {f_start_hz} must be below f_stop {f_stop_hz}"
        )));
    }
    if n_points < 3 {
        return Err(ResonatorError::InvalidGrid("n_points must be at least 3".into()));
    }
    if !(cfg.q_unloaded > 0.0 && cfg.coupling_beta > 0.0 && cfg.f_mode_hz > 0.0) {
        return Err(ResonatorError::InvalidParameter(
            "q_unloaded, coupling_beta and f_mode_hz must be positive".into(),
        ));
    }
    let step = (f_stop_hz - f_start_hz) / (n_points - 1) as f64;
    let freq: Vec<f64> = (0..n_points)
        .map(|k| {
            if k == n_points - 1 {
                f_stop_hz
            } else {
                f_start_hz + step * k as f64
            }
        })
        .collect();
    let mut s11: Vec<Complex64> = freq.iter().map(|&f| s11_at(cfg, f)).collect();

    if let Some(n) = noise {
        if n.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
            let dist = Normal::new(0.0, n.sigma)
                .map_err(|e| ResonatorError::InvalidParameter(e.to_string()))?;
            for s in &mut s11 {
                *s += Complex64::new(dist.sample(&mut rng), dist.sample(&mut rng));
                let m = s.norm();
                if m > 1.0 {
                    *s /= m;
                }
            }
        }
    }
    ReflectionTrace::new(freq, s11)
}
