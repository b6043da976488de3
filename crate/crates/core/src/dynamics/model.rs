use super::integrator::{integrate, State, StepError, Tolerance, DIM};
use super::params::{deposit_inversion, SimConfig};
use super::DynamicsError;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Burst envelope in the frame rotating at the spin frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaserEnvelope {
    /// Seconds after the pump trigger.
    pub t: Vec<f64>,
    /// Cavity field, √photons.
    pub a: Vec<Complex64>,
    pub n_photons: Vec<f64>,
    /// Inversion, spins.
    pub w: Vec<f64>,
    /// Power delivered to the output port, W.
    pub p_out: Vec<f64>,
}

impl MaserEnvelope {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    pub fn peak_power(&self) -> f64 {
        self.p_out.iter().copied().fold(0.0, f64::max)
    }

    pub fn peak_photons(&self) -> f64 {
        self.n_photons.iter().copied().fold(0.0, f64::max)
    }

    /// Time-integrated output energy, J (trapezoid rule).
    pub fn emitted_energy(&self) -> f64 {
        self.t
            .windows(2)
            .zip(self.p_out.windows(2))
            .map(|(t, p)| 0.5 * (t[1] - t[0]) * (p[0] + p[1]))
            .sum()
    }

    /// Complex output-port amplitude √(R·p_out)·e^{i·arg a}, V.
    pub fn voltage_envelope(&self, load_ohms: f64) -> Vec<Complex64> {
        self.a
            .iter()
            .zip(&self.p_out)
            .map(|(a, p)| {
                let mag = (p * load_ohms).sqrt();
                if a.norm() > 0.0 {
                    a / a.norm() * mag
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    }
}

/// Integrate the field / polarisation / inversion equations.
///
/// Internally the state is carried as a/√N, v/√N and w/N so every component
/// is O(1) at the burst peak. The seed field is the cavity's own
/// fluctuation: a complex Gaussian held constant over each output interval
/// in the frame of the cavity mode, so one seed gives the same realisation
/// relative to the mode at every tuning. Its power spectral density keeps
/// one photon (times `seed_photons`) in an empty, unpumped cavity. Draws
/// are conjugated for negative detuning, so runs at ±Δ are exact mirror
/// images.
pub fn simulate_burst(cfg: &SimConfig) -> Result<MaserEnvelope, DynamicsError> {
    cfg.validate()?;
    let m = &cfg.medium;
    let n_spins = m.n_spins;
    let sqrt_n = n_spins.sqrt();
    let kappa = cfg.kappa();
    let half_kappa = 0.5 * kappa;
    let dw = 2.0 * PI * cfg.detuning_hz;
    let g = m.g_collective();
    let inv_t1 = 1.0 / m.t1_s;
    let inv_t2 = 1.0 / m.t2_s;
    let u_eq = 0.0;
    let u0 = deposit_inversion(m, &cfg.pump) / n_spins;

    let dt = cfg.output_dt_s;
    let n_out = (cfg.duration_s / dt).round() as usize;
    let watts_per_photon = cfg.watts_per_photon();

    let tol = Tolerance {
        rtol: cfg.rtol,
        // A millionth of a single photon's amplitude for the field and
        // polarisation; inversion is relative to N.
        atol: [
            1e-6 / sqrt_n,
            1e-6 / sqrt_n,
            1e-6 / sqrt_n,
            1e-6 / sqrt_n,
            1e-12,
        ],
    };
    let max_step = cfg.max_step_s.unwrap_or(f64::INFINITY);

    let noise_sigma = if cfg.seed_photons > 0.0 {
        (kappa * cfg.seed_photons / (2.0 * dt)).sqrt() / sqrt_n
    } else {
        0.0
    };
    let conj = cfg.detuning_hz < 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut y: State = [0.0, 0.0, 0.0, 0.0, u0];
    let mut h = dt.min(1e-9);

    let mut env = MaserEnvelope {
        t: Vec::with_capacity(n_out + 1),
        a: Vec::with_capacity(n_out + 1),
        n_photons: Vec::with_capacity(n_out + 1),
        w: Vec::with_capacity(n_out + 1),
        p_out: Vec::with_capacity(n_out + 1),
    };
    let push = |env: &mut MaserEnvelope, t: f64, y: &State| {
        let a = Complex64::new(y[0], y[1]) * sqrt_n;
        let n = a.norm_sqr();
        env.t.push(t);
        env.a.push(a);
        env.n_photons.push(n);
        env.w.push(y[4] * n_spins);
        env.p_out.push(n * watts_per_photon);
    };
    push(&mut env, 0.0, &y);

    for k in 0..n_out {
        let (xr, xi) = if noise_sigma > 0.0 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            (noise_sigma * re, noise_sigma * if conj { -im } else { im })
        } else {
            (0.0, 0.0)
        };
        let rhs = |t: f64, s: &State| -> State {
            let (ar, ai, vr, vi, u) = (s[0], s[1], s[2], s[3], s[4]);
            let (sn, cs) = (dw * t).sin_cos();
            let (xr, xi) = (xr * cs - xi * sn, xr * sn + xi * cs);
            [
                -half_kappa * ar - dw * ai + g * vr + xr,
                -half_kappa * ai + dw * ar + g * vi + xi,
                -inv_t2 * vr + g * ar * u,
                -inv_t2 * vi + g * ai * u,
                -(u - u_eq) * inv_t1 - 4.0 * g * (ar * vr + ai * vi),
            ]
        };
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        integrate(&rhs, t0, t1, &mut y, &mut h, max_step, &tol).map_err(|e| match e {
            StepError::Underflow { t } => DynamicsError::IntegrationFailure { t_s: t },
            StepError::NonFinite { t } => DynamicsError::NonPhysicalState { t_s: t },
        })?;
        if y.iter().any(|v| !v.is_finite()) || y[4].abs() > 1.0 + 1e-6 {
            return Err(DynamicsError::NonPhysicalState { t_s: t1 });
        }
        push(&mut env, t1, &y);
    }
    debug_assert_eq!(y.len(), DIM);
    Ok(env)
}
