use super::SpectralError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Autoregressive model x[n] + Σ a_k·x[n−k] = e[n].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub coeffs: Vec<Complex64>,
    /// Final forward/backward prediction-error power.
    pub noise_var: f64,
    pub sample_dt: f64,
    /// Reflection coefficients of each stage.
    pub reflection: Vec<Complex64>,
    /// The fit came from a real-valued series, so only [0, fs/2] is meaningful.
    pub real_input: bool,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

/// Prediction-error power after each stage 0..=max_order, plus the final model.
pub(crate) struct BurgPath {
    pub model: ArModel,
    pub errors: Vec<f64>,
}

pub(crate) fn check_signal(x: &[Complex64], order: usize) -> Result<(), SpectralError> {
    if x.is_empty() {
        return Err(SpectralError::EmptySignal);
    }
    if order >= x.len() {
        return Err(SpectralError::OrderTooLarge {
            order,
            len: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFiniteInput);
    }
    Ok(())
}

pub(crate) fn burg_path(x: &[Complex64], order: usize, dt: f64) -> Result<BurgPath, SpectralError> {
    check_signal(x, order)?;
    let n = x.len();
    let mut f = x.to_vec();
    let mut b = x.to_vec();
    let mut a: Vec<Complex64> = Vec::with_capacity(order);
    let mut ks = Vec::with_capacity(order);
    let mut err = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    let mut errors = Vec::with_capacity(order + 1);
    errors.push(err);

    for m in 1..=order {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for i in m..n {
            num += f[i] * b[i - 1].conj();
            den += f[i].norm_sqr() + b[i - 1].norm_sqr();
        }
        let k = if den > 0.0 {
            -2.0 * num / den
        } else {
            Complex64::new(0.0, 0.0)
        };
        assert!(k.norm() <= 1.0 + 1e-12, "reflection coefficient |k| = {} > 1", k.norm());

        let prev = a.clone();
        for i in 0..m - 1 {
            a[i] = prev[i] + k * prev[m - 2 - i].conj();
        }
        a.push(k);
        ks.push(k);

        for i in (m..n).rev() {
            let fi = f[i];
            let bi = b[i - 1];
            f[i] = fi + k * bi;
            b[i] = bi + k.conj() * fi;
        }
        err *= 1.0 - k.norm_sqr();
        errors.push(err);
    }
    Ok(BurgPath {
        model: ArModel {
            coeffs: a,
            noise_var: err,
            sample_dt: dt,
            reflection: ks,
            real_input: false,
        },
        errors,
    })
}

/// Burg fit of a complex series sampled every `dt` seconds.
pub fn burg_fit(x: &[Complex64], order: usize, dt: f64) -> Result<ArModel, SpectralError> {
    Ok(burg_path(x, order, dt)?.model)
}

/// Burg fit of a real series. The recursion runs on the samples as they are
/// (zero imaginary part), so the coefficients come out real.
pub fn burg_fit_real(x: &[f64], order: usize, dt: f64) -> Result<ArModel, SpectralError> {
    let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut m = burg_fit(&z, order, dt)?;
    m.real_input = true;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn ar_series(coeffs: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; n + 500];
        for i in 0..x.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            let mut v = e;
            for (k, c) in coeffs.iter().enumerate() {
                if i > k {
                    v += c * x[i - 1 - k];
                }
            }
            x[i] = v;
        }
        x.split_off(500)
    }

    #[test]
    fn order_zero_is_mean_power() {
        let x = [1.0, -2.0, 3.0];
        let m = burg_fit_real(&x, 0, 1.0).unwrap();
        assert_eq!(m.order(), 0);
        assert!((m.noise_var - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ar1_recovery() {
        let x = ar_series(&[0.9], 100_000, 11);
        let m = burg_fit_real(&x, 1, 1.0).unwrap();
        assert!((m.coeffs[0].re / -0.9 - 1.0).abs() < 0.02, "{}", m.coeffs[0]);
        assert!(m.coeffs[0].im.abs() < 1e-12);
        assert!((m.noise_var - 1.0).abs() < 0.03);
    }

    #[test]
    fn ar2_recovery() {
        let x = ar_series(&[0.75, -0.5], 100_000, 12);
        let m = burg_fit_real(&x, 2, 1.0).unwrap();
        assert!((m.coeffs[0].re / -0.75 - 1.0).abs() < 0.02, "{:?}", m.coeffs);
        assert!((m.coeffs[1].re / 0.5 - 1.0).abs() < 0.02, "{:?}", m.coeffs);
    }

    #[test]
    fn order_must_be_below_length() {
        assert_eq!(
            burg_fit_real(&[1.0, 2.0], 2, 1.0),
            Err(SpectralError::OrderTooLarge { order: 2, len: 2 })
        );
        assert_eq!(
            burg_fit_real(&[1.0, f64::NAN, 2.0], 1, 1.0),
            Err(SpectralError::NonFiniteInput)
        );
    }

    #[test]
    fn identical_input_gives_identical_coefficients() {
        let x = ar_series(&[0.5, 0.2], 4000, 3);
        assert_eq!(burg_fit_real(&x, 8, 1.0), burg_fit_real(&x, 8, 1.0));
    }
}
