use super::qfactor::find_dip;
use super::{QEstimateOptions, ReflectionTrace, ResonatorError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingClass {
    Undercoupled,
    Critical,
    Overcoupled,
}

impl std::fmt::Display for CouplingClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Undercoupled => "undercoupled",
            Self::Critical => "critical",
            Self::Overcoupled => "overcoupled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: Complex64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub class: CouplingClass,
    /// |center| − radius: positive when the origin lies outside the circle.
    pub distance: f64,
    pub circle: CircleFit,
}

pub fn classify_coupling(trace: &ReflectionTrace) -> Result<Coupling, ResonatorError> {
    classify_coupling_with(trace, 0.02, &QEstimateOptions::default())
}

/// Fit a circle to the resonance locus and classify by where the origin falls.
pub fn classify_coupling_with(
    trace: &ReflectionTrace,
    epsilon: f64,
    opts: &QEstimateOptions,
) -> Result<Coupling, ResonatorError> {
    let dip = find_dip(trace, opts)?;
    // Keep the part of the locus where the resonance absorbs a noticeable
    // fraction of its peak; far-off points pile up near the baseline.
    let absorbed_peak = dip.baseline_power - dip.min_power;
    let mut pts: Vec<Complex64> = trace
        .s11()
        .iter()
        .copied()
        .filter(|s| dip.baseline_power - s.norm_sqr() >= 0.05 * absorbed_peak)
        .collect();
    if pts.len() < 3 {
        pts = trace.s11().to_vec();
    }
    let circle = kasa_fit(&pts).ok_or_else(|| {
        ResonatorError::InvalidTrace("resonance locus is degenerate (collinear points)".into())
    })?;
    let distance = circle.center.norm() - circle.radius;
    let class = if distance.abs() <= epsilon {
        CouplingClass::Critical
    } else if distance > 0.0 {
        CouplingClass::Undercoupled
    } else {
        CouplingClass::Overcoupled
    };
    Ok(Coupling {
        class,
        distance,
        circle,
    })
}

/// Algebraic least-squares circle: minimise Σ(x² + y² + Dx + Ey + F)².
pub(crate) fn kasa_fit(pts: &[Complex64]) -> Option<CircleFit> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.re).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.im).sum::<f64>() / n;
    // Centre the data for conditioning.
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for p in pts {
        let (x, y) = (p.re - mx, p.im - my);
        let z = x * x + y * y;
        let row = [x, y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[i] -= row[i] * z;
        }
    }
    let [d, e, f] = solve3(m, rhs)?;
    let cx = -0.5 * d;
    let cy = -0.5 * e;
    let r2 = cx * cx + cy * cy - f;
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Some(CircleFit {
        center: Complex64::new(cx + mx, cy + my),
        radius: r2.sqrt(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resonator::{reflection_trace, ReflectionNoise, ResonatorConfig};

    fn trace(beta: f64, noise: Option<ReflectionNoise>) -> ReflectionTrace {
        let cfg = ResonatorConfig::with_loaded_q(2042.0, beta);
        let span = 10.0 * cfg.f_mode_hz / 2042.0;
        reflection_trace(&cfg, cfg.f_mode_hz - span / 2.0, cfg.f_mode_hz + span / 2.0, 401, noise)
            .unwrap()
    }

    #[test]
    fn circle_matches_closed_form() {
        let beta = 0.5;
        let c = classify_coupling(&trace(beta, None)).unwrap();
        let r = beta / (1.0 + beta);
        assert!((c.circle.radius - r).abs() < 1e-9);
        assert!((c.circle.center - Complex64::new(-1.0 + r, 0.0)).norm() < 1e-9);
        assert!((c.distance - (1.0 - beta) / (1.0 + beta)).abs() < 1e-9);
    }

    #[test]
    fn classes_follow_sign_of_beta_minus_one() {
        for beta in [0.3, 0.5, 0.9, 1.1, 2.0, 3.0] {
            let want = if beta < 1.0 {
                CouplingClass::Undercoupled
            } else {
                CouplingClass::Overcoupled
            };
            assert_eq!(classify_coupling(&trace(beta, None)).unwrap().class, want, "beta {beta}");
        }
        assert_eq!(
            classify_coupling(&trace(1.0, None)).unwrap().class,
            CouplingClass::Critical
        );
    }

    #[test]
    fn tolerates_mild_noise() {
        let n = Some(ReflectionNoise { seed: 3, sigma: 0.005 });
        assert_eq!(
            classify_coupling(&trace(0.5, n)).unwrap().class,
            CouplingClass::Undercoupled
        );
        assert_eq!(
            classify_coupling(&trace(3.0, n)).unwrap().class,
            CouplingClass::Overcoupled
        );
    }
}
