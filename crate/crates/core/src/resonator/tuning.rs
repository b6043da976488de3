use super::{ResonatorError, CEILING_MAX_MM, CEILING_MIN_MM};
use crate::constants::F_SPIN_HZ;
use serde::{Deserialize, Serialize};

/// Piecewise-linear ceiling-height → mode-frequency calibration table.
///
/// Heights are strictly increasing and frequencies strictly monotone (either
/// direction), so the table is invertible. Lowering the ceiling towards the
/// ring raises the TE01δ frequency, which is the sign used by the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct TuningCurve {
    points: Vec<(f64, f64)>,
}

impl Default for TuningCurve {
    fn default() -> Self {
        Self {
            points: vec![
                (CEILING_MIN_MM, F_SPIN_HZ + 2.5e6),
                (CEILING_MAX_MM, F_SPIN_HZ - 2.5e6),
            ],
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for TuningCurve {
    type Error = ResonatorError;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<TuningCurve> for Vec<(f64, f64)> {
    fn from(c: TuningCurve) -> Self {
        c.points
    }
}

impl TuningCurve {
    /// `points` are `(height_mm, f_hz)` anchors.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, ResonatorError> {
        let invalid = |m: &str| Err(ResonatorError::InvalidParameter(m.to_string()));
        if points.len() < 2 {
            return invalid("tuning curve needs at least two anchors");
        }
        if points.iter().any(|(h, f)| !h.is_finite() || !f.is_finite()) {
            return invalid("tuning curve anchors must be finite");
        }
        let first = points[0].0;
        let last = points[points.len() - 1].0;
        if first > CEILING_MIN_MM || last < CEILING_MAX_MM {
            return invalid("tuning curve must span the full ceiling range");
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return invalid("tuning curve heights must be strictly increasing");
        }
        let sign = (points[1].1 - points[0].1).signum();
        if sign == 0.0
            || points
                .windows(2)
                .any(|w| (w[1].1 - w[0].1).signum() != sign)
        {
            return invalid("tuning curve frequencies must be strictly monotone");
        }
        Ok(Self { points })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Mode frequency range reachable over the allowed ceiling heights.
    pub fn frequency_range(&self) -> (f64, f64) {
        let a = self.eval(CEILING_MIN_MM);
        let b = self.eval(CEILING_MAX_MM);
        (a.min(b), a.max(b))
    }

    pub fn frequency_at(&self, height_mm: f64) -> Result<f64, ResonatorError> {
        if !(CEILING_MIN_MM..=CEILING_MAX_MM).contains(&height_mm) {
            return Err(ResonatorError::HeightOutOfRange { height_mm });
        }
        Ok(self.eval(height_mm))
    }

    pub fn height_for(&self, f_hz: f64) -> Result<f64, ResonatorError> {
        let (lo, hi) = self.frequency_range();
        if !(lo..=hi).contains(&f_hz) {
            return Err(ResonatorError::FrequencyUnreachable {
                freq_hz: f_hz,
                min_hz: lo,
                max_hz: hi,
            });
        }
        for w in self.points.windows(2) {
            let (h0, f0) = w[0];
            let (h1, f1) = w[1];
            if (f_hz - f0) * (f_hz - f1) <= 0.0 {
                let h = h0 + (f_hz - f0) * (h1 - h0) / (f1 - f0);
                return Ok(h.clamp(CEILING_MIN_MM, CEILING_MAX_MM));
            }
        }
        unreachable!("frequency inside range must fall in one segment")
    }

    fn eval(&self, h: f64) -> f64 {
        let pts = &self.points;
        let i = pts
            .windows(2)
            .position(|w| h <= w[1].0)
            .unwrap_or(pts.len() - 2);
        let (h0, f0) = pts[i];
        let (h1, f1) = pts[i + 1];
        f0 + (h - h0) * (f1 - f0) / (h1 - h0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_covers_plus_minus_2_5_mhz() {
        let (lo, hi) = TuningCurve::default().frequency_range();
        assert!(lo <= F_SPIN_HZ - 2.5e6 + 1e-3);
        assert!(hi >= F_SPIN_HZ + 2.5e6 - 1e-3);
    }

    #[test]
    fn rejects_non_monotone_tables() {
        let bad = vec![(4.5, 1.0e9), (10.0, 1.1e9), (20.0, 1.05e9)];
        assert!(TuningCurve::new(bad).is_err());
        let short = vec![(5.0, 1.0e9), (20.0, 1.1e9)];
        assert!(TuningCurve::new(short).is_err());
    }

    #[test]
    fn multi_segment_inverse() {
        let c = TuningCurve::new(vec![
            (4.5, 1.4525e9),
            (8.0, 1.4505e9),
            (14.0, 1.4490e9),
            (20.0, 1.4465e9),
        ])
        .unwrap();
        for h in [4.5, 6.0, 8.0, 11.3, 19.9, 20.0] {
            let f = c.frequency_at(h).unwrap();
            assert!((c.height_for(f).unwrap() - h).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn slope_sign_is_consistent(h1 in 4.5f64..20.0, h2 in 4.5f64..20.0) {
            prop_assume!((h1 - h2).abs() > 1e-6);
            let c = TuningCurve::default();
            let (f1, f2) = (c.frequency_at(h1).unwrap(), c.frequency_at(h2).unwrap());
            prop_assert!(f1 != f2);
            prop_assert_eq!((f2 - f1).signum() * (h2 - h1).signum(), -1.0);
        }
    }
}
