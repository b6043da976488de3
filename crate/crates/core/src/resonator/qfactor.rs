use super::{ReflectionTrace, ResonatorError};
use serde::{Deserialize, Serialize};

/// Which level on the dip defines the bandwidth edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipConvention {
    /// Absorbed power 1 − |S11|² at half its peak, i.e. |S11|² halfway
    /// between the baseline and the minimum. For a single Lorentzian this
    /// edge pair brackets exactly f/Q_L regardless of coupling.
    #[default]
    HalfAbsorbedPower,
    /// 3 dB above the minimum of |S11| in dB when the dip is at least 6 dB
    /// deep, otherwise half the depth in dB. Biased for undercoupled dips
    /// (it measures a width that depends on β); kept for comparison with
    /// instrument readouts that use it.
    DbAboveMinimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEstimateOptions {
    /// Dips shallower than this are treated as absent, dB.
    pub depth_threshold_db: f64,
    /// Off-resonance |S11| level, dB. A calibrated VNA reads 0 dB.
    pub baseline_db: f64,
    pub convention: DipConvention,
}

impl Default for QEstimateOptions {
    fn default() -> Self {
        Self {
            depth_threshold_db: 3.0,
            baseline_db: 0.0,
            convention: DipConvention::HalfAbsorbedPower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QFactorEstimate {
    pub f_res_hz: f64,
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub q_loaded: f64,
}

impl QFactorEstimate {
    /// Build from a dip frequency and its two bandwidth edges.
    pub fn from_crossings(f_lo_hz: f64, f_res_hz: f64, f_hi_hz: f64) -> Result<Self, ResonatorError> {
        if !(f_lo_hz < f_res_hz && f_res_hz < f_hi_hz) || !f_lo_hz.is_finite() || !f_hi_hz.is_finite() {
            return Err(ResonatorError::InvalidParameter(format!(
                "need f_lo < f_res < f_hi, got {f_lo_hz}, {f_res_hz}, {f_hi_hz}"
            )));
        }
        Ok(Self {
            f_res_hz,
            f_lo_hz,
            f_hi_hz,
            q_loaded: f_res_hz / (f_hi_hz - f_lo_hz),
        })
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.f_hi_hz - self.f_lo_hz
    }

    /// Q rounded to the nearest integer for display; the struct keeps full precision.
    pub fn q_display(&self) -> u64 {
        self.q_loaded.round() as u64
    }
}

pub(super) struct Dip {
    pub index: usize,
    pub min_power: f64,
    pub baseline_power: f64,
}

pub(super) fn find_dip(trace: &ReflectionTrace, opts: &QEstimateOptions) -> Result<Dip, ResonatorError> {
    let p = trace.power();
    let (index, &min_power) = p
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("trace has at least three points");
    let baseline_power = 10f64.powf(opts.baseline_db / 10.0);
    let depth_db = if min_power > 0.0 {
        10.0 * (baseline_power / min_power).log10()
    } else {
        f64::INFINITY
    };
    if !(depth_db >= opts.depth_threshold_db) {
        return Err(ResonatorError::NoResonanceFound {
            depth_db,
            threshold_db: opts.depth_threshold_db,
        });
    }
    Ok(Dip {
        index,
        min_power,
        baseline_power,
    })
}

pub fn estimate_q_loaded(trace: &ReflectionTrace) -> Result<QFactorEstimate, ResonatorError> {
    estimate_q_loaded_with(trace, &QEstimateOptions::default())
}

pub fn estimate_q_loaded_with(
    trace: &ReflectionTrace,
    opts: &QEstimateOptions,
) -> Result<QFactorEstimate, ResonatorError> {
    let dip = find_dip(trace, opts)?;
    let f = trace.freq_hz();
    let p = trace.power();
    let level = match opts.convention {
        DipConvention::HalfAbsorbedPower => 0.5 * (dip.baseline_power + dip.min_power),
        DipConvention::DbAboveMinimum => {
            let min_db = 10.0 * dip.min_power.max(f64::MIN_POSITIVE).log10();
            let depth = opts.baseline_db - min_db;
            let rise = if depth >= 6.0 { 3.0 } else { 0.5 * depth };
            10f64.powf((min_db + rise) / 10.0)
        }
    };

    let k = dip.index;
    let lo = (1..=k)
        .rev()
        .find(|&i| p[i - 1] >= level)
        .map(|i| interp(f[i - 1], p[i - 1], f[i], p[i], level))
        .ok_or(ResonatorError::BandwidthOutsideSpan)?;
    let hi = (k..p.len() - 1)
        .find(|&i| p[i + 1] >= level)
        .map(|i| interp(f[i], p[i], f[i + 1], p[i + 1], level))
        .ok_or(ResonatorError::BandwidthOutsideSpan)?;

    let f_res = refine_minimum(f, &p, k).clamp(lo.next_up(), hi.next_down());
    QFactorEstimate::from_crossings(lo, f_res, hi)
}

fn interp(f0: f64, p0: f64, f1: f64, p1: f64, level: f64) -> f64 {
    if p1 == p0 {
        return 0.5 * (f0 + f1);
    }
    f0 + (level - p0) * (f1 - f0) / (p1 - p0)
}

/// Vertex of the parabola through the minimum and its neighbours.
fn refine_minimum(f: &[f64], p: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 == p.len() {
        return f[k];
    }
    let (x0, x1, x2) = (f[k - 1], f[k], f[k + 1]);
    let (y0, y1, y2) = (p[k - 1], p[k], p[k + 1]);
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curv = (d1 - d0) / (x2 - x0);
    if curv <= 0.0 {
        return x1;
    }
    let vertex = 0.5 * (x0 + x1) - d0 / (2.0 * curv);
    vertex.clamp(x0, x2)
}
