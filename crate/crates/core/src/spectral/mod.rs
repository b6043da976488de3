//! Burg maximum-entropy spectra and peak analysis.

mod burg;
mod peaks;

pub use burg::{burg_fit, burg_fit_real, ArModel};
pub use peaks::{find_peaks, parabolic_vertex, Peak};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("order {order} not below signal length {len}")]
    OrderTooLarge { order: usize, len: usize },
    #[error("signal contains non-finite samples")]
    NonFiniteInput,
    #[error("frequency {freq_hz} Hz outside the band of the model")]
    FrequencyOutOfRange { freq_hz: f64 },
    #[error("spectrum has no peaks")]
    NoPeaks,
    #[error("fewer than two qualifying peaks")]
    NoSplitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderCriterion {
    #[default]
    Fpe,
    Aic,
}

/// Order in 0..=max_order minimising the chosen criterion.
pub fn select_order(
    x: &[Complex64],
    criterion: OrderCriterion,
    max_order: usize,
) -> Result<usize, SpectralError> {
    let n = x.len();
    if max_order > 0 && 2 * max_order >= n {
        return Err(SpectralError::OrderTooLarge {
            order: max_order,
            len: n,
        });
    }
    let path = burg::burg_path(x, max_order, 1.0)?;
    let nf = n as f64;
    let score = |p: usize, s2: f64| -> f64 {
        let pf = p as f64;
        match criterion {
            OrderCriterion::Fpe => s2 * (nf + pf + 1.0) / (nf - pf - 1.0),
            OrderCriterion::Aic => nf * s2.max(f64::MIN_POSITIVE).ln() + 2.0 * pf,
        }
    };
    let best = path
        .errors
        .iter()
        .enumerate()
        .map(|(p, &s2)| (p, score(p, s2)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
        .unwrap_or(0);
    Ok(best)
}

/// Default upper bound on the AR order for a record of `n` samples.
pub fn default_max_order(n: usize) -> usize {
    (n / 3).min(100).min(n.saturating_sub(1) / 2)
}

/// Whether 1 + Σ a_k z^{-k} has every root strictly inside the unit circle
/// (step-down recursion back to reflection coefficients).
pub fn is_stable(coeffs: &[Complex64]) -> bool {
    let mut a = coeffs.to_vec();
    while let Some(&k) = a.last() {
        if !(k.norm() < 1.0) {
            return false;
        }
        let m = a.len();
        let scale = 1.0 - k.norm_sqr();
        let prev: Vec<Complex64> = (0..m - 1)
            .map(|i| (a[i] - k * a[m - 2 - i].conj()) / scale)
            .collect();
        a = prev;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub freq_hz: f64,
    pub height: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub freq_hz: Vec<f64>,
    pub psd: Vec<f64>,
    pub normalized: bool,
    /// Sorted by descending prominence.
    pub peaks: Vec<SpectralPeak>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdOptions {
    pub normalize: bool,
    /// Peak prominence threshold as a fraction of the spectrum maximum.
    pub prominence_fraction: f64,
}

impl Default for PsdOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            prominence_fraction: 0.05,
        }
    }
}

/// Evaluate noise_var·dt / |1 + Σ a_k e^{−2πi f k dt}|² on `freq_hz`.
///
/// Models of real series give the one-sided density on [0, fs/2] (twice the
/// two-sided value), so in both cases the density integrates to the variance.
///
/// High-order fits have peaks much narrower than any practical grid, so each
/// grid maximum is refined on the continuous density before heights and
/// prominences are compared. Normalisation divides by the tallest refined
/// peak, so the curve itself may stay below 1.
pub fn mem_psd(
    model: &ArModel,
    freq_hz: &[f64],
    opts: &PsdOptions,
) -> Result<PowerSpectrum, SpectralError> {
    let dt = model.sample_dt;
    let nyq = 0.5 / dt;
    let lo = if model.real_input { 0.0 } else { -nyq };
    if let Some(&f) = freq_hz
        .iter()
        .find(|&&f| !(f >= lo - 1e-9 * nyq && f <= nyq * (1.0 + 1e-9)))
    {
        return Err(SpectralError::FrequencyOutOfRange { freq_hz: f });
    }
    let mut psd: Vec<f64> = freq_hz.iter().map(|&f| density(model, f)).collect();
    let mut peaks = spectrum_peaks(model, freq_hz, &psd);
    let max = peaks
        .iter()
        .map(|p| p.height)
        .chain(psd.iter().copied())
        .fold(0.0, f64::max);
    peaks.retain(|p| p.prominence >= opts.prominence_fraction * max);
    if opts.normalize && max > 0.0 {
        psd.iter_mut().for_each(|p| *p /= max);
        for p in &mut peaks {
            p.height /= max;
            p.prominence /= max;
        }
    }
    Ok(PowerSpectrum {
        freq_hz: freq_hz.to_vec(),
        psd,
        normalized: opts.normalize,
        peaks,
    })
}

fn density(model: &ArModel, f: f64) -> f64 {
    let dt = model.sample_dt;
    let sides = if model.real_input { 2.0 } else { 1.0 };
    let step = Complex64::from_polar(1.0, -2.0 * PI * f * dt);
    let mut z = step;
    let mut den = Complex64::new(1.0, 0.0);
    for a in &model.coeffs {
        den += a * z;
        z *= step;
    }
    sides * model.noise_var * dt / den.norm_sqr()
}

/// Golden-section search for the maximum of the density on [a, b].
fn refine_max(model: &ArModel, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (density(model, c), density(model, d));
    let tol = 1e-9 * (b - a).abs().max(f64::MIN_POSITIVE);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = density(model, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = density(model, d);
        }
    }
    let x = 0.5 * (a + b);
    (x, density(model, x))
}

/// Grid maxima refined on the continuous density, sorted by descending
/// prominence. Prominence is measured from the grid saddle.
fn spectrum_peaks(model: &ArModel, freq_hz: &[f64], psd: &[f64]) -> Vec<SpectralPeak> {
    let grid_max = psd.iter().copied().fold(0.0, f64::max);
    let mut out: Vec<SpectralPeak> = find_peaks(psd, 1e-6 * grid_max)
        .into_iter()
        .map(|p| {
            let i = p.index;
            let saddle = p.height - p.prominence;
            let (f, h) = if i > 0 && i + 1 < freq_hz.len() {
                refine_max(model, freq_hz[i - 1], freq_hz[i + 1])
            } else {
                (freq_hz[i], p.height)
            };
            let (f, h) = if h >= p.height { (f, h) } else { (freq_hz[i], p.height) };
            SpectralPeak {
                freq_hz: f,
                height: h,
                prominence: h - saddle,
            }
        })
        .collect();
    out.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    out
}

impl PowerSpectrum {
    /// Same spectrum with every frequency shifted by `offset_hz`.
    pub fn shifted(mut self, offset_hz: f64) -> Self {
        self.freq_hz.iter_mut().for_each(|f| *f += offset_hz);
        self.peaks.iter_mut().for_each(|p| p.freq_hz += offset_hz);
        self
    }

    /// ∫ psd df by the trapezoid rule.
    pub fn integral(&self) -> f64 {
        self.freq_hz
            .windows(2)
            .zip(self.psd.windows(2))
            .map(|(f, p)| 0.5 * (f[1] - f[0]) * (p[0] + p[1]))
            .sum()
    }
}

/// A second peak at least this prominent relative to the first makes a doublet.
pub const DOUBLET_RATIO: f64 = 0.25;
/// So does a second peak this high relative to the first, even when a
/// shallow saddle leaves it little prominence (a flat-topped line).
pub const DOUBLET_HEIGHT_RATIO: f64 = 0.5;

/// Carrier: the midpoint of a doublet, otherwise the centre of the dominant
/// line's half-power band.
///
/// A burst only a few microseconds long gives a line hundreds of kHz wide
/// whose top is often skewed or rippled, and the exact maximum of a
/// high-order fit wanders across it. The band centre equals the peak for a
/// symmetric line and is far steadier for the rest. Without sampled values
/// the peak frequency is returned as is.
pub fn carrier_frequency(spectrum: &PowerSpectrum) -> Result<f64, SpectralError> {
    match spectrum.peaks.as_slice() {
        [] => Err(SpectralError::NoPeaks),
        [p, q, ..]
            if q.prominence >= DOUBLET_RATIO * p.prominence || q.height >= DOUBLET_HEIGHT_RATIO * p.height =>
        {
            Ok(0.5 * (p.freq_hz + q.freq_hz))
        }
        [p, ..] => Ok(half_power_centre(spectrum, p).unwrap_or(p.freq_hz)),
    }
}

/// Midpoint of the interpolated half-height crossings on either side of `peak`.
fn half_power_centre(s: &PowerSpectrum, peak: &SpectralPeak) -> Option<f64> {
    let (f, psd) = (&s.freq_hz, &s.psd);
    if f.len() < 2 || f.len() != psd.len() {
        return None;
    }
    let i = f.partition_point(|&x| x < peak.freq_hz).min(f.len() - 1);
    let i = if i > 0 && peak.freq_hz - f[i - 1] < f[i] - peak.freq_hz { i - 1 } else { i };
    let half = 0.5 * peak.height;
    if psd[i] < half {
        return None;
    }
    let crossing = |a: usize, b: usize| {
        let t = (psd[a] - half) / (psd[a] - psd[b]);
        f[a] + t * (f[b] - f[a])
    };
    let mut lo = i;
    while lo > 0 && psd[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = i;
    while hi + 1 < f.len() && psd[hi + 1] >= half {
        hi += 1;
    }
    let f_lo = if lo > 0 { crossing(lo, lo - 1) } else { f[0] };
    let f_hi = if hi + 1 < f.len() { crossing(hi, hi + 1) } else { f[f.len() - 1] };
    Some(0.5 * (f_lo + f_hi))
}

/// Separation of the two most prominent peaks.
pub fn rabi_splitting(spectrum: &PowerSpectrum) -> Result<f64, SpectralError> {
    match spectrum.peaks.as_slice() {
        [p, q, ..] => Ok((p.freq_hz - q.freq_hz).abs()),
        _ => Err(SpectralError::NoSplitting),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpectrumOptions {
    /// Samples below this fraction of the peak magnitude are trimmed from
    /// both ends of the record.
    pub region_fraction: f64,
    /// The envelope is decimated to about this rate before fitting.
    pub fit_rate_hz: f64,
    pub half_span_hz: f64,
    pub points: usize,
    pub criterion: OrderCriterion,
    /// Overrides `default_max_order`.
    pub max_order: Option<usize>,
    pub psd: PsdOptions,
}

impl Default for EnvelopeSpectrumOptions {
    fn default() -> Self {
        Self {
            region_fraction: 0.01,
            fit_rate_hz: 50e6,
            half_span_hz: 5e6,
            points: 2001,
            criterion: OrderCriterion::Fpe,
            max_order: None,
            psd: PsdOptions::default(),
        }
    }
}

/// MEM spectrum of a complex baseband envelope referenced to `f_ref_hz`,
/// reported on absolute frequencies f_ref ± half_span.
pub fn envelope_spectrum(
    z: &[Complex64],
    dt: f64,
    f_ref_hz: f64,
    opts: &EnvelopeSpectrumOptions,
) -> Result<(PowerSpectrum, ArModel), SpectralError> {
    if z.is_empty() {
        return Err(SpectralError::EmptySignal);
    }
    let max = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let level = opts.region_fraction * max;
    let start = z.iter().position(|v| v.norm() >= level).unwrap_or(0);
    let end = z.iter().rposition(|v| v.norm() >= level).unwrap_or(z.len() - 1);
    let step = ((1.0 / dt) / opts.fit_rate_hz).floor().max(1.0) as usize;
    let x: Vec<Complex64> = z[start..=end].iter().step_by(step).copied().collect();
    let fit_dt = dt * step as f64;
    if x.len() < 4 {
        return Err(SpectralError::EmptySignal);
    }
    let max_order = opts
        .max_order
        .unwrap_or_else(|| default_max_order(x.len()))
        .min(default_max_order(x.len()).max(1));
    let order = select_order(&x, opts.criterion, max_order)?;
    let model = burg_fit(&x, order, fit_dt)?;
    let n = opts.points.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|k| -opts.half_span_hz + 2.0 * opts.half_span_hz * k as f64 / (n - 1) as f64)
        .collect();
    let spec = mem_psd(&model, &grid, &opts.psd)?.shifted(f_ref_hz);
    Ok((spec, model))
}
