//! Scope trace to shot metrics: the chain shared by the CLI and the bench.

use crate::dynamics::MaserTrace;
use crate::pulse::{
    delay_to_peak, demodulate_with, peak_power, rabi_frequency_td_with, Baseband, DemodOptions,
    PulseError, PulseMetrics, RabiOptions,
};
use crate::spectral::{carrier_frequency, envelope_spectrum, EnvelopeSpectrumOptions, PowerSpectrum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub demod: DemodOptions,
    pub rabi: RabiOptions,
    pub spectrum: EnvelopeSpectrumOptions,
    /// Trigger instant on the trace time axis, s.
    pub trigger_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceAnalysis {
    pub metrics: PulseMetrics,
    pub baseband: Baseband,
    /// MEM spectrum of the envelope on absolute frequency; absent when the
    /// record is too short or flat to fit.
    pub spectrum: Option<PowerSpectrum>,
    /// Whether the envelope stands clear of its own median.
    pub burst: bool,
}

pub fn analyze_trace(trace: &MaserTrace) -> Result<TraceAnalysis, PulseError> {
    analyze_trace_with(trace, &AnalysisOptions::default())
}

/// Demodulate at the trace's carrier hint and measure the burst.
///
/// Timing, modulation and carrier figures are only reported for a trace
/// that contains a burst.
pub fn analyze_trace_with(trace: &MaserTrace, opts: &AnalysisOptions) -> Result<TraceAnalysis, PulseError> {
    let peak = peak_power(trace)?;
    let bb = demodulate_with(trace, trace.carrier_hint_hz, &opts.demod)?;
    let delay = match delay_to_peak(&bb, opts.trigger_s) {
        Ok(d) => Some(d),
        Err(PulseError::NoBurst) => None,
        Err(e) => return Err(e),
    };
    let burst = delay.is_some();
    let rabi = if burst {
        rabi_frequency_td_with(&bb, &opts.rabi).ok().map(|r| r.freq_hz)
    } else {
        None
    };
    let spectrum = envelope_spectrum(&bb.z, bb.dt(), bb.f_ref_hz, &opts.spectrum)
        .ok()
        .map(|(s, _)| s);
    let carrier = spectrum
        .as_ref()
        .filter(|_| burst)
        .and_then(|s| carrier_frequency(s).ok());
    Ok(TraceAnalysis {
        metrics: PulseMetrics {
            v_peak_v: peak.v_peak_v,
            p_peak_mw: peak.p_mw,
            p_peak_dbm: peak.p_dbm,
            delay_to_peak_s: delay,
            rabi_freq_td_hz: rabi,
            carrier_est_hz: carrier,
        },
        baseband: bb,
        spectrum,
        burst,
    })
}
