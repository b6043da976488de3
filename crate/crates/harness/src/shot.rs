//! One shot: simulate, digitise, analyse, and the files that hold it.

use crate::error::BenchError;
use maser_core::analysis::{analyze_trace, TraceAnalysis};
use maser_core::dynamics::{
    emitted_frequency, is_burst, noise_floor_power, simulate_burst, synthesize_scope_trace, MaserEnvelope,
    MaserTrace, SimConfig,
};
use maser_core::formats::{
    self, load_json, load_trace, open_csv, read_envelope_csv, read_peaks_json, read_spectrum_csv, save_csv,
    save_json, save_trace, write_envelope_csv, write_peaks_json, write_spectrum_csv,
};
use maser_core::pulse::PulseMetrics;
use maser_core::spectral::{rabi_splitting, PowerSpectrum, SpectralPeak};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const RECORD_FILE: &str = "record.json";
pub const CONFIG_FILE: &str = "config.json";
pub const ENVELOPE_FILE: &str = "envelope.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const TRACE_SIDECAR_FILE: &str = "trace.json";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const PEAKS_FILE: &str = "peaks.json";
pub const METRICS_FILE: &str = "metrics.json";

/// Scope settings used to digitise a shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scope {
    pub sample_rate_hz: f64,
    pub load_ohms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub id: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub seed: u64,
    pub detuning_hz: f64,
    pub pump_energy_j: f64,
    pub mased: bool,
    pub metrics: Option<PulseMetrics>,
    /// Separation of the two main spectral peaks, when the shot mased.
    pub splitting_hz: Option<f64>,
    pub peak_photons: f64,
    /// Carrier from the simulated field, for comparison with the
    /// spectral estimate in `metrics`.
    pub emitted_freq_hz: Option<f64>,
    pub config: SimConfig,
}

/// Everything produced by one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotData {
    pub envelope: MaserEnvelope,
    pub trace: MaserTrace,
    pub spectrum: Option<PowerSpectrum>,
    pub metrics: PulseMetrics,
    pub mased: bool,
    pub splitting_hz: Option<f64>,
    pub emitted_freq_hz: Option<f64>,
}

/// Run the full measurement chain for `cfg`.
pub fn take_shot(cfg: &SimConfig, scope: Scope) -> Result<ShotData, BenchError> {
    let envelope = simulate_burst(cfg)?;
    let mased = is_burst(&envelope, noise_floor_power(cfg)?);
    let trace = synthesize_scope_trace(&envelope, cfg.resonator.f_spin_hz, scope.sample_rate_hz, scope.load_ohms)?;
    let TraceAnalysis { metrics, spectrum, burst, .. } = analyze_trace(&trace)?;
    let splitting_hz = spectrum
        .as_ref()
        .filter(|_| mased && burst)
        .and_then(|s| rabi_splitting(s).ok());
    let emitted_freq_hz = if mased {
        emitted_frequency(&envelope, cfg.resonator.f_spin_hz).ok()
    } else {
        None
    };
    Ok(ShotData {
        envelope,
        trace,
        spectrum,
        metrics,
        mased,
        splitting_hz,
        emitted_freq_hz,
    })
}

impl ShotRecord {
    pub fn new(id: u64, timestamp_ms: u64, config: SimConfig, data: &ShotData) -> Self {
        Self {
            id,
            timestamp_ms,
            seed: config.seed,
            detuning_hz: config.detuning_hz,
            pump_energy_j: config.pump.energy_j,
            mased: data.mased,
            metrics: Some(data.metrics.clone()),
            splitting_hz: data.splitting_hz,
            peak_photons: data.envelope.peak_photons(),
            emitted_freq_hz: data.emitted_freq_hz,
            config,
        }
    }
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T, BenchError> {
    r.map_err(|e| BenchError::io(path, e))
}

/// Write every artifact of a shot into `dir`, which must not exist yet.
///
/// Files go to a sibling temporary directory that is renamed into place,
/// so a reader never sees a half-written shot.
pub fn write_shot_dir(dir: &Path, record: &ShotRecord, data: &ShotData) -> Result<(), BenchError> {
    let tmp = dir.with_extension("partial");
    if tmp.exists() {
        io(&tmp, std::fs::remove_dir_all(&tmp))?;
    }
    io(&tmp, std::fs::create_dir_all(&tmp))?;
    save_json(&tmp.join(CONFIG_FILE), &record.config)?;
    save_csv(&tmp.join(ENVELOPE_FILE), |w| write_envelope_csv(w, &data.envelope))?;
    save_trace(&tmp.join(TRACE_FILE), &data.trace, Some(record.config.clone()))?;
    if let Some(s) = &data.spectrum {
        save_csv(&tmp.join(SPECTRUM_FILE), |w| write_spectrum_csv(w, s))?;
        save_csv(&tmp.join(PEAKS_FILE), |w| write_peaks_json(w, &s.peaks))?;
    }
    save_json(&tmp.join(METRICS_FILE), &data.metrics)?;
    save_json(&tmp.join(RECORD_FILE), record)?;
    io(dir, std::fs::rename(&tmp, dir))
}

pub fn read_record(dir: &Path) -> Result<ShotRecord, BenchError> {
    Ok(load_json(&dir.join(RECORD_FILE))?)
}

/// Stored spectrum: grid, normalised density and the peak list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSpectrum {
    pub freq_hz: Vec<f64>,
    pub psd_norm: Vec<f64>,
    pub peaks: Vec<SpectralPeak>,
}

pub fn read_spectrum(dir: &Path) -> Result<Option<StoredSpectrum>, BenchError> {
    let csv = dir.join(SPECTRUM_FILE);
    if !csv.exists() {
        return Ok(None);
    }
    let (freq_hz, psd_norm) = read_spectrum_csv(open_csv(&csv)?)?;
    let peaks = read_peaks_json(open_csv(&dir.join(PEAKS_FILE))?)?;
    Ok(Some(StoredSpectrum {
        freq_hz,
        psd_norm,
        peaks,
    }))
}

pub fn read_envelope(dir: &Path) -> Result<MaserEnvelope, BenchError> {
    Ok(read_envelope_csv(open_csv(&dir.join(ENVELOPE_FILE))?)?)
}

pub fn read_trace(dir: &Path) -> Result<MaserTrace, BenchError> {
    Ok(load_trace(&dir.join(TRACE_FILE))?.0)
}

pub fn read_metrics(dir: &Path) -> Result<PulseMetrics, BenchError> {
    Ok(load_json(&dir.join(METRICS_FILE))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    /// A directory with the CSV tables and JSON records.
    CsvBundle,
    /// A single JSON document holding the same content.
    JsonBundle,
}

/// Self-contained form of a shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotBundle {
    pub record: ShotRecord,
    pub envelope: MaserEnvelope,
    pub trace: MaserTrace,
    pub spectrum: Option<StoredSpectrum>,
    pub metrics: PulseMetrics,
}

pub fn read_bundle(dir: &Path) -> Result<ShotBundle, BenchError> {
    Ok(ShotBundle {
        record: read_record(dir)?,
        envelope: read_envelope(dir)?,
        trace: read_trace(dir)?,
        spectrum: read_spectrum(dir)?,
        metrics: read_metrics(dir)?,
    })
}

/// Copy the shot stored in `shot_dir` into `dest` and return the path of
/// the export (a directory or a `.json` file).
pub fn export_shot(shot_dir: &Path, dest: &Path, format: ExportFormat) -> Result<PathBuf, BenchError> {
    if !dest.is_dir() {
        return Err(BenchError::io(
            dest,
            std::io::Error::new(std::io::ErrorKind::NotFound, "export directory does not exist"),
        ));
    }
    let record = read_record(shot_dir)?;
    match format {
        ExportFormat::CsvBundle => {
            let out = dest.join(format!("shot-{}", record.id));
            io(&out, std::fs::create_dir_all(&out))?;
            for name in [
                RECORD_FILE,
                CONFIG_FILE,
                ENVELOPE_FILE,
                TRACE_FILE,
                TRACE_SIDECAR_FILE,
                SPECTRUM_FILE,
                PEAKS_FILE,
                METRICS_FILE,
            ] {
                let src = shot_dir.join(name);
                if src.exists() {
                    io(&src, std::fs::copy(&src, out.join(name)))?;
                }
            }
            Ok(out)
        }
        ExportFormat::JsonBundle => {
            let out = dest.join(format!("shot-{}.json", record.id));
            save_json(&out, &read_bundle(shot_dir)?)?;
            Ok(out)
        }
    }
}

/// Read back an export written by [`export_shot`].
pub fn import_shot(path: &Path) -> Result<ShotBundle, BenchError> {
    if path.is_dir() {
        read_bundle(path)
    } else {
        Ok(formats::load_json(path)?)
    }
}
