//! On-disk formats: CSV tables with a fixed header plus JSON records.
//!
//! Floats are written in shortest round-trip form, so every reader here
//! reproduces the written values bit for bit.

use crate::dynamics::{MaserEnvelope, MaserTrace, SimConfig};
use crate::pulse::PulseMetrics;
use crate::resonator::ReflectionTrace;
use crate::spectral::{PowerSpectrum, SpectralPeak};
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: &'static [&'static str] },
    #[error("invalid content: {0}")]
    Invalid(String),
}

pub const S11_HEADER: &[&str] = &["freq_hz", "s11_re", "s11_im"];
pub const ENVELOPE_HEADER: &[&str] = &["t_s", "a_re", "a_im", "n_photons", "w", "p_out_w"];
pub const TRACE_HEADER: &[&str] = &["t_s", "v_volts"];
pub const SPECTRUM_HEADER: &[&str] = &["freq_hz", "psd_norm"];

fn reader<R: Read>(r: R, expected: &'static [&'static str]) -> Result<csv::Reader<R>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != expected {
        return Err(FormatError::Header { found, expected });
    }
    Ok(rdr)
}

fn rows<R: Read, const N: usize>(
    r: R,
    expected: &'static [&'static str],
) -> Result<Vec<[f64; N]>, FormatError> {
    let mut rdr = reader(r, expected)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.deserialize::<Vec<f64>>().enumerate() {
        let rec = rec?;
        let row: [f64; N] = rec.as_slice().try_into().map_err(|_| {
            FormatError::Invalid(format!("row {} has {} fields, expected {N}", line + 1, rec.len()))
        })?;
        out.push(row);
    }
    Ok(out)
}

fn write_rows<W: Write, const N: usize>(
    w: W,
    header: &[&str],
    rows: impl Iterator<Item = [f64; N]>,
) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    for row in rows {
        wtr.serialize(row.as_slice())?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_s11_csv<W: Write>(w: W, trace: &ReflectionTrace) -> Result<(), FormatError> {
    write_rows(
        w,
        S11_HEADER,
        trace.freq_hz().iter().zip(trace.s11()).map(|(&f, s)| [f, s.re, s.im]),
    )
}

/// Rejects grids that are not strictly increasing.
pub fn read_s11_csv<R: Read>(r: R) -> Result<ReflectionTrace, FormatError> {
    let rows = rows::<_, 3>(r, S11_HEADER)?;
    let freq = rows.iter().map(|r| r[0]).collect();
    let s11 = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
    ReflectionTrace::new(freq, s11).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn write_envelope_csv<W: Write>(w: W, env: &MaserEnvelope) -> Result<(), FormatError> {
    write_rows(
        w,
        ENVELOPE_HEADER,
        (0..env.len()).map(|k| {
            [
                env.t[k],
                env.a[k].re,
                env.a[k].im,
                env.n_photons[k],
                env.w[k],
                env.p_out[k],
            ]
        }),
    )
}

pub fn read_envelope_csv<R: Read>(r: R) -> Result<MaserEnvelope, FormatError> {
    let rows = rows::<_, 6>(r, ENVELOPE_HEADER)?;
    Ok(MaserEnvelope {
        t: rows.iter().map(|r| r[0]).collect(),
        a: rows.iter().map(|r| Complex64::new(r[1], r[2])).collect(),
        n_photons: rows.iter().map(|r| r[3]).collect(),
        w: rows.iter().map(|r| r[4]).collect(),
        p_out: rows.iter().map(|r| r[5]).collect(),
    })
}

/// Acquisition settings stored next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub sample_rate_hz: f64,
    pub load_ohms: f64,
    pub carrier_hint_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SimConfig>,
}

impl TraceSidecar {
    pub fn for_trace(trace: &MaserTrace, config: Option<SimConfig>) -> Self {
        Self {
            sample_rate_hz: trace.sample_rate_hz,
            load_ohms: trace.load_ohms,
            carrier_hint_hz: trace.carrier_hint_hz,
            config,
        }
    }
}

pub fn write_trace_csv<W: Write>(w: W, trace: &MaserTrace) -> Result<(), FormatError> {
    write_rows(w, TRACE_HEADER, trace.t.iter().zip(&trace.v).map(|(&t, &v)| [t, v]))
}

pub fn read_trace_csv<R: Read>(r: R, sidecar: &TraceSidecar) -> Result<MaserTrace, FormatError> {
    let rows = rows::<_, 2>(r, TRACE_HEADER)?;
    MaserTrace::new(
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
        sidecar.sample_rate_hz,
        sidecar.load_ohms,
        sidecar.carrier_hint_hz,
    )
    .map_err(|e| FormatError::Invalid(e.to_string()))
}

/// Path of the JSON sidecar belonging to a trace CSV: `x.csv` → `x.json`.
pub fn sidecar_path(trace_csv: &Path) -> std::path::PathBuf {
    trace_csv.with_extension("json")
}

pub fn save_trace(path: &Path, trace: &MaserTrace, config: Option<SimConfig>) -> Result<(), FormatError> {
    write_trace_csv(BufWriter::new(File::create(path)?), trace)?;
    save_json(&sidecar_path(path), &TraceSidecar::for_trace(trace, config))
}

pub fn load_trace(path: &Path) -> Result<(MaserTrace, TraceSidecar), FormatError> {
    let sidecar: TraceSidecar = load_json(&sidecar_path(path))?;
    let trace = read_trace_csv(BufReader::new(File::open(path)?), &sidecar)?;
    Ok((trace, sidecar))
}

pub fn write_spectrum_csv<W: Write>(w: W, spectrum: &PowerSpectrum) -> Result<(), FormatError> {
    write_rows(
        w,
        SPECTRUM_HEADER,
        spectrum.freq_hz.iter().zip(&spectrum.psd).map(|(&f, &p)| [f, p]),
    )
}

/// Frequencies and PSD values only; peaks are stored separately.
pub fn read_spectrum_csv<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>), FormatError> {
    let rows = rows::<_, 2>(r, SPECTRUM_HEADER)?;
    Ok((rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect()))
}

pub fn write_peaks_json<W: Write>(w: W, peaks: &[SpectralPeak]) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(w, peaks)?;
    Ok(())
}

pub fn read_peaks_json<R: Read>(r: R) -> Result<Vec<SpectralPeak>, FormatError> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_metrics_json<W: Write>(w: W, metrics: &PulseMetrics) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(w, metrics)?;
    Ok(())
}

pub fn read_metrics_json<R: Read>(r: R) -> Result<PulseMetrics, FormatError> {
    Ok(serde_json::from_reader(r)?)
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Opens `path` for CSV writing and applies `write`.
pub fn save_csv(
    path: &Path,
    write: impl FnOnce(BufWriter<File>) -> Result<(), FormatError>,
) -> Result<(), FormatError> {
    write(BufWriter::new(File::create(path)?))
}

pub fn open_csv(path: &Path) -> Result<BufReader<File>, FormatError> {
    Ok(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s11_reader_rejects_unsorted_grid() {
        let csv = "freq_hz,s11_re,s11_im\n1.0,0.1,0\n3.0,0.1,0\n2.0,0.1,0\n";
        assert!(matches!(read_s11_csv(csv.as_bytes()), Err(FormatError::Invalid(_))));
    }

    #[test]
    fn wrong_header_is_reported() {
        let csv = "f,re,im\n1.0,0.1,0\n";
        assert!(matches!(read_s11_csv(csv.as_bytes()), Err(FormatError::Header { .. })));
    }

    #[test]
    fn awkward_floats_survive() {
        let env = MaserEnvelope {
            t: vec![0.0, 0.1 + 0.2, 1e-300],
            a: vec![Complex64::new(1.0 / 3.0, -2.0f64.sqrt()); 3],
            n_photons: vec![f64::MIN_POSITIVE, 5e15, 0.0],
            w: vec![-1.0 / 7.0; 3],
            p_out: vec![std::f64::consts::PI; 3],
        };
        let mut buf = Vec::new();
        write_envelope_csv(&mut buf, &env).unwrap();
        assert_eq!(read_envelope_csv(buf.as_slice()).unwrap(), env);
    }

    #[test]
    fn metrics_json_keeps_missing_fields_null() {
        let m = PulseMetrics {
            v_peak_v: 0.13,
            p_peak_mw: 0.338,
            p_peak_dbm: Some(-4.71),
            delay_to_peak_s: None,
            rabi_freq_td_hz: None,
            carrier_est_hz: Some(1.4495e9),
        };
        let mut buf = Vec::new();
        write_metrics_json(&mut buf, &m).unwrap();
        let s = String::from_utf8(buf.clone()).unwrap();
        assert!(s.contains("\"delay_to_peak_s\": null"));
        assert_eq!(read_metrics_json(buf.as_slice()).unwrap(), m);
    }
}
