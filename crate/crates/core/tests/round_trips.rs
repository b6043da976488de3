use maser_core::analysis::analyze_trace;
use maser_core::dynamics::{simulate_burst, synthesize_scope_trace, SimConfig, DEFAULT_SCOPE_RATE_HZ};
use maser_core::formats::{
    load_trace, open_csv, read_envelope_csv, read_metrics_json, read_peaks_json, read_spectrum_csv,
    save_csv, save_trace, write_envelope_csv, write_metrics_json, write_peaks_json, write_spectrum_csv,
    FormatError,
};

fn short_shot() -> (SimConfig, maser_core::dynamics::MaserEnvelope) {
    let mut cfg = SimConfig::default();
    cfg.duration_s = 6e-6;
    let env = simulate_burst(&cfg).unwrap();
    (cfg, env)
}

#[test]
fn trace_file_reanalyses_identically() {
    let (cfg, env) = short_shot();
    let trace = synthesize_scope_trace(&env, cfg.resonator.f_spin_hz, DEFAULT_SCOPE_RATE_HZ, 50.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    save_trace(&path, &trace, Some(cfg.clone())).unwrap();
    let (back, sidecar) = load_trace(&path).unwrap();
    assert_eq!(back, trace);
    assert_eq!(sidecar.config, Some(cfg));
    let a = analyze_trace(&trace).unwrap();
    let b = analyze_trace(&back).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.spectrum, b.spectrum);
}

#[test]
fn envelope_spectrum_and_metrics_files() {
    let (cfg, env) = short_shot();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("envelope.csv");
    save_csv(&p, |w| write_envelope_csv(w, &env)).unwrap();
    assert_eq!(read_envelope_csv(open_csv(&p).unwrap()).unwrap(), env);

    let trace = synthesize_scope_trace(&env, cfg.resonator.f_spin_hz, DEFAULT_SCOPE_RATE_HZ, 50.0).unwrap();
    let a = analyze_trace(&trace).unwrap();
    let spec = a.spectrum.unwrap();
    let p = dir.path().join("spectrum.csv");
    save_csv(&p, |w| write_spectrum_csv(w, &spec)).unwrap();
    let (f, psd) = read_spectrum_csv(open_csv(&p).unwrap()).unwrap();
    assert_eq!((f, psd), (spec.freq_hz.clone(), spec.psd.clone()));

    let mut buf = Vec::new();
    write_peaks_json(&mut buf, &spec.peaks).unwrap();
    assert_eq!(read_peaks_json(buf.as_slice()).unwrap(), spec.peaks);

    let mut buf = Vec::new();
    write_metrics_json(&mut buf, &a.metrics).unwrap();
    assert_eq!(read_metrics_json(buf.as_slice()).unwrap(), a.metrics);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_trace(&dir.path().join("nope.csv")),
        Err(FormatError::Io(_))
    ));
}
