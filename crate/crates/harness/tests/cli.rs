mod common;

use common::session_in;
use maser_bench::shot::{export_shot, read_spectrum, ExportFormat, PEAKS_FILE, TRACE_FILE};
use maser_core::formats::{load_json, save_csv, write_s11_csv};
use maser_core::pulse::PulseMetrics;
use maser_core::resonator::{reflection_trace, ResonatorConfig};
use maser_core::spectral::SpectralPeak;
use serde_json::Value;
use std::process::{Command, Output};

fn maser(args: &[&str], cwd: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maser"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MASER_RUN_DIR")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn fit_s11_reads_the_quoted_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let out = maser(&["fit-s11", "--f-lo-hz", "1.44915e9", "--f-res-hz", "1.4495e9", "--f-hi-hz", "1.44986e9"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("q_loaded = 2042"));
}

#[test]
fn fit_s11_on_a_synthetic_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let r = ResonatorConfig::with_loaded_q(2042.0, 0.6);
    let f = r.f_mode_hz;
    let t = reflection_trace(&r, f - 4e6, f + 4e6, 2001, None).unwrap();
    let csv = dir.path().join("s11.csv");
    save_csv(&csv, |w| write_s11_csv(w, &t)).unwrap();
    let v = json(&maser(&["--json", "fit-s11", "s11.csv"], dir.path()));
    let q = v["q_loaded"].as_f64().unwrap();
    assert!((q - 2042.0).abs() <= 1.0, "{q}");
    assert_eq!(v["coupling"]["class"], "undercoupled");
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["fit-s11", "missing.csv"],
        &["fit-s11", "--f-lo-hz", "2", "--f-res-hz", "1", "--f-hi-hz", "3"],
        &["analyze", "missing.csv"],
        &["sweep", "--config", "nope.toml"],
        &["simulate", "--energy-mj", "-4", "--out", "x"],
    ] {
        let out = maser(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(maser(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn config_file_keys_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[pump]\nenergy_joules = 3\n").unwrap();
    let out = maser(&["simulate", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("energy_joules"));
}

#[test]
fn sweep_table_follows_the_detuning_trends() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&maser(&["--json", "sweep", "--detunings-mhz=0,0.5,1.0,1.5", "--csv", "sweep.csv"], dir.path()));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let power: Vec<f64> = rows.iter().map(|r| r["peak_power_w"].as_f64().unwrap()).collect();
    assert!(power.windows(2).all(|w| w[1] < w[0]), "{power:?}");
    assert!(rows.iter().all(|r| r["mased"] == true));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.starts_with("detuning_mhz,mased,peak_dbm"));
}

#[test]
fn simulate_matches_the_first_session_shot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    std::fs::write(&cfg, "master_seed = 8\n[cavity]\ndetuning_mhz = 0.5\n").unwrap();
    let v = json(&maser(&["--json", "simulate", "--config", "bench.toml", "--out", "one"], dir.path()));

    let mut s = session_in(&dir.path().join("run"), 8);
    s.tune(maser_bench::TuneTarget::StepHz(0.5e6)).unwrap();
    let r = s.fire(None).unwrap();
    assert_eq!(v["seed"].as_u64(), Some(r.seed));
    let m: PulseMetrics = serde_json::from_value(v["metrics"].clone()).unwrap();
    assert_eq!(Some(m), r.metrics);

    // Re-running a stored shot config reproduces it.
    let again = json(&maser(&["--json", "simulate", "--config", "one/config.json", "--out", "two"], dir.path()));
    assert_eq!(again["metrics"], v["metrics"]);
    // An existing output directory is not overwritten.
    assert_eq!(maser(&["simulate", "--out", "one"], dir.path()).status.code(), Some(2));
}

#[test]
fn analyze_on_an_exported_trace_matches_the_record() {
    let run = tempfile::tempdir().unwrap();
    let mut s = session_in(run.path(), 21);
    let r = s.fire(None).unwrap();
    let exported = export_shot(&s.shot_dir(r.id), run.path(), ExportFormat::CsvBundle).unwrap();

    let out = maser(
        &["--json", "analyze", exported.join(TRACE_FILE).to_str().unwrap(), "--out", "re"],
        run.path(),
    );
    let v = json(&out);
    let m: PulseMetrics = serde_json::from_value(v["metrics"].clone()).unwrap();
    assert_eq!(Some(m), r.metrics);

    let stored = read_spectrum(&exported).unwrap().unwrap();
    let peaks: Vec<SpectralPeak> = serde_json::from_value(v["peaks"].clone()).unwrap();
    assert_eq!(peaks, stored.peaks);
    let written: Vec<SpectralPeak> = load_json(&run.path().join("re").join(PEAKS_FILE)).unwrap();
    assert_eq!(written, stored.peaks);
}

#[test]
fn analyze_without_a_sidecar_takes_the_settings_from_flags() {
    let run = tempfile::tempdir().unwrap();
    let mut s = session_in(run.path(), 2);
    let r = s.fire(None).unwrap();
    let dir = s.shot_dir(r.id);
    std::fs::copy(dir.join(TRACE_FILE), run.path().join("bare.csv")).unwrap();
    assert_eq!(maser(&["analyze", "bare.csv"], run.path()).status.code(), Some(2));
    let v = json(&maser(
        &["--json", "analyze", "bare.csv", "--sample-rate-ghz", "6", "--carrier-hz", "1.4495e9"],
        run.path(),
    ));
    let m: PulseMetrics = serde_json::from_value(v["metrics"].clone()).unwrap();
    assert_eq!(Some(m), r.metrics);
}
