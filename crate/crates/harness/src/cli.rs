//! The `maser` command line.
//!
//! Exit codes: 0 success, 2 bad input or usage, 3 numerical failure.

use crate::config::BenchConfig;
use crate::error::BenchError;
use crate::session::{derive_seed, BenchSession};
use crate::shot::{take_shot, write_shot_dir, Scope, ShotRecord};
use clap::{Args, Parser, Subcommand};
use maser_core::analysis::analyze_trace;
use maser_core::dynamics::{
    calibrate, detuning_sweep, CalibrationOptions, SimConfig, SweepEntry, SweepMetrics,
};
use maser_core::formats::{
    load_json, load_trace, open_csv, read_s11_csv, save_csv, save_json, write_peaks_json, write_spectrum_csv,
    TraceSidecar,
};
use maser_core::par::Execution;
use maser_core::pulse::PulseMetrics;
use maser_core::resonator::{
    classify_coupling, estimate_q_loaded_with, Coupling, DipConvention, QEstimateOptions, QFactorEstimate,
};
use maser_core::spectral::SpectralPeak;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// The detuning steps of a standard sweep, MHz.
pub const DEFAULT_DETUNINGS_MHZ: [f64; 7] = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];

#[derive(Debug, Parser)]
#[command(name = "maser", version, about = "Virtual room-temperature maser bench")]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fire one shot from a bench config (TOML) or a stored shot config (JSON).
    Simulate(SimulateArgs),
    /// One shot per cavity detuning, summarised as a table.
    Sweep(SweepArgs),
    /// Measure a stored scope trace.
    Analyze(AnalyzeArgs),
    /// Loaded Q and coupling from an S11 sweep or from three read-off frequencies.
    FitS11(FitS11Args),
    /// Fit the gain-medium parameters and write them as a calibration file.
    Calibrate(CalibrateArgs),
    /// Run the bench HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shot directory to create.
    #[arg(long, default_value = "maser-shot")]
    pub out: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub energy_mj: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_mhz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated cavity detunings, MHz.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub detunings_mhz: Option<Vec<f64>>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Run the detunings one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trace CSV (`t_s,v_volts`). Acquisition settings come from the JSON
    /// sidecar of the same name unless given below.
    pub trace: PathBuf,
    #[arg(long)]
    pub sample_rate_ghz: Option<f64>,
    #[arg(long)]
    pub carrier_hz: Option<f64>,
    #[arg(long, default_value_t = 50.0)]
    pub load_ohms: f64,
    /// Directory for metrics.json, spectrum.csv and peaks.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitS11Args {
    /// S11 CSV (`freq_hz,s11_re,s11_im`).
    #[arg(required_unless_present = "f_res_hz", conflicts_with_all = ["f_lo_hz", "f_res_hz", "f_hi_hz"])]
    pub csv: Option<PathBuf>,
    #[arg(long, requires_all = ["f_res_hz", "f_hi_hz"])]
    pub f_lo_hz: Option<f64>,
    #[arg(long, requires_all = ["f_lo_hz", "f_hi_hz"])]
    pub f_res_hz: Option<f64>,
    #[arg(long, requires_all = ["f_lo_hz", "f_res_hz"])]
    pub f_hi_hz: Option<f64>,
    /// Bandwidth edge rule.
    #[arg(long, value_enum, default_value = "half-absorbed-power")]
    pub convention: ConventionArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ConventionArg {
    HalfAbsorbedPower,
    DbAboveMinimum,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value = "calibration.toml")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Overrides both the config file and the environment.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &BenchError) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Run a parsed command, writing its report to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, BenchError> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a, out),
        Command::Sweep(a) => sweep(cli, a, out),
        Command::Analyze(a) => analyze(cli, a, out),
        Command::FitS11(a) => fit_s11(cli, a, out),
        Command::Calibrate(a) => calibrate_cmd(cli, a, out),
        Command::Serve(a) => serve(cli, a),
    }
}

fn bench_config(cli: &Cli, path: Option<&Path>) -> Result<BenchConfig, BenchError> {
    let mut cfg = match path {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), BenchError> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| BenchError::io(Path::new("<stdout>"), e))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), BenchError> {
    let s = serde_json::to_string_pretty(value).map_err(|e| BenchError::InvalidInput(e.to_string()))?;
    emit(out, format_args!("{s}"))
}

fn opt(v: Option<f64>, scale: f64, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.prec$}", x * scale))
}

fn simulate(cli: &Cli, a: &SimulateArgs, out: &mut dyn Write) -> Result<i32, BenchError> {
    let is_json = a.config.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    let (mut cfg, scope) = if is_json {
        let path = a.config.as_ref().expect("checked");
        let mut cfg: SimConfig = load_json(path)?;
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        let bench = BenchConfig::default();
        (cfg, Scope { sample_rate_hz: bench.sample_rate_hz(), load_ohms: bench.scope.load_ohms })
    } else {
        let bench = bench_config(cli, a.config.as_deref())?;
        // Same seed as the first shot of a fresh session on this config.
        let seed = derive_seed(bench.master_seed, 1);
        let cfg = bench.sim_config(bench.resonator()?, bench.medium()?, bench.pump(), seed);
        (cfg, Scope { sample_rate_hz: bench.sample_rate_hz(), load_ohms: bench.scope.load_ohms })
    };
    if let Some(e) = a.energy_mj {
        cfg.pump.energy_j = e / 1e3;
    }
    if let Some(d) = a.detuning_mhz {
        cfg = cfg.with_detuning(d * 1e6)?;
    }
    cfg.validate()?;
    if a.out.exists() {
        return Err(BenchError::InvalidInput(format!("{} already exists", a.out.display())));
    }
    let data = take_shot(&cfg, scope)?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
    let record = ShotRecord::new(1, now, cfg, &data);
    write_shot_dir(&a.out, &record, &data)?;
    if cli.json {
        emit_json(out, &record)?;
    } else {
        let m = &data.metrics;
        emit(out, format_args!("shot written to {}", a.out.display()))?;
        emit(out, format_args!("mased            {}", record.mased))?;
        emit(out, format_args!("peak power       {} dBm ({:.4} mW, {:.4} V)", opt(m.p_peak_dbm, 1.0, 2), m.p_peak_mw, m.v_peak_v))?;
        emit(out, format_args!("delay to peak    {} us", opt(m.delay_to_peak_s, 1e6, 3)))?;
        emit(out, format_args!("rabi (time)      {} MHz", opt(m.rabi_freq_td_hz, 1e-6, 3)))?;
        emit(out, format_args!("rabi splitting   {} MHz", opt(record.splitting_hz, 1e-6, 3)))?;
        emit(out, format_args!("carrier          {} Hz", opt(m.carrier_est_hz, 1.0, 0)))?;
    }
    Ok(EXIT_OK)
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub detuning_hz: f64,
    #[serde(flatten)]
    pub metrics: Option<SweepMetrics>,
    pub error: Option<String>,
}

impl From<&SweepEntry> for SweepRow {
    fn from(e: &SweepEntry) -> Self {
        Self {
            detuning_hz: e.detuning_hz,
            metrics: e.metrics().cloned(),
            error: e.outcome.as_ref().err().map(|e| e.to_string()),
        }
    }
}

const SWEEP_HEADER: [&str; 8] = [
    "detuning_mhz",
    "mased",
    "peak_dbm",
    "delay_us",
    "rabi_td_mhz",
    "rabi_cycles",
    "splitting_mhz",
    "emitted_offset_khz",
];

fn sweep_fields(r: &SweepRow, f_spin_hz: f64) -> [String; 8] {
    let d = format!("{:+.3}", r.detuning_hz * 1e-6);
    match &r.metrics {
        Some(m) => [
            d,
            m.mased.to_string(),
            opt(m.peak_dbm, 1.0, 2),
            opt(m.delay_to_peak_s, 1e6, 3),
            opt(m.rabi_freq_td_hz, 1e-6, 3),
            m.rabi_cycles.to_string(),
            opt(m.splitting_hz, 1e-6, 3),
            opt(m.emitted_freq_hz.map(|f| f - f_spin_hz), 1e-3, 1),
        ],
        None => {
            let mut row: [String; 8] = Default::default();
            row[0] = d;
            row[1] = "error".into();
            row
        }
    }
}

fn sweep(cli: &Cli, a: &SweepArgs, out: &mut dyn Write) -> Result<i32, BenchError> {
    let bench = bench_config(cli, a.config.as_deref())?;
    let base = bench.sim_config(
        bench.resonator()?,
        bench.medium()?,
        bench.pump(),
        derive_seed(bench.master_seed, 1),
    );
    base.validate()?;
    let detunings: Vec<f64> = a
        .detunings_mhz
        .clone()
        .unwrap_or_else(|| DEFAULT_DETUNINGS_MHZ.to_vec())
        .iter()
        .map(|d| d * 1e6)
        .collect();
    if detunings.is_empty() || detunings.iter().any(|d| !d.is_finite()) {
        return Err(BenchError::InvalidInput("detunings must be finite numbers".into()));
    }
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let entries = detuning_sweep(&base, &detunings, exec);
    let rows: Vec<SweepRow> = entries.iter().map(SweepRow::from).collect();
    let f_spin = base.resonator.f_spin_hz;

    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::InvalidInput(e.to_string()))?;
        let res: Result<(), csv::Error> = (|| {
            w.write_record(SWEEP_HEADER)?;
            for r in &rows {
                w.write_record(sweep_fields(r, f_spin))?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(|e| BenchError::InvalidInput(format!("{}: {e}", path.display())))?;
    }
    if cli.json {
        emit_json(out, &rows)?;
    } else {
        emit(out, format_args!("{}", SWEEP_HEADER.map(|h| format!("{h:>19}")).join("")))?;
        for r in &rows {
            let f = sweep_fields(r, f_spin);
            emit(out, format_args!("{}", f.map(|x| format!("{x:>19}")).join("")))?;
        }
        for r in rows.iter().filter(|r| r.error.is_some()) {
            emit(out, format_args!("{:+.3} MHz failed: {}", r.detuning_hz * 1e-6, r.error.as_deref().unwrap_or("")))?;
        }
    }
    let numerical = entries
        .iter()
        .filter_map(|e| e.outcome.as_ref().err())
        .any(|e| BenchError::Dynamics(e.clone()).is_numerical());
    Ok(if numerical {
        EXIT_NUMERICAL
    } else if rows.iter().any(|r| r.error.is_some()) {
        EXIT_INPUT
    } else {
        EXIT_OK
    })
}

/// What `analyze` reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub metrics: PulseMetrics,
    pub burst: bool,
    pub peaks: Vec<SpectralPeak>,
}

fn analyze(cli: &Cli, a: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32, BenchError> {
    let trace = match (a.sample_rate_ghz, a.carrier_hz) {
        (Some(fs), Some(fc)) => {
            let sidecar = TraceSidecar {
                sample_rate_hz: fs * 1e9,
                load_ohms: a.load_ohms,
                carrier_hint_hz: fc,
                config: None,
            };
            maser_core::formats::read_trace_csv(open_csv(&a.trace)?, &sidecar)?
        }
        (None, None) => load_trace(&a.trace)?.0,
        _ => {
            return Err(BenchError::InvalidInput(
                "give both --sample-rate-ghz and --carrier-hz, or neither".into(),
            ))
        }
    };
    let analysis = analyze_trace(&trace)?;
    let peaks = analysis.spectrum.as_ref().map(|s| s.peaks.clone()).unwrap_or_default();
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
        save_json(&dir.join(crate::shot::METRICS_FILE), &analysis.metrics)?;
        if let Some(s) = &analysis.spectrum {
            save_csv(&dir.join(crate::shot::SPECTRUM_FILE), |w| write_spectrum_csv(w, s))?;
            save_csv(&dir.join(crate::shot::PEAKS_FILE), |w| write_peaks_json(w, &s.peaks))?;
        }
    }
    let report = AnalyzeReport {
        metrics: analysis.metrics,
        burst: analysis.burst,
        peaks,
    };
    if cli.json {
        emit_json(out, &report)?;
    } else {
        let m = &report.metrics;
        emit(out, format_args!("burst            {}", report.burst))?;
        emit(out, format_args!("peak power       {} dBm ({:.4} mW, {:.4} V)", opt(m.p_peak_dbm, 1.0, 2), m.p_peak_mw, m.v_peak_v))?;
        emit(out, format_args!("delay to peak    {} us", opt(m.delay_to_peak_s, 1e6, 3)))?;
        emit(out, format_args!("rabi (time)      {} MHz", opt(m.rabi_freq_td_hz, 1e-6, 3)))?;
        emit(out, format_args!("carrier          {} Hz", opt(m.carrier_est_hz, 1.0, 0)))?;
        for p in report.peaks.iter().take(5) {
            emit(out, format_args!("peak             {:.0} Hz  prominence {:.3}", p.freq_hz, p.prominence))?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub q_loaded: f64,
    pub q_display: u64,
    pub estimate: QFactorEstimate,
    pub coupling: Option<Coupling>,
}

fn fit_s11(cli: &Cli, a: &FitS11Args, out: &mut dyn Write) -> Result<i32, BenchError> {
    let (estimate, coupling) = match (&a.csv, a.f_lo_hz, a.f_res_hz, a.f_hi_hz) {
        (None, Some(lo), Some(res), Some(hi)) => (QFactorEstimate::from_crossings(lo, res, hi)?, None),
        (Some(path), ..) => {
            let trace = read_s11_csv(open_csv(path)?)?;
            let opts = QEstimateOptions {
                convention: match a.convention {
                    ConventionArg::HalfAbsorbedPower => DipConvention::HalfAbsorbedPower,
                    ConventionArg::DbAboveMinimum => DipConvention::DbAboveMinimum,
                },
                ..QEstimateOptions::default()
            };
            (estimate_q_loaded_with(&trace, &opts)?, Some(classify_coupling(&trace)?))
        }
        _ => return Err(BenchError::InvalidInput("give an S11 CSV or all three frequencies".into())),
    };
    let report = FitReport {
        q_loaded: estimate.q_loaded,
        q_display: estimate.q_display(),
        estimate,
        coupling,
    };
    if cli.json {
        emit_json(out, &report)?;
    } else {
        emit(out, format_args!("q_loaded = {}", report.q_display))?;
        emit(out, format_args!("f_res = {:.0} Hz, bandwidth = {:.0} Hz", estimate.f_res_hz, estimate.bandwidth_hz()))?;
        if let Some(c) = &report.coupling {
            emit(out, format_args!("coupling = {} (|c| - r = {:+.4})", c.class, c.distance))?;
        }
    }
    Ok(EXIT_OK)
}

fn calibrate_cmd(cli: &Cli, a: &CalibrateArgs, out: &mut dyn Write) -> Result<i32, BenchError> {
    let opts = CalibrationOptions {
        seed: cli.seed.unwrap_or(CalibrationOptions::default().seed),
        ..CalibrationOptions::default()
    };
    let stored = calibrate(&opts, Execution::Parallel)?;
    std::fs::write(&a.out, stored.to_toml()).map_err(|e| BenchError::io(&a.out, e))?;
    if cli.json {
        emit_json(out, &stored)?;
    } else {
        let m = &stored.medium;
        emit(out, format_args!("calibration written to {}", a.out.display()))?;
        emit(out, format_args!("n_spins {:.4e}  g {:.4} rad/s  t1 {:.1} us  t2 {:.1} ns  pump efficiency {:.5}",
            m.n_spins, m.g_single_rad_s, m.t1_s * 1e6, m.t2_s * 1e9, m.pump_efficiency))?;
        if let Some(r) = &stored.report {
            emit(out, format_args!("threshold {:.3} mJ  peak {:.2} dBm  delay {} us  rabi {} MHz",
                r.simulated_threshold_j * 1e3, r.peak_dbm, opt(r.delay_s, 1e6, 2), opt(r.rabi_hz, 1e-6, 3)))?;
            if !r.rabi_target_met {
                emit(out, format_args!("note: the on-resonance Rabi target was not reached by any candidate"))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn serve(cli: &Cli, a: &ServeArgs) -> Result<i32, BenchError> {
    let cfg = bench_config(cli, a.config.as_deref())?;
    let run_dir = a.run_dir.clone().unwrap_or_else(|| cfg.resolved_run_dir());
    let session = BenchSession::open_in(cfg, run_dir)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| BenchError::io(Path::new("<runtime>"), e))?;
    rt.block_on(crate::service::serve(session, &a.addr))?;
    Ok(EXIT_OK)
}
