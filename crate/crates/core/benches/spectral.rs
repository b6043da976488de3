use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use maser_core::dynamics::{simulate_burst, synthesize_scope_trace, SimConfig, DEFAULT_SCOPE_RATE_HZ};
use maser_core::par::{self, Execution};
use maser_core::pulse::demodulate;
use maser_core::spectral::{burg_fit, envelope_spectrum, EnvelopeSpectrumOptions};
use maser_core::Complex64;
use std::f64::consts::PI;
use std::hint::black_box;

fn doublet(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let t = k as f64 * 20e-9;
            Complex64::from_polar(1.0, 2.0 * PI * 0.4e6 * t)
                + Complex64::from_polar(1.0, -2.0 * PI * 0.4e6 * t)
                + Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.91).cos()) * 0.05
        })
        .collect()
}

fn burg(c: &mut Criterion) {
    let x = doublet(2000);
    let mut group = c.benchmark_group("burg_fit");
    for order in [10usize, 50, 100] {
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &p| {
            b.iter(|| burg_fit(black_box(&x), p, 20e-9))
        });
    }
    group.finish();
}

fn shot_chain(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let env = simulate_burst(&cfg).unwrap();
    let trace = synthesize_scope_trace(&env, cfg.resonator.f_spin_hz, DEFAULT_SCOPE_RATE_HZ, 50.0).unwrap();
    c.bench_function("demodulate_40us", |b| {
        b.iter(|| demodulate(black_box(&trace), cfg.resonator.f_spin_hz))
    });
    let opts = EnvelopeSpectrumOptions::default();
    c.bench_function("envelope_spectrum", |b| {
        b.iter(|| envelope_spectrum(black_box(&env.a), env.dt(), cfg.resonator.f_spin_hz, &opts))
    });

    // Many independent spectra, as when re-analysing a shot log.
    let records: Vec<Vec<Complex64>> = (0..16).map(|k| doublet(1500 + 50 * k)).collect();
    let mut group = c.benchmark_group("spectra_batch");
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(name, |b| {
            b.iter(|| par::map(&records, exec, |z| envelope_spectrum(z, 20e-9, 0.0, &opts).ok()))
        });
    }
    group.finish();
}

criterion_group!(benches, burg, shot_chain);
criterion_main!(benches);
