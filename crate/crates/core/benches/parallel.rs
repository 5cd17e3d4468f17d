use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mtqed::decoherence::{cat_scan, default_times};
use mtqed::dynamics::TavisCummingsParams;
use mtqed::par::Execution;
use mtqed::spectra::{linspace, numeric_spectrum, NumericSpectrumParams};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn spectrum_grid(c: &mut Criterion) {
    let tc = TavisCummingsParams {
        omega0: 1.0,
        omega: 1.0,
        lambda: 0.1,
        emitters: 9,
        n_max: 2,
    };
    let p = NumericSpectrumParams::new(tc, 0.01);
    let grid = linspace(0.5, 1.5, 256);
    let mut g = c.benchmark_group("numeric_spectrum");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| numeric_spectrum(black_box(&p), &grid, exec).unwrap())
        });
    }
    g.finish();
}

fn cat_grid(c: &mut Criterion) {
    let times = default_times(1.0, 6);
    let phis: Vec<f64> = (1..=8).map(|k| 0.1 * k as f64).collect();
    let mut g = c.benchmark_group("cat_scan");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| cat_scan(black_box(6.0), &phis, 1.0, &times, 1e-8, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, spectrum_grid, cat_grid);
criterion_main!(benches);
