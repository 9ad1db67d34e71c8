use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use jumpfit::deconv::linspace;
use jumpfit::spectral::estimate;
use jumpfit::stats::kendall_tau;
use jumpfit::{estimate_density, log_ecf, simulate_increments, EmpiricalExponent, JumpLaw, LevyParams, SpectralConfig};

fn merton(n: usize) -> jumpfit::ReturnSeries {
    let p = LevyParams::new(0.0, 1.0, 10.0, 0.1).unwrap();
    simulate_increments(&p, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, n, 1).unwrap()
}

fn benches(c: &mut Criterion) {
    let data = merton(10_000);
    let u = linspace(0.0, 6.0, 200);
    c.bench_function("log_ecf 10k x 200", |b| b.iter(|| log_ecf(black_box(&data), &u).unwrap()));

    let cfg = SpectralConfig::new(6.0, 6.0, 0.5).unwrap();
    let phi = EmpiricalExponent::new(&data);
    c.bench_function("spectral estimate 10k", |b| b.iter(|| estimate(black_box(&phi), &cfg).unwrap()));

    let est = estimate(&phi, &cfg).unwrap();
    let x = linspace(-5.0, 5.0, 1000);
    c.bench_function("density 2000 nodes x 1000 points", |b| {
        b.iter(|| estimate_density(&phi, black_box(&est), 6.0, 2000, &x).unwrap())
    });

    let other = merton(5000);
    c.bench_function("kendall tau 5k", |b| {
        b.iter(|| kendall_tau(black_box(&data.returns()[..5000]), other.returns()).unwrap())
    });
}

criterion_group!(estimators, benches);
criterion_main!(estimators);
