// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use granular_core::dynamics::{drift, Integrator, InitialLaw};
use granular_core::metrics::{assignment_exact, wasserstein_1d};
use granular_core::{BrownianSource, ParticleEnsemble, Potential, Scheme, StepPolicy};

fn ensemble(n: usize, dim: usize) -> ParticleEnsemble {
    let positions = InitialLaw::gaussian(1.0).sample(n, dim, 11).unwrap();
    ParticleEnsemble::new(positions, n, dim, 5).unwrap()
}

fn pairwise_drift(c: &mut Criterion) {
    let v = Potential::zero();
    let w = Potential::power_law(4.0);
    let mut group = c.benchmark_group("drift/power_law_4");
    for dim in [1, 3] {
        for n in [64, 256, 1024] {
            let ens = ensemble(n, dim);
            group.bench_with_input(BenchmarkId::new(format!("d{dim}"), n), &ens, |b, ens| {
                b.iter(|| drift(black_box(ens), &v, &w).unwrap());
            });
        }
    }
    group.finish();
}

fn integrator_step(c: &mut Criterion) {
    let v = Potential::zero();
    let w = Potential::power_law(4.0);
    let mut group = c.benchmark_group("step/n256_d1");
    for scheme in [Scheme::EulerMaruyama, Scheme::TamedEuler, Scheme::AdaptiveEuler] {
        let mut integrator = Integrator::new(&v, &w, StepPolicy::new(scheme, 0.01)).unwrap();
        let mut ens = ensemble(256, 1);
        ens.project_in_place();
        group.bench_function(format!("{scheme:?}"), |b| {
            b.iter(|| integrator.advance(&mut ens).unwrap());
        });
    }
    group.finish();
}

fn noise(c: &mut Criterion) {
    let src = BrownianSource::new(3);
    let mut out = vec![0.0; 3];
    let mut step = 0u64;
    c.bench_function("noise/particle_d3", |b| {
        b.iter(|| {
            step += 1;
            src.fill(black_box(17), step, 0, &mut out);
        });
    });
}

fn distances(c: &mut Criterion) {
    let a = InitialLaw::gaussian(1.0).sample(1024, 1, 1).unwrap();
    let b = InitialLaw::uniform(2.0).sample(1024, 1, 2).unwrap();
    c.bench_function("wasserstein_1d/1024", |bench| {
        bench.iter(|| wasserstein_1d(black_box(&a), black_box(&b), 2).unwrap());
    });
    let a = InitialLaw::gaussian(1.0).sample(64, 2, 1).unwrap();
    let b = InitialLaw::uniform(2.0).sample(64, 2, 2).unwrap();
    c.bench_function("assignment_exact/64_d2", |bench| {
        bench.iter(|| assignment_exact(black_box(&a), black_box(&b), 2, 2).unwrap());
    });
}

criterion_group!(benches, pairwise_drift, integrator_step, noise, distances);
criterion_main!(benches);
