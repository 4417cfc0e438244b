use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ofgnss_bench::{ekf_epoch, flow_pair};
use ofgnss_core::estimator::{ekf_predict, ekf_update_epoch};
use ofgnss_core::optical_flow::{compute_gradients, horn_schunck, lucas_kanade_grid};
use ofgnss_core::scenario::{canonical_degraded_scenario, run_scenario};
use ofgnss_core::{ProcessConfig, RunMode, TrajectorySpec};

fn optical_flow(c: &mut Criterion) {
    let (f0, f1) = flow_pair(64);
    c.bench_function("lucas_kanade_grid 64x64 5x5/15", |b| {
        b.iter(|| {
            let g = compute_gradients(black_box(&f0), black_box(&f1)).unwrap();
            lucas_kanade_grid(&g, 5, 15).unwrap()
        })
    });
    c.bench_function("horn_schunck 64x64 200 iterations", |b| {
        b.iter(|| horn_schunck(black_box(&f0), black_box(&f1), 1.0, 200).unwrap())
    });
}

fn estimator(c: &mut Criterion) {
    let (state, meas, sats) = ekf_epoch();
    let cfg = ProcessConfig::default();
    c.bench_function("ekf predict + pseudorange epoch", |b| {
        b.iter(|| {
            let prior = ekf_predict(black_box(&state), 1.0, &cfg).unwrap();
            ekf_update_epoch(&prior, black_box(&meas), &sats).unwrap()
        })
    });
}

fn scenario(c: &mut Criterion) {
    let mut s = canonical_degraded_scenario();
    if let TrajectorySpec::Line { start, speed, heading, .. } = s.trajectory {
        s.trajectory = TrajectorySpec::Line {
            start,
            duration: 120.0,
            speed,
            heading,
        };
    }
    let mut group = c.benchmark_group("scenario");
    group.sample_size(20);
    for mode in [RunMode::OfGnss, RunMode::GnssOnly] {
        group.bench_function(format!("degraded 120 s {}", mode.as_str()), |b| {
            b.iter(|| run_scenario(black_box(&s), mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, optical_flow, estimator, scenario);
criterion_main!(benches);
