use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use oamlink::analysis::BootstrapOptions;
use oamlink::measurement::{chsh_scan, NoiseModel};
use oamlink::tomography::{bootstrap_fidelity_error, simulate_tomo_counts};
use oamlink::{apply_white_noise, chsh, Execution, TwoQubitState};

fn executions() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Execution::Parallel));
    v
}

fn chsh_bootstrap(c: &mut Criterion) {
    let state = apply_white_noise(&TwoQubitState::phi(1), 0.1923).unwrap();
    let records = chsh_scan(&state, 1, &NoiseModel::ideal(3000.0), 10.0, 7).unwrap();
    let mut group = c.benchmark_group("chsh_bootstrap_1000");
    for (name, exec) in executions() {
        let opts = BootstrapOptions {
            resamples: 1000,
            seed: 1,
            exec,
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| chsh(&records, 1, &opts).unwrap())
        });
    }
    group.finish();
}

fn fidelity_bootstrap(c: &mut Criterion) {
    let state = apply_white_noise(&TwoQubitState::phi(2), 0.1).unwrap();
    let records = simulate_tomo_counts(&state, &NoiseModel::ideal(2000.0), 10.0, 3).unwrap();
    let mut group = c.benchmark_group("fidelity_bootstrap_64");
    group.sample_size(10);
    for (name, exec) in executions() {
        let opts = BootstrapOptions {
            resamples: 64,
            seed: 1,
            exec,
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bootstrap_fidelity_error(&records, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, chsh_bootstrap, fidelity_bootstrap);
criterion_main!(benches);
