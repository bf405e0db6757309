use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sfdma_core::abg_power::{outage_sim, rayleigh_trace, AbgParams, FixedPower, Policy};
use sfdma_core::channel::PowerAllocation;
use sfdma_core::io::{gaussian_blobs, BlobSpec};
use sfdma_core::nncore::SeededRng;
use sfdma_core::par::Exec;
use sfdma_core::rib::{evaluate_accuracy, RibArchitecture, TransceiverPair};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn outage(c: &mut Criterion) {
    let params = AbgParams::new(91.95, 10.50, 81.90, 1.329);
    let trace = rayleigh_trace(100_000, 64, &[0.1], 0.1, &SeededRng::new(1), Exec::Parallel).unwrap();
    let mut g = c.benchmark_group("outage_sim");
    for (name, exec) in MODES {
        for policy in [Policy::Fixed(FixedPower::Percentile(0.95)), Policy::Adaptive { budget: None }] {
            g.bench_with_input(BenchmarkId::new(name, policy.name()), &policy, |b, &p| {
                b.iter(|| outage_sim(&params, 90.0, &trace, p, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn accuracy(c: &mut Criterion) {
    let mut rng = SeededRng::new(2);
    let spec = BlobSpec { samples: 2000, classes: 10, dim: 64, separation: 4.0, sigma: 1.0 };
    let data = gaussian_blobs(&spec, &mut rng).unwrap();
    let arch = RibArchitecture::default();
    let pairs: Vec<_> = (0..4).map(|i| TransceiverPair::new(i, 64, 10, 32, 0.05, &arch, &mut rng).unwrap()).collect();
    let pw = PowerAllocation::uniform(4, 1.0);
    let eval_rng = SeededRng::new(3);
    let mut g = c.benchmark_group("evaluate_accuracy");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| evaluate_accuracy(&pairs, &data, 10.0, &pw, 4, &eval_rng, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, outage, accuracy);
criterion_main!(benches);
