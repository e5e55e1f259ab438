use std::hint::black_box;

use coalbranch::branching::CsbpSimulator;
use coalbranch::coalescent::{BlockCountingChain, PartitionChain};
use coalbranch::duality::{backward_moment, BackwardMode};
use coalbranch::frequency::{build_freq_params, LimitSde};
use coalbranch::rng::rng_from_seed;
use coalbranch::transform::h_z;
use coalbranch::{Atom, AtomicMeasure, BlockCounts, BranchingParams, Domain, MassLevel, RateSource, TypedPartition};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;

fn params() -> (BranchingParams, MassLevel) {
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
    let mu = vec![
        AtomicMeasure::new(2, Domain::PositiveOrthant, vec![Atom::new(vec![0.8, 0.4], 1.0)]).unwrap(),
        AtomicMeasure::new(2, Domain::PositiveOrthant, vec![Atom::new(vec![0.3, 1.2], 0.8)]).unwrap(),
    ];
    let p = BranchingParams::new(b, vec![1.0, 1.0], mu).unwrap();
    (p, MassLevel::new(vec![1.0, 2.0]).unwrap())
}

fn block_transitions(c: &mut Criterion) {
    let (p, z) = params();
    let chain = BlockCountingChain::new(RateSource::Dual { params: &p, z: &z }).unwrap();
    let mut group = c.benchmark_group("block_transitions");
    for n in [4u32, 16, 64] {
        let counts = BlockCounts::new(vec![n, n]);
        group.bench_with_input(BenchmarkId::from_parameter(n), &counts, |bch, counts| {
            bch.iter(|| chain.transitions(black_box(counts)).unwrap())
        });
    }
    group.finish();
}

fn partition_transitions(c: &mut Criterion) {
    let (p, z) = params();
    let chain = PartitionChain::new(&h_z(&p, &z).unwrap()).unwrap();
    let mut group = c.benchmark_group("partition_transitions");
    for m in [4usize, 8, 12] {
        let pi = TypedPartition::singletons(&(0..m).map(|e| e % 2).collect::<Vec<_>>()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &pi, |bch, pi| {
            bch.iter(|| chain.transitions(black_box(pi)).unwrap())
        });
    }
    group.finish();
}

fn euler_steps(c: &mut Criterion) {
    let (p, z) = params();
    let csbp = CsbpSimulator::new(&p).unwrap();
    let sde = LimitSde::new(&build_freq_params(&p, &z).unwrap());
    let mut rng = rng_from_seed(1);
    c.bench_function("csbp_step", |bch| {
        let mut x = vec![1.0, 2.0];
        bch.iter(|| {
            csbp.step(&mut x, 1e-3, &mut rng);
            if x.iter().all(|&v| v == 0.0) {
                x = vec![1.0, 2.0];
            }
        })
    });
    c.bench_function("sde_step", |bch| {
        let mut r = vec![0.3, 0.7];
        bch.iter(|| sde.step(black_box(&mut r), 1e-3, &mut rng))
    });
}

fn exact_backward(c: &mut Criterion) {
    let (p, z) = params();
    let mut group = c.benchmark_group("exact_backward");
    group.sample_size(10);
    for n in [3u32, 8, 16] {
        let counts = BlockCounts::new(vec![n, n]);
        group.bench_with_input(BenchmarkId::from_parameter(n), &counts, |bch, counts| {
            bch.iter(|| {
                backward_moment(RateSource::Dual { params: &p, z: &z }, counts, &[0.3, 0.7], 1.0, BackwardMode::Exact)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, block_transitions, partition_transitions, euler_steps, exact_backward);
criterion_main!(benches);
