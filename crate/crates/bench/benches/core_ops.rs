//! Microbenchmarks for the operations that dominate experiment runtime:
//! reduction, propagation, localization jumps, channel application, and one
//! full measure-verify trial.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use qjump_core::dynamics::Hamiltonian;
use qjump_core::grw::{self, GrwParams, LatticeSpec};
use qjump_core::hilbert::SpaceSpec;
use qjump_core::random::{random_density, random_hermitian, random_state};
use qjump_core::rng::derived_stream;
use qjump_core::wigner::{self, Regime, WignerConfig};
use qjump_core::C64;

fn bench_partial_trace(c: &mut Criterion) {
    let space = SpaceSpec::new([("A", 4), ("B", 4), ("C", 4)]).unwrap();
    let mut rng = derived_stream(1, 0);
    let rho = random_density(&space, &mut rng);
    c.bench_function("partial_trace dim64 keep16", |b| {
        b.iter(|| black_box(rho.partial_trace(&["A", "B"]).unwrap()))
    });
}

fn bench_propagation(c: &mut Criterion) {
    let space = SpaceSpec::single("S", 64).unwrap();
    let mut rng = derived_stream(1, 1);
    let h = Hamiltonian::new(space.clone(), random_hermitian(64, &mut rng)).unwrap();
    let psi = random_state(&space, &mut rng);
    // Warm the cached eigendecomposition so the loop measures propagation.
    let _ = h.evolve(&psi, 0.1).unwrap();
    c.bench_function("schrodinger_step dim64 cached", |b| {
        b.iter(|| black_box(h.evolve(&psi, 0.37).unwrap()))
    });
    c.bench_function("hamiltonian_eigendecomposition dim64", |b| {
        b.iter_batched(
            || Hamiltonian::new(space.clone(), h.matrix().clone()).unwrap(),
            |fresh| black_box(fresh.evolve(&psi, 0.37).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

fn bench_localization(c: &mut Criterion) {
    let sites = 16usize;
    let params = GrwParams::new(1.0, 1.0)
        .unwrap()
        .with_subsystem(
            "Q",
            5.0,
            LatticeSpec {
                sites,
                spacing: 6.0,
            },
        )
        .unwrap();
    let space = SpaceSpec::new([("P", 2), ("Q", sites)]).unwrap();
    let mut amps = qjump_core::CVector::from_element(space.total_dim(), C64::new(0.0, 0.0));
    amps[space.index_of(&[0, 1])] = C64::new(0.6, 0.0);
    amps[space.index_of(&[1, 9])] = C64::new(0.8, 0.0);
    let psi = qjump_core::StateVector::new(space, amps).unwrap();

    c.bench_function("apply_jump dim32 sites16", |b| {
        let mut rng = derived_stream(2, 0);
        b.iter(|| black_box(grw::apply_jump(&psi, "Q", &params, &mut rng).unwrap()))
    });
    c.bench_function("evolve_grw 10 jumps dim32", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            black_box(grw::evolve_grw(&psi, None, &params, 2.0, seed).unwrap())
        })
    });
}

fn bench_channel(c: &mut Criterion) {
    let sites = 16usize;
    let params = GrwParams::new(1.0, 1.0)
        .unwrap()
        .with_subsystem(
            "Q",
            1.0,
            LatticeSpec {
                sites,
                spacing: 2.0,
            },
        )
        .unwrap();
    let space = SpaceSpec::single("Q", sites).unwrap();
    let channel = grw::grw_channel(&params, 0.05, &space).unwrap();
    let mut rng = derived_stream(3, 0);
    let rho = random_density(&space, &mut rng);
    c.bench_function("grw_channel apply 17 kraus dim16", |b| {
        b.iter(|| black_box(channel.apply(&rho).unwrap()))
    });
}

fn bench_wigner_trial(c: &mut Criterion) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let cfg = WignerConfig::new(C64::new(h, 0.0), C64::new(h, 0.0), Regime::Grw, 50, 4);
    c.bench_function("wigner run_experiment grw 50 trials", |b| {
        b.iter(|| black_box(wigner::run_experiment(&cfg).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_partial_trace,
    bench_propagation,
    bench_localization,
    bench_channel,
    bench_wigner_trial
);
criterion_main!(benches);
