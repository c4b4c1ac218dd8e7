use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use spectrum_games::drm::{best_response_drm, br_potential};
use spectrum_games::dynamics::{run_br_drm, simulate_slot_into, EstimatorConfig, SlotOutcome, UpdateMechanism};
use spectrum_games::fairness::noisy_br_distribution;
use spectrum_games::network::generate::{build_geometric_graph, random_instance, random_profile, RandomInstanceParams};
use spectrum_games::oracle::{exhaustive_drm_nep_enumeration, exhaustive_sum_log_rate};
use spectrum_games::seed::rng_from_seed;
use spectrum_games::{Instance, Strategy, StrategyProfile};

fn geometric(num_users: usize, num_channels: usize, m: usize) -> Instance {
    let mut rng = rng_from_seed(1);
    let (graph, _) = build_geometric_graph(&mut rng, num_users, 10.0, 5.0).unwrap();
    Instance::new(graph, num_channels, m, vec![vec![100.0; num_channels]; num_users], vec![0.5; num_users]).unwrap()
}

fn best_response(c: &mut Criterion) {
    let instance = geometric(40, 8, 2);
    let profile = random_profile(&mut rng_from_seed(2), &instance);
    c.bench_function("best_response_drm/N40_K8_M2", |b| {
        b.iter(|| (0..40).map(|n| best_response_drm(n, black_box(&profile), &instance).unwrap().len()).sum::<usize>())
    });
    c.bench_function("br_potential/N40_K8_M2", |b| b.iter(|| br_potential(black_box(&profile), &instance)));
}

fn noisy_best_response(c: &mut Criterion) {
    let instance = geometric(40, 5, 1);
    let profile: StrategyProfile = (0..40).map(|n| Strategy::single(n % 5, 0.25).unwrap()).collect();
    c.bench_function("noisy_br_distribution/N40_K5", |b| {
        b.iter(|| noisy_br_distribution(black_box(7), &profile, &instance, 3.0).unwrap().probs.len())
    });
}

fn slot_simulation(c: &mut Criterion) {
    let instance = geometric(40, 8, 2);
    let profile = random_profile(&mut rng_from_seed(3), &instance);
    let mut rng = rng_from_seed(4);
    let mut out = SlotOutcome::default();
    c.bench_function("simulate_slot/N40_K8_M2", |b| {
        b.iter(|| {
            simulate_slot_into(black_box(&profile), &instance, &mut rng, &mut out);
            out.transmitted.len()
        })
    });
}

fn dynamics_run(c: &mut Criterion) {
    let instance = geometric(40, 8, 1);
    c.bench_function("run_br_drm/backoff_exact_N40_K8", |b| {
        b.iter_batched(
            || rng_from_seed(5),
            |mut rng| {
                run_br_drm(&instance, &UpdateMechanism::backoff(), &EstimatorConfig::Exact, 1000, &mut rng)
                    .unwrap()
                    .len()
            },
            BatchSize::SmallInput,
        )
    });
}

fn oracles(c: &mut Criterion) {
    let instance = geometric(10, 2, 1);
    c.bench_function("exhaustive_sum_log_rate/N10_K2", |b| {
        b.iter(|| exhaustive_sum_log_rate(black_box(&instance)).unwrap().optimum_value)
    });
    let params = RandomInstanceParams { num_users: 8, num_channels: 3, ..RandomInstanceParams::default() };
    let instance = random_instance(&mut rng_from_seed(6), &params).unwrap();
    c.bench_function("exhaustive_drm_nep_enumeration/N8_K3", |b| {
        b.iter(|| exhaustive_drm_nep_enumeration(black_box(&instance)).unwrap().len())
    });
}

criterion_group!(benches, best_response, noisy_best_response, slot_simulation, dynamics_run, oracles);
criterion_main!(benches);
