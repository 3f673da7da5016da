use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use owc_noma::agent::{DdpgAgent, Experience, NafAgent, TrainConfig};
use owc_noma::baselines::exhaustive_group;
use owc_noma::env::NomaEnv;
use owc_noma::projection::project_alphas;
use owc_noma::rlnc::{self, gf256, Generation, Gf256};
use owc_noma::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rates(c: &mut Criterion) {
    let sc = Scenario::default_scenario();
    let link = sc.group_links().unwrap().remove(0);
    let alphas = [0.1, 0.2, 0.3, 0.4];
    c.bench_function("user_rates_m4", |b| {
        b.iter(|| link.user_rates(black_box(&alphas)))
    });
    c.bench_function("rates_feasible_m4_cross", |b| {
        b.iter(|| link.rates_feasible(black_box(&alphas), 1e8, true))
    });
}

fn projection(c: &mut Criterion) {
    let raw = [0.4, 0.1, 0.35, 0.3];
    c.bench_function("project_alphas_m4", |b| {
        b.iter(|| project_alphas(black_box(&raw)).unwrap())
    });
}

fn exhaustive(c: &mut Criterion) {
    let sc = Scenario::default_scenario();
    let link = sc.group_links().unwrap().remove(0);
    let mut g = c.benchmark_group("exhaustive");
    g.sample_size(20);
    g.bench_function("m4_g20", |b| {
        b.iter(|| exhaustive_group(&link, 1e8, true, black_box(20)).unwrap())
    });
    g.finish();
}

fn batch(env: &NomaEnv, rng: &mut ChaCha8Rng) -> Vec<Experience> {
    (0..32)
        .map(|_| Experience {
            state: (0..env.state_dim()).map(|_| rng.random()).collect(),
            action: (0..env.action_dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            reward: rng.random(),
            next_state: (0..env.state_dim()).map(|_| rng.random()).collect(),
        })
        .collect()
}

fn agents(c: &mut Criterion) {
    let env = NomaEnv::new(&Scenario::default_scenario()).unwrap();
    let cfg = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data = batch(&env, &mut rng);
    let refs: Vec<&Experience> = data.iter().collect();
    let mut g = c.benchmark_group("train_on_joint_default");
    g.sample_size(30);
    let naf = NafAgent::new(env.state_dim(), env.action_dim(), &cfg, &mut rng);
    g.bench_function("naf", |b| {
        b.iter_batched(
            || naf.clone(),
            |mut a| a.train_on(&refs).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let ddpg = DdpgAgent::new(env.state_dim(), env.action_dim(), &cfg, &mut rng);
    g.bench_function("ddpg", |b| {
        b.iter_batched(
            || ddpg.clone(),
            |mut a| a.train_on(&refs).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn gf(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let src: Vec<u8> = (0..1500).map(|_| rng.random()).collect();
    let mut dst = vec![0u8; 1500];
    c.bench_function("gf256_mul_add_1500", |b| {
        b.iter(|| gf256::mul_add_slice(black_box(&mut dst), &src, Gf256(0x53)))
    });
    let gen = Generation::random(16, 1500, &mut rng).unwrap();
    let packets: Vec<_> = (0..20).map(|_| rlnc::encode(&gen, &mut rng)).collect();
    c.bench_function("rlnc_decode_f16_1500", |b| {
        b.iter(|| rlnc::decode(black_box(&packets), 16).unwrap())
    });
}

criterion_group!(benches, rates, projection, exhaustive, agents, gf);
criterion_main!(benches);
