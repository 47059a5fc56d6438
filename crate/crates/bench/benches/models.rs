use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lbs_core::baselines::{EnsembleConfig, EnsembleModel, IcmConfig, IcmModel, RndConfig, RndModel};
use lbs_core::diffnum::{Matrix, Mlp};
use lbs_core::envs::{mc_step, ControlEnv, EnvId, MountainCarState};
use lbs_core::policy::{ActorCritic, ActorCriticConfig, PpoConfig, RolloutBuffer};
use lbs_core::{CuriosityModel, LbsConfig, LbsModel, TransitionBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn control_batch(n: usize, s: usize, a: usize, rng: &mut ChaCha8Rng) -> TransitionBatch {
    let mut m = |c| Matrix::from_vec(n, c, (0..n * c).map(|_| rng.random_range(-1.0..1.0)).collect());
    TransitionBatch::new(m(s), m(a), m(s)).unwrap()
}

fn bench_models(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = control_batch(64, 3, 2, &mut rng);
    let big = control_batch(2048, 3, 2, &mut rng);

    let mut lbs = LbsModel::new(LbsConfig::control(3, 2), &mut rng).unwrap();
    c.bench_function("lbs_train_step_64", |b| {
        b.iter(|| lbs.train_step(&batch, &mut rng).unwrap())
    });
    c.bench_function("lbs_rewards_2048", |b| b.iter(|| lbs.rewards(&big).unwrap()));

    let mut icm = IcmModel::new(IcmConfig::control(3, 2), &mut rng);
    c.bench_function("icm_train_step_64", |b| {
        b.iter(|| icm.train_step(&batch, &mut rng).unwrap())
    });
    let mut rnd = RndModel::new(RndConfig::control(3, 2), &mut rng);
    c.bench_function("rnd_train_step_64", |b| {
        b.iter(|| rnd.train_step(&batch, &mut rng).unwrap())
    });
    let mut ens = EnsembleModel::new(EnsembleConfig::control(3, 2), &mut rng);
    c.bench_function("disagreement_train_step_64", |b| {
        b.iter(|| ens.train_step(&batch, &mut rng).unwrap())
    });
}

fn bench_policy(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ac = ActorCritic::new(ActorCriticConfig::new(3, 2), &mut rng).unwrap();
    c.bench_function("policy_act", |b| b.iter(|| ac.act(&[0.1, -0.2, 0.3], &mut rng).unwrap()));

    let mut buf = RolloutBuffer::new(3, 2);
    for t in 0..2048 {
        let obs = [(t as f64).sin(), (t as f64).cos(), 0.0];
        let out = ac.act(&obs, &mut rng).unwrap();
        buf.push(&obs, &out.action, out.log_prob, out.value, 0.0, t % 1000 == 999).unwrap();
    }
    let rewards: Vec<f64> = (0..2048).map(|t| (t % 7) as f64).collect();
    buf.compute_advantages(&rewards, 0.0, 0.99, 0.95).unwrap();
    let cfg = PpoConfig {
        epochs: 1,
        ..PpoConfig::default()
    };
    c.bench_function("ppo_epoch_2048", |b| {
        b.iter_batched(
            || ac.clone(),
            |mut ac| lbs_core::policy::ppo_update(&mut ac, &buf, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_env(c: &mut Criterion) {
    c.bench_function("mc_step", |b| {
        let s = MountainCarState::new(-0.5, 0.01);
        b.iter(|| mc_step(std::hint::black_box(s), 0.3))
    });
    let mut env = ControlEnv::new(EnvId::SmcEvolving, 1000, 0).unwrap();
    c.bench_function("smc_env_step", |b| b.iter(|| env.step(&[0.5, -0.5]).unwrap()));
}

fn bench_mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Mlp::new(
        &[196, 64, 64, 196],
        lbs_core::diffnum::Activation::Relu,
        lbs_core::diffnum::Init::FanInUniform,
        &mut rng,
    );
    let x: Vec<f64> = (0..196).map(|i| i as f64 / 196.0).collect();
    c.bench_function("mlp_forward_196", |b| b.iter(|| net.forward_vec(&x).unwrap()));
}

criterion_group!(benches, bench_models, bench_policy, bench_env, bench_mlp);
criterion_main!(benches);
