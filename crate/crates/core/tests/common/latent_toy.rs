//! 1-D latent-model toys and their evidence oracle.

use lbs_core::diffnum::{gaussian_head, gaussian_log_density, kl_diag_gaussian, standard_normal, Matrix};
use lbs_core::latent::ReconStd;
use lbs_core::{LbsConfig, LbsModel, Transition, TransitionBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Learned reconstruction std, so the evidence integral has a non-trivial decoder.
pub fn toy_config(beta: f64) -> LbsConfig {
    LbsConfig {
        beta,
        recon_std: ReconStd::Learned,
        ..LbsConfig::control(1, 1)
    }
}

pub fn deterministic_next(s: f64, a: f64) -> f64 {
    0.5 * s + 0.3 * a
}

/// `n` transitions with `s, a` in `[-1, 1]` and `s' = f(s, a)`, or pure noise when `noisy`.
pub fn toy_batch(n: usize, noisy: bool, rng: &mut ChaCha8Rng) -> TransitionBatch {
    let mut s = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut nx = Vec::with_capacity(n);
    for _ in 0..n {
        let si: f64 = rng.random_range(-1.0..1.0);
        let ai: f64 = rng.random_range(-1.0..1.0);
        s.push(si);
        a.push(ai);
        nx.push(if noisy { rng.random_range(-1.0..1.0) } else { deterministic_next(si, ai) });
    }
    TransitionBatch::new(Matrix::from_vec(n, 1, s), Matrix::from_vec(n, 1, a), Matrix::from_vec(n, 1, nx)).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Reconstruction density of `s'` given a latent value.
pub fn recon_log_density(m: &LbsModel, z: f64, s_next: f64) -> f64 {
    let raw = m.reconstruction_net().forward_vec(&[z]).unwrap();
    let d = gaussian_head(&raw[..1], &raw[1..]).unwrap();
    gaussian_log_density(&d, &[s_next]).unwrap()
}

/// `log integral p(z|s,a) p(s'|z) dz` by a log-sum-exp trapezoid rule.
pub fn log_evidence(m: &LbsModel, t: &Transition) -> f64 {
    let prior = m.prior_forward(&t.state, &t.action).unwrap();
    let (mu, sd) = (prior.mean()[0], prior.std()[0]);
    let n = 40_000;
    let (lo, hi) = (mu - 12.0 * sd, mu + 12.0 * sd);
    let h = (hi - lo) / n as f64;
    let terms: Vec<f64> = (0..=n)
        .map(|i| {
            let z = lo + i as f64 * h;
            let w: f64 = if i == 0 || i == n { 0.5 } else { 1.0 };
            w.ln() + gaussian_log_density(&prior, &[z]).unwrap() + recon_log_density(m, z, t.next_state[0])
        })
        .collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|x| (x - top).exp()).sum::<f64>().ln() + h.ln()
}

/// Monte-Carlo bound (one posterior sample per draw) with its standard error; also cross-checks `elbo_loss`.
pub fn elbo_estimate(m: &LbsModel, t: &Transition, draws: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let post = m.posterior_forward(&t.state, &t.action, &t.next_state).unwrap();
    let prior = m.prior_forward(&t.state, &t.action).unwrap();
    let kl = kl_diag_gaussian(&post, &prior).unwrap();
    let noise = standard_normal(draws, 1, rng);
    let vals: Vec<f64> = noise
        .as_slice()
        .iter()
        .map(|e| recon_log_density(m, post.mean()[0] + post.std()[0] * e, t.next_state[0]) - kl)
        .collect();
    let mu = mean(&vals);
    let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (draws - 1) as f64;

    let rows: Vec<Transition> = (0..draws).map(|_| t.clone()).collect();
    let batch = TransitionBatch::from_transitions(&rows).unwrap();
    let from_model = -m.elbo_loss(&batch, &noise).unwrap().loss;
    assert!((from_model - mu).abs() < 1e-9 * (1.0 + mu.abs()), "{from_model} vs {mu}");
    (mu, (var / draws as f64).sqrt())
}

pub fn elbo_probes() -> [Transition; 3] {
    [
        Transition::new(vec![0.2], vec![-0.4], vec![0.0]),
        Transition::new(vec![-0.9], vec![0.8], vec![-0.2]),
        Transition::new(vec![0.5], vec![0.5], vec![1.5]),
    ]
}

/// Checks the Monte-Carlo bound against the evidence before and after some training.
pub fn check_elbo_below_evidence(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = LbsModel::new(toy_config(1.0), &mut rng).map_err(|e| e.to_string())?;
    for stage in 0..2 {
        for t in &elbo_probes() {
            let (elbo, se) = elbo_estimate(&m, t, 20_000, &mut rng);
            let ev = log_evidence(&m, t);
            if elbo > ev + 2.0 * se {
                return Err(format!("seed {seed} stage {stage}: elbo {elbo} (se {se}) > evidence {ev}"));
            }
        }
        // Second stage: partly trained, so the bound is tighter.
        for _ in 0..300 {
            let b = toy_batch(64, false, &mut rng);
            m.train(&b, &mut rng).map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}
