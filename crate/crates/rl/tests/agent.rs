use genctrl_core::dynamics::Scenario;
use genctrl_rl::{evaluate_policy, reward, train, OuNoise, ReplayMemory, TrainConfig, Transition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_config(episodes: usize) -> TrainConfig {
    TrainConfig {
        episodes,
        replay_capacity: 500,
        batch_size: 16,
        hidden: (24, 16),
        seed: 11,
        ..TrainConfig::default()
    }
}

fn short_scenario() -> Scenario {
    Scenario::example1_default().with_horizon(1.0).unwrap()
}

#[test]
fn uniform_replay_sampling() {
    let mut m = ReplayMemory::new(100);
    for k in 0..250 {
        m.push(Transition {
            s: vec![],
            a: vec![],
            r: k as f64,
            s_next: vec![],
            terminal: false,
        });
    }
    assert_eq!(m.len(), 100);
    let mut counts = [0usize; 100];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in m.sample_indices(100_000, &mut rng) {
        counts[i] += 1;
    }
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
    // upper 0.001 quantile of chi-square with 99 degrees of freedom
    assert!(chi2 < 148.23, "chi2 = {chi2}");
}

#[test]
fn reward_decreases_with_bound() {
    let values: Vec<f64> = (0..=300).map(|k| reward(k as f64 * 0.01, 50, 50)).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn noise_stays_zero_without_diffusion() {
    let mut n = OuNoise::new(4, 0.15, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        assert!(n.sample(&mut rng).iter().all(|v| *v == 0.0));
    }
}

#[test]
fn training_is_deterministic_and_actions_bounded() {
    let s = short_scenario();
    let a = train(&s, &tiny_config(6)).unwrap();
    let b = train(&s, &tiny_config(6)).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.actor, b.actor);
    assert!(a.curve.iter().all(|r| r.cr_bound > 0.0 && !r.aborted));

    let e1 = evaluate_policy(&a.actor, &s).unwrap();
    let e2 = evaluate_policy(&a.actor, &s).unwrap();
    assert_eq!(e1.cr_bound, e2.cr_bound);
    assert!(e1.pulse.check_bounds().is_ok());
    let moved = s.with_params(genctrl_core::dynamics::ParamVector([1.4, 0.7, 0.8])).unwrap();
    assert!(evaluate_policy(&a.actor, &moved).unwrap().cr_bound.is_finite());
}
