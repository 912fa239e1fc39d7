use std::time::Instant;

use genctrl_core::dynamics::{PulseSequence, Scenario, ScenarioKind};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, OBS_DIM};
use crate::error::{Result, RlError};
use crate::mlp::{Adam, Gradients, Mlp, Real};
use crate::noise::OuNoise;
use crate::replay::{ReplayMemory, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub discount: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub ou_theta: f64,
    /// Defaults to `0.2·u_max` of the scenario.
    pub ou_sigma: Option<f64>,
    pub hidden: (usize, usize),
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            replay_capacity: 50_000,
            batch_size: 64,
            discount: 0.99,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            tau: 1e-3,
            ou_theta: 0.15,
            ou_sigma: None,
            hidden: (400, 300),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Episode and replay budgets used for each example.
    pub fn for_kind(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Example1 => Self::default(),
            ScenarioKind::Example2 => Self {
                episodes: 20_000,
                replay_capacity: 100_000,
                ..Self::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RlError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        if self.replay_capacity == 0 || self.batch_size == 0 {
            return bad("replay capacity and batch size must be positive");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub terminal_reward: f64,
    pub cr_bound: f64,
    pub aborted: bool,
}

pub struct TrainReport<T> {
    pub actor: Mlp<T>,
    pub curve: Vec<EpisodeRecord>,
    pub wall_time: f64,
}

impl<T> TrainReport<T> {
    /// Mean terminal reward over `range` of the learning curve.
    pub fn mean_reward(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.curve[range];
        slice.iter().map(|r| r.terminal_reward).sum::<f64>() / slice.len() as f64
    }
}

fn to_batch<T: Real>(rows: &[&[f64]]) -> Array2<T> {
    let width = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((rows.len(), width), |(i, j)| T::from_f64(rows[i][j]).expect("finite"))
}

/// Mean squared error `mean (Q(s, a) − y)²`, its parameter gradients and
/// `∂loss/∂a`.
pub fn critic_gradients<T: Real>(
    critic: &Mlp<T>,
    s: &Array2<T>,
    a: &Array2<T>,
    y: &Array2<T>,
) -> Result<(T, Gradients<T>, Array2<T>)> {
    let cache = critic.forward_cached(s, Some(a))?;
    let diff = &cache.output - y;
    let n = T::from_usize(s.nrows()).expect("batch size");
    let loss = diff.mapv(|d| d * d).sum() / n;
    let d_out = diff.mapv(|d| (d + d) / n);
    let (grads, _, d_a) = critic.backward(&cache, &d_out);
    Ok((loss, grads, d_a.expect("critic takes an action input")))
}

/// Policy loss `−mean Q(s, μ(s))` and its gradients for the actor.
pub fn actor_gradients<T: Real>(actor: &Mlp<T>, critic: &Mlp<T>, s: &Array2<T>) -> Result<(T, Gradients<T>)> {
    let a_cache = actor.forward_cached(s, None)?;
    let q_cache = critic.forward_cached(s, Some(&a_cache.output))?;
    let n = T::from_usize(s.nrows()).expect("batch size");
    let loss = -q_cache.output.sum() / n;
    let d_q = Array2::from_elem(q_cache.output.raw_dim(), -T::one() / n);
    let (_, _, d_a) = critic.backward(&q_cache, &d_q);
    let (grads, _, _) = actor.backward(&a_cache, &d_a.expect("critic takes an action input"));
    Ok((loss, grads))
}

pub struct Agent<T> {
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub target_actor: Mlp<T>,
    pub target_critic: Mlp<T>,
    actor_opt: Adam<T>,
    critic_opt: Adam<T>,
    pub config: TrainConfig,
    pub u_max: f64,
}

impl<T: Real> Agent<T> {
    pub fn new(actions: usize, u_max: f64, config: TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let actor = Mlp::actor(OBS_DIM, config.hidden, actions, u_max, rng);
        let critic = Mlp::critic(OBS_DIM, config.hidden, actions, rng);
        Self {
            actor_opt: Adam::new(&actor, config.actor_lr),
            critic_opt: Adam::new(&critic, config.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            config,
            u_max,
        }
    }

    /// Deterministic policy output for one observation, clamped to the bound.
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        policy_action(&self.actor, obs, self.u_max)
    }

    pub fn update(&mut self, batch: &[&Transition]) -> Result<()> {
        let s: Array2<T> = to_batch(&batch.iter().map(|t| t.s.as_slice()).collect::<Vec<_>>());
        let a: Array2<T> = to_batch(&batch.iter().map(|t| t.a.as_slice()).collect::<Vec<_>>());
        let s2: Array2<T> = to_batch(&batch.iter().map(|t| t.s_next.as_slice()).collect::<Vec<_>>());

        let a2 = self.target_actor.forward(&s2, None)?;
        let q2 = self.target_critic.forward(&s2, Some(&a2))?;
        let gamma = T::from_f64(self.config.discount).expect("finite");
        let y = Array2::from_shape_fn((batch.len(), 1), |(i, _)| {
            let r = T::from_f64(batch[i].r).expect("finite");
            if batch[i].terminal {
                r
            } else {
                r + gamma * q2[[i, 0]]
            }
        });

        let (_, cg, _) = critic_gradients(&self.critic, &s, &a, &y)?;
        self.critic_opt.step(&mut self.critic, &cg);
        let (_, ag) = actor_gradients(&self.actor, &self.critic, &s)?;
        self.actor_opt.step(&mut self.actor, &ag);

        self.target_critic.soft_update(&self.critic, self.config.tau)?;
        self.target_actor.soft_update(&self.actor, self.config.tau)?;
        Ok(())
    }
}

fn policy_action<T: Real>(actor: &Mlp<T>, obs: &[f64], u_max: f64) -> Result<Vec<f64>> {
    let out = actor.forward(&to_batch(&[obs]), None)?;
    Ok(out.iter().map(|v| v.to_f64().unwrap_or(0.0).clamp(-u_max, u_max)).collect())
}

/// Trains an actor on `scenario` with single-precision networks.
pub fn train(scenario: &Scenario, config: &TrainConfig) -> Result<TrainReport<f32>> {
    train_with::<f32>(scenario, config)
}

pub fn train_with<T: Real>(scenario: &Scenario, config: &TrainConfig) -> Result<TrainReport<T>> {
    config.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let u_max = scenario.u_max;
    let p = scenario.num_controls();
    let mut agent = Agent::<T>::new(p, u_max, config.clone(), &mut rng);
    let mut env = Environment::new(scenario.system()?);
    let mut replay = ReplayMemory::new(config.replay_capacity);
    let mut noise = OuNoise::new(p, config.ou_theta, config.ou_sigma.unwrap_or(0.2 * u_max));
    let mut curve = Vec::with_capacity(config.episodes);

    for episode in 0..config.episodes {
        let mut obs = env.reset();
        noise.reset();
        let mut record = EpisodeRecord {
            episode,
            terminal_reward: 0.0,
            cr_bound: f64::INFINITY,
            aborted: false,
        };
        for _ in 0..env.slices() {
            let mean = agent.act(&obs)?;
            let n = noise.sample(&mut rng);
            let action: Vec<f64> = mean.iter().zip(n).map(|(m, e)| (m + e).clamp(-u_max, u_max)).collect();
            let outcome = match env.step(&action) {
                Ok(o) => o,
                Err(e) => {
                    log::warn!("episode {episode} aborted at slice {}: {e}", env.step_index());
                    record.aborted = true;
                    break;
                }
            };
            replay.push(Transition {
                s: obs,
                a: action,
                r: outcome.reward,
                s_next: outcome.observation.clone(),
                terminal: outcome.terminal,
            });
            obs = outcome.observation;
            if let Some(cr) = outcome.cr_bound {
                record.cr_bound = cr;
                record.terminal_reward = outcome.reward;
            }
            if replay.len() >= config.batch_size {
                let batch = replay.sample(config.batch_size, &mut rng);
                agent.update(&batch)?;
            }
        }
        if episode % 100 == 99 {
            log::info!("episode {}: reward {:.3e}, bound {:.4}", episode + 1, record.terminal_reward, record.cr_bound);
        }
        curve.push(record);
    }

    Ok(TrainReport {
        actor: agent.actor,
        curve,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub pulse: PulseSequence,
    pub cr_bound: f64,
}

/// Noise-free rollout of `actor` on `scenario`, which may sit at parameters
/// other than the training point.
pub fn evaluate_policy<T: Real>(actor: &Mlp<T>, scenario: &Scenario) -> Result<PolicyEvaluation> {
    let mut env = Environment::new(scenario.system()?);
    let mut obs = env.reset();
    let mut cr_bound = f64::INFINITY;
    for _ in 0..env.slices() {
        let a = policy_action(actor, &obs, scenario.u_max)?;
        let o = env.step(&a)?;
        obs = o.observation;
        if let Some(cr) = o.cr_bound {
            cr_bound = cr;
        }
    }
    Ok(PolicyEvaluation {
        pulse: env.pulse(),
        cr_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            discount: 1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let e2 = TrainConfig::for_kind(ScenarioKind::Example2);
        assert_eq!((e2.episodes, e2.replay_capacity), (20_000, 100_000));
    }

    #[test]
    fn zero_episodes_return_initial_actor() {
        let s = Scenario::example1_default();
        let cfg = TrainConfig {
            episodes: 0,
            hidden: (8, 6),
            seed: 4,
            ..TrainConfig::default()
        };
        let r = train(&s, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fresh = Agent::<f32>::new(6, 3.0, cfg, &mut rng);
        assert_eq!(r.actor, fresh.actor);
        assert!(r.curve.is_empty());
    }
}
