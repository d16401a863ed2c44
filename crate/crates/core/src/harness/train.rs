//! Training loop shared by every [`Environment`].

use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{DqnConfig, Mode, RunConfig, TrainConfig};
use crate::dqn::{epsilon_schedule, Checkpoint, DqnAgent};
use crate::error::{Error, Result};
use crate::mdp::{BroadcastEnv, Environment, UnicastEnv};

/// One row of the training-curve CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub episodes: usize,
    /// Mean unscaled reward per decision.
    pub mean_reward: f64,
    /// Mean per-sample loss over the epoch's updates; empty when none ran.
    pub mean_loss: Option<f64>,
    pub epsilon: f64,
    pub updates: u64,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<EpochRecord>,
}

/// Seed of the agent's network init, exploration and replay sampling.
pub fn agent_seed(train_seed: u64) -> u64 {
    train_seed ^ 0x5DEE_CE66_D1CE_4E5B
}

pub fn train_env(env: &mut dyn Environment, dqn: &DqnConfig, train: &TrainConfig) -> Result<TrainOutcome> {
    let mut agent = DqnAgent::new(env.observation_dim(), env.action_count(), dqn, agent_seed(train.seed))?;
    let anneal = (dqn.epsilon_anneal_fraction * train.episodes as f64).round() as usize;
    let per_epoch = train.episodes_per_epoch.max(1);
    let mut curve = Vec::new();
    let (mut reward_sum, mut decisions, mut loss_sum, mut losses) = (0.0, 0usize, 0.0, 0usize);
    for episode in 0..train.episodes {
        let epsilon = epsilon_schedule(dqn.epsilon_start, dqn.epsilon_end, anneal, episode);
        if episode > 0 {
            env.reset()?;
        }
        while !env.is_done() {
            let mut failure = None;
            let experiences = env.step(&mut |s| match agent.act(s, epsilon) {
                Ok(a) => a,
                Err(e) => {
                    failure.get_or_insert(e);
                    0
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            for mut e in experiences? {
                reward_sum += e.reward;
                decisions += 1;
                e.reward *= dqn.reward_scale;
                agent.remember(e)?;
            }
            for _ in 0..dqn.updates_per_slot {
                if let Some(l) = agent.learn()? {
                    loss_sum += l;
                    losses += 1;
                }
            }
        }
        if (episode + 1) % per_epoch == 0 || episode + 1 == train.episodes {
            let record = EpochRecord {
                epoch: curve.len(),
                episodes: episode + 1,
                mean_reward: if decisions > 0 { reward_sum / decisions as f64 } else { 0.0 },
                mean_loss: (losses > 0).then(|| loss_sum / losses as f64),
                epsilon,
                updates: agent.updates(),
            };
            info!(
                "epoch {} episodes {} reward {:.4} loss {:?} eps {:.3}",
                record.epoch, record.episodes, record.mean_reward, record.mean_loss, record.epsilon
            );
            curve.push(record);
            (reward_sum, decisions, loss_sum, losses) = (0.0, 0, 0.0, 0);
        }
    }
    Ok(TrainOutcome { checkpoint: agent.checkpoint(), curve })
}

/// Trains on the environment selected by `cfg.mode`.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Unicast => train_env(&mut UnicastEnv::new(cfg, cfg.train.seed)?, &cfg.dqn, &cfg.train),
        Mode::Broadcast => train_env(&mut BroadcastEnv::new(cfg, cfg.train.seed)?, &cfg.dqn, &cfg.train),
    }
}

pub fn write_curve(path: &Path, curve: &[EpochRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    crate::mdp::trace::write_rows(file, curve)
}

pub fn read_curve(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<EpochRecord>, _>>()?)
}

/// Writes `checkpoint.bin` and `training_curve.csv` into `dir`.
pub fn write_outputs(dir: &Path, outcome: &TrainOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    outcome.checkpoint.save(&dir.join("checkpoint.bin"))?;
    write_curve(&dir.join("training_curve.csv"), &outcome.curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::{argmax, value_iteration, FiniteMdp, FiniteMdpEnv, QNetwork};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_dqn() -> DqnConfig {
        DqnConfig { hidden_layers: vec![16], batch_size: 8, replay_capacity: 1000, ..DqnConfig::default() }
    }

    #[test]
    fn zero_episodes_returns_initialization() {
        let mut env = FiniteMdpEnv::new(FiniteMdp::four_state_line(), 10, 1);
        let train = TrainConfig { episodes: 0, ..TrainConfig::default() };
        let out = train_env(&mut env, &tiny_dqn(), &train).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(agent_seed(train.seed));
        let init = QNetwork::new(&[4, 16, 3], &mut rng).unwrap();
        assert_eq!(out.checkpoint.network, init);
        assert!(out.curve.is_empty());
    }

    #[test]
    fn tiny_mdp_greedy_policy_matches_value_iteration() {
        let mdp = FiniteMdp::four_state_line();
        let mut env = FiniteMdpEnv::new(mdp.clone(), 10, 2);
        let dqn = DqnConfig {
            discount: 0.5,
            reward_scale: 1.0,
            target_refresh_updates: 50,
            learning_rate: 0.005,
            ..tiny_dqn()
        };
        let train = TrainConfig { episodes: 400, episodes_per_epoch: 50, seed: 3 };
        let out = train_env(&mut env, &dqn, &train).unwrap();
        let q = value_iteration(&mdp, 0.5, 1e-12);
        for s in 0..4 {
            let x = env.one_hot(s);
            assert_eq!(out.checkpoint.network.greedy(&x).unwrap(), argmax(&q[s]), "state {s}");
        }
    }
}
