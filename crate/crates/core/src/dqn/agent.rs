//! Q-network agent with a periodically refreshed target network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{epsilon_greedy, td_target, AdamState, Checkpoint, Experience, QNetwork, ReplayMemory, Sample};
use crate::config::DqnConfig;
use crate::error::{Error, Result};

pub struct DqnAgent {
    cfg: DqnConfig,
    online: QNetwork,
    target: QNetwork,
    adam: AdamState,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    updates: u64,
}

impl DqnAgent {
    pub fn new(input_dim: usize, action_count: usize, cfg: &DqnConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![input_dim];
        widths.extend(&cfg.hidden_layers);
        widths.push(action_count);
        let online = QNetwork::new(&widths, &mut rng)?;
        Ok(Self {
            cfg: cfg.clone(),
            target: online.clone(),
            adam: AdamState::new(online.params().len(), cfg),
            online,
            memory: ReplayMemory::new(cfg.replay_capacity)?,
            rng,
            updates: 0,
        })
    }

    pub fn network(&self) -> &QNetwork {
        &self.online
    }

    pub fn target_network(&self) -> &QNetwork {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { network: self.online.clone(), adam: self.adam.clone() }
    }

    pub fn act(&mut self, state: &[f64], epsilon: f64) -> Result<usize> {
        epsilon_greedy(&self.online, state, epsilon, &mut self.rng)
    }

    pub fn remember(&mut self, e: Experience) -> Result<()> {
        if !e.is_finite() {
            return Err(Error::InvalidArgument("non-finite experience".into()));
        }
        self.memory.push(e);
        Ok(())
    }

    /// One mini-batch update. Returns `None` until the memory holds a batch.
    pub fn learn(&mut self) -> Result<Option<f64>> {
        let n = self.cfg.batch_size;
        if self.memory.len() < n || n == 0 {
            return Ok(None);
        }
        let batch = self.memory.sample(n, &mut self.rng)?;
        let targets = batch
            .iter()
            .map(|e| td_target(&self.target, e, self.cfg.discount))
            .collect::<Result<Vec<_>>>()?;
        let samples: Vec<Sample<'_>> = batch
            .iter()
            .zip(&targets)
            .map(|(e, &y)| Sample { state: &e.state, action: e.action, target: y })
            .collect();
        let (loss, grad) = self.online.loss_and_gradient(&samples)?;
        self.updates += 1;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { update: self.updates, loss });
        }
        self.adam.step(self.online.params_mut(), &grad)?;
        let refresh = self.cfg.target_refresh_updates.max(1);
        if self.updates % refresh == 0 {
            self.target = self.online.clone();
        }
        Ok(Some(loss / n as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> DqnConfig {
        DqnConfig { hidden_layers: vec![8], batch_size: 4, target_refresh_updates: 3, ..DqnConfig::default() }
    }

    #[test]
    fn waits_for_a_full_batch() {
        let mut a = DqnAgent::new(2, 3, &small_cfg(), 1).unwrap();
        for i in 0..3 {
            a.remember(Experience::new(vec![i as f64, 1.0], i, 1.0, None)).unwrap();
        }
        assert_eq!(a.learn().unwrap(), None);
        a.remember(Experience::new(vec![0.0, 0.0], 0, 1.0, None)).unwrap();
        assert!(a.learn().unwrap().is_some());
        assert_eq!(a.updates(), 1);
    }

    #[test]
    fn target_refreshes_on_cadence() {
        let mut a = DqnAgent::new(2, 3, &small_cfg(), 2).unwrap();
        for i in 0..8 {
            a.remember(Experience::new(vec![i as f64, 1.0], i % 3, 1.0, Some(vec![0.0, 1.0]))).unwrap();
        }
        let initial = a.target_network().clone();
        a.learn().unwrap();
        a.learn().unwrap();
        assert_eq!(a.target_network(), &initial);
        a.learn().unwrap();
        assert_eq!(a.target_network(), a.network());
    }

    #[test]
    fn rejects_non_finite_experience() {
        let mut a = DqnAgent::new(1, 2, &small_cfg(), 3).unwrap();
        assert!(a.remember(Experience::new(vec![f64::NAN], 0, 0.0, None)).is_err());
    }

    #[test]
    fn huge_rewards_trip_divergence_guard() {
        let cfg = DqnConfig { learning_rate: 1e300, lr_decay: 1.0, ..small_cfg() };
        let mut a = DqnAgent::new(1, 2, &cfg, 4).unwrap();
        for i in 0..4 {
            a.remember(Experience::new(vec![1.0], i % 2, 1e200, None)).unwrap();
        }
        let mut err = None;
        for _ in 0..10 {
            if let Err(e) = a.learn() {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(Error::Diverged { .. })));
    }
}
