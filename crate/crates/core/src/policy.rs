//! Decision interfaces shared by the learned agent and the baselines.

use crate::config::ObservationScaling;
use crate::dqn::QNetwork;
use crate::error::{Error, Result};
use crate::mdp::{BroadcastAction, BroadcastEnv, UnicastAction, UnicastEnv};

pub trait UnicastPolicy {
    fn begin_episode(&mut self, _env: &UnicastEnv) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, env: &UnicastEnv, link: usize) -> Result<UnicastAction>;
}

pub trait BroadcastPolicy {
    fn begin_episode(&mut self, _env: &BroadcastEnv) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, env: &BroadcastEnv, vehicle: usize, message: usize) -> Result<BroadcastAction>;
}

/// Greedy action of a trained Q-network.
#[derive(Debug, Clone)]
pub struct GreedyQ {
    pub network: QNetwork,
    pub scaling: ObservationScaling,
}

impl GreedyQ {
    fn check(&self, inputs: usize, actions: usize) -> Result<()> {
        if self.network.input_dim() != inputs {
            return Err(Error::DimensionMismatch { expected: inputs, got: self.network.input_dim() });
        }
        if self.network.output_dim() != actions {
            return Err(Error::DimensionMismatch { expected: actions, got: self.network.output_dim() });
        }
        Ok(())
    }
}

impl UnicastPolicy for GreedyQ {
    fn begin_episode(&mut self, env: &UnicastEnv) -> Result<()> {
        use crate::mdp::Environment;
        self.check(env.observation_dim(), env.action_count())
    }

    fn act(&mut self, env: &UnicastEnv, link: usize) -> Result<UnicastAction> {
        let x = env.observe(link)?.features(&self.scaling);
        UnicastAction::from_id(self.network.greedy(&x)?, env.n_rb(), env.power_levels().len())
    }
}

impl BroadcastPolicy for GreedyQ {
    fn begin_episode(&mut self, env: &BroadcastEnv) -> Result<()> {
        use crate::mdp::Environment;
        self.check(env.observation_dim(), env.action_count())
    }

    fn act(&mut self, env: &BroadcastEnv, vehicle: usize, message: usize) -> Result<BroadcastAction> {
        let x = env.observe(vehicle, message)?.features(&self.scaling);
        BroadcastAction::from_id(self.network.greedy(&x)?, env.n_rb())
    }
}
