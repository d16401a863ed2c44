//! Deep Q-learning: network, optimizer, replay memory and agent.

pub mod adam;
pub mod agent;
pub mod checkpoint;
pub mod network;
pub mod replay;
pub mod tabular;

use rand::Rng;

pub use adam::AdamState;
pub use agent::DqnAgent;
pub use checkpoint::Checkpoint;
pub use network::{argmax, QNetwork, Sample};
pub use replay::ReplayMemory;
pub use tabular::{tabular_q_learning, value_iteration, FiniteMdp, FiniteMdpEnv};

use crate::error::Result;

/// `{state, action, reward, post-state}`; no post-state marks a terminal step.
/// `span` is the number of slots between `state` and `post_state`; `reward`
/// is then the discounted sum over those slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub post_state: Option<Vec<f64>>,
    pub span: u32,
}

impl Experience {
    pub fn new(state: Vec<f64>, action: usize, reward: f64, post_state: Option<Vec<f64>>) -> Self {
        Self { state, action, reward, post_state, span: 1 }
    }

    pub fn with_span(mut self, span: u32) -> Self {
        self.span = span.max(1);
        self
    }

    pub fn is_terminal(&self) -> bool {
        self.post_state.is_none()
    }

    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self.state.iter().all(|x| x.is_finite())
            && self.post_state.iter().flatten().all(|x| x.is_finite())
    }
}

/// `r + beta^span * max_a Q_old(s', a)`, or `r` at a terminal step.
pub fn td_target(old: &QNetwork, e: &Experience, beta: f64) -> Result<f64> {
    match &e.post_state {
        None => Ok(e.reward),
        Some(s) if beta == 0.0 => {
            old.forward(s)?;
            Ok(e.reward)
        }
        Some(s) => {
            let q = old.forward(s)?;
            let max_q = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(e.reward + beta.powi(e.span as i32) * max_q)
        }
    }
}

/// Uniform action with probability `epsilon`, else greedy.
pub fn epsilon_greedy<R: Rng + ?Sized>(net: &QNetwork, state: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if rng.random::<f64>() < epsilon {
        net.forward(state)?;
        Ok(rng.random_range(0..net.output_dim()))
    } else {
        net.greedy(state)
    }
}

/// Linear anneal from `start` to `end` over `anneal` episodes, then flat.
pub fn epsilon_schedule(start: f64, end: f64, anneal: usize, episode: usize) -> f64 {
    if anneal == 0 || episode >= anneal {
        end
    } else {
        start + (end - start) * episode as f64 / anneal as f64
    }
}
