//! Multi-agent MDP wrappers around the channel model.

pub mod broadcast;
pub mod trace;
pub mod unicast;

use crate::config::RewardConfig;
use crate::dqn::Experience;
use crate::error::Result;

pub use broadcast::{BroadcastAction, BroadcastEnv, BroadcastObservation, BroadcastStep, MessageState};
pub use unicast::{LinkSession, UnicastAction, UnicastEnv, UnicastObservation, UnicastStep};

/// Feature-level view of an environment used by the learner. One call to
/// [`Environment::step`] advances one slot; `choose` is invoked once per
/// decision in that slot with the decision's feature vector.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    fn reset(&mut self) -> Result<()>;
    fn is_done(&self) -> bool;
    fn step(&mut self, choose: &mut dyn FnMut(&[f64]) -> usize) -> Result<Vec<Experience>>;
}

/// The three reward components of one slot, before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardTerms {
    /// Sum V2I capacity, bits/s.
    pub v2i_sum_bps: f64,
    /// Sum V2V capacity entering the reward, bits/s.
    pub v2v_sum_bps: f64,
}

/// `lambda_c C_v2i + lambda_d C_v2v - lambda_p (T0 - U)`, with capacities in
/// `capacity_unit_bps` and time in `time_unit_s`.
pub fn slot_reward(w: &RewardConfig, terms: RewardTerms, latency_budget_s: f64, time_left_s: f64) -> f64 {
    capacity_reward(w, terms) - w.lambda_p * latency_penalty(w, latency_budget_s, time_left_s)
}

/// `lambda_c C_v2i + lambda_d C_v2v` in reward units.
pub fn capacity_reward(w: &RewardConfig, terms: RewardTerms) -> f64 {
    w.lambda_c * (terms.v2i_sum_bps / w.capacity_unit_bps) + w.lambda_d * (terms.v2v_sum_bps / w.capacity_unit_bps)
}

/// `(T0 - U)` in reward time units.
pub fn latency_penalty(w: &RewardConfig, latency_budget_s: f64, time_left_s: f64) -> f64 {
    (latency_budget_s - time_left_s) / w.time_unit_s
}

/// Finite-horizon `sum_n beta^n r_n`.
pub fn discounted_return(rewards: &[f64], beta: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, &r| r + beta * acc)
}

/// A decision awaiting the agent's next decision or the end of its task,
/// collecting the discounted per-slot rewards in between.
pub(crate) struct OpenTransition {
    state: Vec<f64>,
    action: usize,
    reward: f64,
    span: u32,
}

impl OpenTransition {
    pub(crate) fn new(state: Vec<f64>, action: usize) -> Self {
        Self { state, action, reward: 0.0, span: 0 }
    }

    pub(crate) fn accrue(&mut self, slot_reward: f64, beta: f64) {
        self.reward += beta.powi(self.span as i32) * slot_reward;
        self.span += 1;
    }

    pub(crate) fn close(self, post_state: Option<Vec<f64>>) -> Experience {
        Experience::new(self.state, self.action, self.reward, post_state).with_span(self.span)
    }
}

/// Cycles through agents, handing out up to `size` active ones per call.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    cursor: usize,
}

impl RoundRobin {
    pub fn reset(&mut self) {
        self.cursor = 0;
    }

    pub fn next(&mut self, active: &[bool], size: usize) -> Vec<usize> {
        let n = active.len();
        let mut out = Vec::with_capacity(size);
        let mut scanned = 0;
        while out.len() < size && scanned < n {
            let i = self.cursor % n;
            self.cursor = (self.cursor + 1) % n;
            scanned += 1;
            if active[i] {
                out.push(i);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.0), 1.0);
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 1.0), 3.0);
        assert_eq!(discounted_return(&[2.0, 4.0], 0.5), 4.0);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
    }

    #[test]
    fn first_slot_has_no_penalty() {
        let w = RewardConfig::default();
        let terms = RewardTerms { v2i_sum_bps: 2e6, v2v_sum_bps: 1e6 };
        assert!((slot_reward(&w, terms, 0.1, 0.1) - (0.1 * 2.0 + 0.9 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn reward_terms_isolate() {
        let terms = RewardTerms { v2i_sum_bps: 3.5e6, v2v_sum_bps: 7.25e6 };
        let only_c = RewardConfig { lambda_d: 0.0, lambda_p: 0.0, ..RewardConfig::default() };
        assert_eq!(slot_reward(&only_c, terms, 0.1, 0.04), 0.1 * 3.5);
        let only_d = RewardConfig { lambda_c: 0.0, lambda_p: 0.0, ..RewardConfig::default() };
        assert_eq!(slot_reward(&only_d, terms, 0.1, 0.04), 0.9 * 7.25);
        let only_p = RewardConfig { lambda_c: 0.0, lambda_d: 0.0, time_unit_s: 1e-3, ..RewardConfig::default() };
        assert!((slot_reward(&only_p, terms, 0.1, 0.04) + 60.0).abs() < 1e-9);
    }

    #[test]
    fn round_robin_skips_inactive_and_wraps() {
        let mut rr = RoundRobin::default();
        let active = [true, false, true, true];
        assert_eq!(rr.next(&active, 2), vec![0, 2]);
        assert_eq!(rr.next(&active, 2), vec![3, 0]);
        assert_eq!(rr.next(&[false; 4], 2), Vec::<usize>::new());
    }
}
