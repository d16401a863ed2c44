//! Small deterministic MDPs with exact solutions, used to check the learners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax, Experience};
use crate::error::{Error, Result};
use crate::mdp::Environment;

/// Deterministic finite MDP. `next[s][a] == None` ends the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    pub next: Vec<Vec<Option<usize>>>,
    pub reward: Vec<Vec<f64>>,
}

impl FiniteMdp {
    pub fn n_states(&self) -> usize {
        self.next.len()
    }

    pub fn n_actions(&self) -> usize {
        self.next[0].len()
    }

    /// Two states; action 1 moves forward, and forward from state 1 reaches
    /// the goal with reward 1.
    pub fn two_state_chain() -> Self {
        Self {
            next: vec![vec![Some(0), Some(1)], vec![Some(1), None]],
            reward: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
        }
    }

    /// Four states in a line with actions left, stay, right. Right from the
    /// last state exits with reward 1; left from the first exits with 0.2.
    pub fn four_state_line() -> Self {
        let n = 4;
        let mut next = Vec::new();
        let mut reward = Vec::new();
        for s in 0..n {
            let left = if s == 0 { None } else { Some(s - 1) };
            let right = if s + 1 == n { None } else { Some(s + 1) };
            next.push(vec![left, Some(s), right]);
            reward.push(vec![if s == 0 { 0.2 } else { 0.0 }, 0.0, if s + 1 == n { 1.0 } else { 0.0 }]);
        }
        Self { next, reward }
    }

    fn backup(&self, q: &[Vec<f64>], s: usize, a: usize, beta: f64) -> f64 {
        let future = self.next[s][a].map_or(0.0, |t| q[t].iter().copied().fold(f64::NEG_INFINITY, f64::max));
        self.reward[s][a] + beta * future
    }

    /// Value of following `policy` from each state.
    pub fn policy_value(&self, policy: &[usize], beta: f64, tol: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states()];
        loop {
            let mut delta: f64 = 0.0;
            for s in 0..self.n_states() {
                let a = policy[s];
                let nv = self.reward[s][a] + beta * self.next[s][a].map_or(0.0, |t| v[t]);
                delta = delta.max((nv - v[s]).abs());
                v[s] = nv;
            }
            if delta < tol {
                return v;
            }
        }
    }
}

/// Optimal Q-table by value iteration, to `tol` in the sup norm.
pub fn value_iteration(mdp: &FiniteMdp, beta: f64, tol: f64) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; mdp.n_actions()]; mdp.n_states()];
    loop {
        let mut delta: f64 = 0.0;
        let prev = q.clone();
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                q[s][a] = mdp.backup(&prev, s, a, beta);
                delta = delta.max((q[s][a] - prev[s][a]).abs());
            }
        }
        if delta < tol {
            return q;
        }
    }
}

/// Classic Q-learning with step size `alpha` under a uniform random
/// behavior policy, starting each episode from a uniform state.
pub fn tabular_q_learning<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    alpha: f64,
    beta: f64,
    episodes: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; mdp.n_actions()]; mdp.n_states()];
    for _ in 0..episodes {
        let mut s = rng.random_range(0..mdp.n_states());
        for _ in 0..horizon {
            let a = rng.random_range(0..mdp.n_actions());
            let target = mdp.backup(&q, s, a, beta);
            q[s][a] += alpha * (target - q[s][a]);
            match mdp.next[s][a] {
                Some(t) => s = t,
                None => break,
            }
        }
    }
    q
}

pub fn greedy_policy(q: &[Vec<f64>]) -> Vec<usize> {
    q.iter().map(|row| argmax(row)).collect()
}

/// A [`FiniteMdp`] behind the [`Environment`] interface, with one-hot states.
/// Episodes start from a uniform state and are cut after `horizon` steps
/// without marking the last step terminal.
pub struct FiniteMdpEnv {
    mdp: FiniteMdp,
    horizon: usize,
    rng: ChaCha8Rng,
    state: Option<usize>,
    steps: usize,
}

impl FiniteMdpEnv {
    pub fn new(mdp: FiniteMdp, horizon: usize, seed: u64) -> Self {
        let mut env = Self { mdp, horizon, rng: ChaCha8Rng::seed_from_u64(seed), state: None, steps: 0 };
        env.start();
        env
    }

    fn start(&mut self) {
        self.state = Some(self.rng.random_range(0..self.mdp.n_states()));
        self.steps = 0;
    }

    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.mdp.n_states()];
        v[s] = 1.0;
        v
    }
}

impl Environment for FiniteMdpEnv {
    fn observation_dim(&self) -> usize {
        self.mdp.n_states()
    }

    fn action_count(&self) -> usize {
        self.mdp.n_actions()
    }

    fn reset(&mut self) -> Result<()> {
        self.start();
        Ok(())
    }

    fn is_done(&self) -> bool {
        self.state.is_none() || self.steps >= self.horizon
    }

    fn step(&mut self, choose: &mut dyn FnMut(&[f64]) -> usize) -> Result<Vec<Experience>> {
        let s = self.state.ok_or_else(|| Error::InvalidArgument("episode is over".into()))?;
        let x = self.one_hot(s);
        let a = choose(&x);
        if a >= self.mdp.n_actions() {
            return Err(Error::ActionOutOfRange { action: a, size: self.mdp.n_actions() });
        }
        self.steps += 1;
        self.state = self.mdp.next[s][a];
        let post = self.state.map(|t| self.one_hot(t));
        Ok(vec![Experience::new(x, a, self.mdp.reward[s][a], post)])
    }
}
