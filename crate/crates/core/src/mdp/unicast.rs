//! Unicast V2V: each link is an agent choosing a sub-band and a power level.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{slot_reward, Environment, OpenTransition, RewardTerms, RoundRobin};
use crate::channel::{
    capacity, cue_sinr, generate_topology, interference_at, vue_sinr, Allocation, ChannelRealization, ChannelState,
    LinkBudget, Topology,
};
use crate::config::{Mode, ObservationScaling, RunConfig};
use crate::dqn::Experience;
use crate::error::{Error, Result};
use crate::units::{linear_to_db, mw_to_dbm};

/// Raw local observation of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicastObservation {
    /// Interference power per sub-band at the receiver in the previous slot, mW.
    pub interference_prev_mw: Vec<f64>,
    /// Transmitter to base station gain per sub-band.
    pub bs_gain: Vec<f64>,
    /// How many neighboring links used each sub-band in the previous slot.
    pub neighbor_usage: Vec<u32>,
    pub time_left_s: f64,
    /// Own link gain per sub-band.
    pub link_gain: Vec<f64>,
    /// Fraction of the payload still to deliver.
    pub load_left: f64,
}

impl UnicastObservation {
    pub fn feature_dim(n_rb: usize) -> usize {
        4 * n_rb + 2
    }

    /// `[I, H, N, U, G, L]` after the configured standardization.
    pub fn features(&self, s: &ObservationScaling) -> Vec<f64> {
        let n = self.bs_gain.len();
        let mut f = Vec::with_capacity(Self::feature_dim(n));
        f.extend(
            self.interference_prev_mw
                .iter()
                .map(|&p| s.interference_dbm.apply(power_dbm_floored(p, s.power_floor_dbm))),
        );
        f.extend(self.bs_gain.iter().map(|&g| s.bs_gain_db.apply(linear_to_db(g))));
        f.extend(self.neighbor_usage.iter().map(|&c| s.neighbor_count.apply(c as f64)));
        f.push(s.time_left_s.apply(self.time_left_s));
        f.extend(self.link_gain.iter().map(|&g| s.link_gain_db.apply(linear_to_db(g))));
        f.push(s.load_fraction.apply(self.load_left));
        f
    }
}

pub(crate) fn power_dbm_floored(mw: f64, floor_dbm: f64) -> f64 {
    if mw > 0.0 {
        mw_to_dbm(mw).max(floor_dbm)
    } else {
        floor_dbm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnicastAction {
    pub sub_band: usize,
    pub power_index: usize,
}

impl UnicastAction {
    pub fn action_count(n_rb: usize, n_levels: usize) -> usize {
        n_rb * n_levels
    }

    pub fn from_id(id: usize, n_rb: usize, n_levels: usize) -> Result<Self> {
        let size = Self::action_count(n_rb, n_levels);
        if id >= size {
            return Err(Error::ActionOutOfRange { action: id, size });
        }
        Ok(Self { sub_band: id / n_levels, power_index: id % n_levels })
    }

    pub fn id(&self, n_levels: usize) -> usize {
        self.sub_band * n_levels + self.power_index
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSession {
    pub payload_bits: f64,
    pub remaining_bits: f64,
    pub delivered_bits: f64,
    /// Slots consumed since the session started.
    pub slots_used: usize,
    pub active: bool,
    pub completed: bool,
}

impl LinkSession {
    fn new(payload_bits: f64) -> Self {
        Self {
            payload_bits,
            remaining_bits: payload_bits,
            delivered_bits: 0.0,
            slots_used: 0,
            active: true,
            completed: false,
        }
    }

    pub fn load_left(&self) -> f64 {
        (self.remaining_bits / self.payload_bits).clamp(0.0, 1.0)
    }
}

/// Outcome of one unicast slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicastStep {
    /// Reward of every link that was active during the slot.
    pub rewards: Vec<Option<f64>>,
    pub terms: RewardTerms,
    pub cue_capacity_bps: Vec<f64>,
    pub vue_capacity_bps: Vec<f64>,
    /// Latency penalty `(T0 - U)` per active link, in reward time units.
    pub penalties: Vec<Option<f64>>,
    pub completed: Vec<usize>,
    pub done: bool,
}

pub struct UnicastEnv {
    cfg: RunConfig,
    topo_rng: ChaCha8Rng,
    chan_rng: ChaCha8Rng,
    topology: Topology,
    channel: ChannelState,
    realization: ChannelRealization,
    budget: LinkBudget,
    allocation: Allocation,
    actions: Vec<Option<UnicastAction>>,
    sessions: Vec<LinkSession>,
    prev_interference_mw: Vec<f64>,
    prev_band: Vec<Option<usize>>,
    neighbor_links: Vec<Vec<usize>>,
    scheduler: RoundRobin,
    open: Vec<Option<OpenTransition>>,
    slot: usize,
    episodes_started: usize,
}

impl UnicastEnv {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut topo_rng = ChaCha8Rng::seed_from_u64(seed);
        topo_rng.set_stream(0);
        let mut chan_rng = ChaCha8Rng::seed_from_u64(seed);
        chan_rng.set_stream(1);
        let topology = generate_topology(&cfg.scenario, cfg.n_vehicles, cfg.n_rb, Mode::Unicast, &mut topo_rng)?;
        let channel = ChannelState::new(&cfg.channel, &cfg.scenario, &topology, &mut chan_rng);
        let k = topology.v2v_links.len();
        let mut env = Self {
            cfg: cfg.clone(),
            topo_rng,
            chan_rng,
            realization: channel.unicast_realization(&topology.v2v_links),
            topology,
            channel,
            budget: LinkBudget::from_config(&cfg.channel),
            allocation: Allocation::silent(k),
            actions: vec![None; k],
            sessions: Vec::new(),
            prev_interference_mw: Vec::new(),
            prev_band: Vec::new(),
            neighbor_links: Vec::new(),
            scheduler: RoundRobin::default(),
            open: Vec::new(),
            slot: 0,
            episodes_started: 0,
        };
        env.reset_episode()?;
        Ok(env)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn realization(&self) -> &ChannelRealization {
        &self.realization
    }

    /// Replaces the current slot's channel draw; the next slot redraws as usual.
    pub fn set_realization(&mut self, real: ChannelRealization) {
        self.realization = real;
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn sessions(&self) -> &[LinkSession] {
        &self.sessions
    }

    pub fn link_count(&self) -> usize {
        self.topology.v2v_links.len()
    }

    pub fn n_rb(&self) -> usize {
        self.cfg.n_rb
    }

    pub fn power_levels(&self) -> &[f64] {
        &self.cfg.channel.unicast_power_levels_dbm
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn current_action(&self, k: usize) -> Option<UnicastAction> {
        self.actions[k]
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.cfg.slots_per_episode()
    }

    fn latency_budget(&self) -> f64 {
        self.cfg.unicast.latency_budget_s
    }

    pub fn time_left(&self, k: usize) -> f64 {
        let used = self.sessions[k].slots_used as f64 * self.cfg.channel.slot_duration_s;
        (self.latency_budget() - used).max(0.0)
    }

    /// Starts a new latency window with fresh payloads. The vehicle drop is
    /// redrawn every `topology_redraw_episodes` episodes.
    pub fn reset_episode(&mut self) -> Result<()> {
        let redraw = self.cfg.scenario.topology_redraw_episodes;
        if self.episodes_started > 0 && self.episodes_started % redraw == 0 {
            self.topology = generate_topology(
                &self.cfg.scenario,
                self.cfg.n_vehicles,
                self.cfg.n_rb,
                Mode::Unicast,
                &mut self.topo_rng,
            )?;
            self.channel = ChannelState::new(&self.cfg.channel, &self.cfg.scenario, &self.topology, &mut self.chan_rng);
            self.realization = self.channel.unicast_realization(&self.topology.v2v_links);
        }
        self.episodes_started += 1;
        let k = self.link_count();
        let n_rb = self.n_rb();
        self.allocation = Allocation::silent(k);
        self.actions = vec![None; k];
        self.sessions = vec![LinkSession::new(self.cfg.unicast.payload_bits); k];
        self.prev_interference_mw = vec![0.0; k * n_rb];
        self.prev_band = vec![None; k];
        self.neighbor_links = self.compute_neighbor_links();
        self.scheduler.reset();
        self.open = (0..k).map(|_| None).collect();
        self.slot = 0;
        Ok(())
    }

    /// Links transmitted by the same vehicle or by one of its nearest vehicles.
    fn compute_neighbor_links(&self) -> Vec<Vec<usize>> {
        let links = &self.topology.v2v_links;
        links
            .iter()
            .enumerate()
            .map(|(k, &(tx, _))| {
                let near = &self.topology.neighbors[tx];
                links
                    .iter()
                    .enumerate()
                    .filter(|&(j, &(tx_j, _))| j != k && (tx_j == tx || near.contains(&tx_j)))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }

    pub fn observe(&self, k: usize) -> Result<UnicastObservation> {
        if k >= self.link_count() || !self.sessions[k].active {
            return Err(Error::InactiveLink(k));
        }
        let n_rb = self.n_rb();
        let mut usage = vec![0u32; n_rb];
        for &j in &self.neighbor_links[k] {
            if let Some(b) = self.prev_band[j] {
                usage[b] += 1;
            }
        }
        Ok(UnicastObservation {
            interference_prev_mw: self.prev_interference_mw[k * n_rb..(k + 1) * n_rb].to_vec(),
            bs_gain: (0..n_rb).map(|b| self.realization.h_tilde(k, b)).collect(),
            neighbor_usage: usage,
            time_left_s: self.time_left(k),
            link_gain: (0..n_rb).map(|b| self.realization.vue_gain(k, k, b)).collect(),
            load_left: self.sessions[k].load_left(),
        })
    }

    /// Agents allowed to act this slot: every active link in the first slot,
    /// then a round-robin subset.
    pub fn update_set(&mut self) -> Vec<usize> {
        let active: Vec<bool> = self.sessions.iter().map(|s| s.active).collect();
        if self.slot == 0 {
            return (0..active.len()).filter(|&k| active[k]).collect();
        }
        self.scheduler.next(&active, self.cfg.unicast.update_set_size)
    }

    /// Applies the actions of the links in `updates` (the update set), keeps
    /// every other link's previous action, then resolves the slot and steps
    /// the channel.
    pub fn apply_actions(&mut self, updates: &[(usize, UnicastAction)]) -> Result<UnicastStep> {
        let n_rb = self.n_rb();
        let levels = self.power_levels().len();
        for &(k, a) in updates {
            if k >= self.link_count() || !self.sessions[k].active {
                return Err(Error::InactiveLink(k));
            }
            if a.sub_band >= n_rb || a.power_index >= levels {
                return Err(Error::ActionOutOfRange {
                    action: a.sub_band * levels + a.power_index,
                    size: UnicastAction::action_count(n_rb, levels),
                });
            }
        }
        for &(k, a) in updates {
            self.actions[k] = Some(a);
            let p = self.cfg.channel.unicast_power_levels_dbm[a.power_index];
            self.allocation.assign(k, a.sub_band, p);
        }

        let k_links = self.link_count();
        let bw = self.budget.bandwidth_hz;
        let cue_capacity_bps: Vec<f64> = (0..n_rb)
            .map(|m| capacity(cue_sinr(&self.realization, &self.allocation, &self.budget, m), bw))
            .collect();
        let mut vue_capacity_bps = vec![0.0; k_links];
        for k in 0..k_links {
            if self.sessions[k].active && self.allocation.band[k].is_some() {
                let s = vue_sinr(&self.realization, &self.allocation, &self.budget, k, k)?;
                vue_capacity_bps[k] = capacity(s, bw);
            }
        }
        let terms = RewardTerms {
            v2i_sum_bps: cue_capacity_bps.iter().sum(),
            v2v_sum_bps: vue_capacity_bps.iter().sum(),
        };

        let t0 = self.latency_budget();
        let mut rewards = vec![None; k_links];
        let mut penalties = vec![None; k_links];
        for k in 0..k_links {
            if self.sessions[k].active {
                let u = self.time_left(k);
                rewards[k] = Some(slot_reward(&self.cfg.reward, terms, t0, u));
                penalties[k] = Some(super::latency_penalty(&self.cfg.reward, t0, u));
            }
        }

        for k in 0..k_links {
            let n = self.n_rb();
            for b in 0..n {
                self.prev_interference_mw[k * n + b] =
                    interference_at(&self.realization, &self.allocation, &self.budget, k, b, Some(k));
            }
        }
        self.prev_band.clone_from(&self.allocation.band);

        let dt = self.cfg.channel.slot_duration_s;
        let mut completed = Vec::new();
        for k in 0..k_links {
            if !self.sessions[k].active {
                continue;
            }
            let session = &mut self.sessions[k];
            let sent = (vue_capacity_bps[k] * dt).min(session.remaining_bits);
            session.delivered_bits += sent;
            session.remaining_bits -= sent;
            session.slots_used += 1;
            if session.remaining_bits <= 0.0 {
                session.remaining_bits = 0.0;
                session.completed = true;
                session.active = false;
                completed.push(k);
            } else if self.time_left(k) <= 0.0 {
                self.sessions[k].active = false;
            }
            if !self.sessions[k].active {
                self.allocation.clear(k);
            }
        }

        self.slot += 1;
        self.channel.step(&mut self.topology, dt, &mut self.chan_rng);
        self.realization = self.channel.unicast_realization(&self.topology.v2v_links);

        Ok(UnicastStep {
            rewards,
            terms,
            cue_capacity_bps,
            vue_capacity_bps,
            penalties,
            completed,
            done: self.is_done(),
        })
    }

    /// Fraction of links that delivered their payload within the window.
    pub fn satisfied_fraction(&self) -> f64 {
        let n = self.sessions.len();
        self.sessions.iter().filter(|s| s.completed).count() as f64 / n as f64
    }
}

impl Environment for UnicastEnv {
    fn observation_dim(&self) -> usize {
        UnicastObservation::feature_dim(self.n_rb())
    }

    fn action_count(&self) -> usize {
        UnicastAction::action_count(self.n_rb(), self.power_levels().len())
    }

    fn reset(&mut self) -> Result<()> {
        self.reset_episode()
    }

    fn is_done(&self) -> bool {
        UnicastEnv::is_done(self)
    }

    /// A link's transition runs from one of its decisions to its next one,
    /// accumulating the discounted slot rewards in between; it closes without
    /// a post-state when the session or the episode ends.
    fn step(&mut self, choose: &mut dyn FnMut(&[f64]) -> usize) -> Result<Vec<Experience>> {
        let levels = self.power_levels().len();
        let n_rb = self.n_rb();
        let beta = self.cfg.dqn.discount;
        let scaling = self.cfg.observation.clone();
        let mut experiences = Vec::new();
        let mut updates = Vec::new();
        for k in self.update_set() {
            let state = self.observe(k)?.features(&scaling);
            let id = choose(&state);
            let action = UnicastAction::from_id(id, n_rb, levels)?;
            if let Some(t) = self.open[k].take() {
                experiences.push(t.close(Some(state.clone())));
            }
            self.open[k] = Some(OpenTransition::new(state, id));
            updates.push((k, action));
        }
        let out = self.apply_actions(&updates)?;
        let done = self.is_done();
        for k in 0..self.link_count() {
            let Some(t) = self.open[k].as_mut() else { continue };
            t.accrue(out.rewards[k].expect("link with an open decision was active"), beta);
            if done || !self.sessions[k].active {
                experiences.push(self.open[k].take().expect("checked above").close(None));
            }
        }
        Ok(experiences)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(seed: u64) -> UnicastEnv {
        let mut cfg = RunConfig::default();
        cfg.n_vehicles = 6;
        UnicastEnv::new(&cfg, seed).unwrap()
    }

    #[test]
    fn action_ids_are_bijective() {
        for id in 0..12 {
            let a = UnicastAction::from_id(id, 4, 3).unwrap();
            assert_eq!(a.id(3), id);
        }
        assert!(UnicastAction::from_id(12, 4, 3).is_err());
    }

    #[test]
    fn first_slot_observation_has_no_history() {
        let e = env(1);
        let o = e.observe(0).unwrap();
        assert!(o.interference_prev_mw.iter().all(|&x| x == 0.0));
        assert!(o.neighbor_usage.iter().all(|&x| x == 0));
        assert_eq!(o.load_left, 1.0);
        assert_eq!(o.time_left_s, 0.1);
        assert_eq!(o.features(&ObservationScaling::default()).len(), 18);
    }

    #[test]
    fn neighbor_usage_counts_previous_bands() {
        let mut e = env(2);
        let set = e.update_set();
        let ups: Vec<_> = set.iter().map(|&k| (k, UnicastAction { sub_band: 2, power_index: 0 })).collect();
        e.apply_actions(&ups).unwrap();
        let k = (0..e.link_count()).find(|&k| e.sessions[k].active).unwrap();
        let o = e.observe(k).unwrap();
        let expected = e.neighbor_links[k].iter().filter(|&&j| e.prev_band[j] == Some(2)).count() as u32;
        assert_eq!(o.neighbor_usage[2], expected);
        assert!(expected >= 2);
    }

    #[test]
    fn empty_update_set_keeps_allocation() {
        let mut e = env(3);
        let set = e.update_set();
        let ups: Vec<_> = set.iter().map(|&k| (k, UnicastAction { sub_band: k % 4, power_index: 1 })).collect();
        e.apply_actions(&ups).unwrap();
        let before: Vec<_> = (0..e.link_count()).filter(|&k| e.sessions[k].active).map(|k| e.actions[k]).collect();
        e.apply_actions(&[]).unwrap();
        let after: Vec<_> = (0..e.link_count()).filter(|&k| e.sessions[k].active).map(|k| e.actions[k]).collect();
        assert_eq!(&before[..after.len()], &after[..]);
    }

    #[test]
    fn inactive_link_and_bad_action_are_rejected() {
        let mut e = env(4);
        let bad = UnicastAction { sub_band: 4, power_index: 0 };
        assert!(matches!(e.apply_actions(&[(0, bad)]), Err(Error::ActionOutOfRange { .. })));
        e.sessions[0].active = false;
        assert!(matches!(e.observe(0), Err(Error::InactiveLink(0))));
    }

    #[test]
    fn accounting_and_time_are_consistent_over_an_episode() {
        let mut e = env(5);
        let mut prev_used = vec![0usize; e.link_count()];
        while !e.is_done() {
            let set = e.update_set();
            let ups: Vec<_> = set
                .iter()
                .map(|&k| (k, UnicastAction { sub_band: (k + e.slot()) % 4, power_index: k % 3 }))
                .collect();
            let step = e.apply_actions(&ups).unwrap();
            if e.slot() == 1 {
                assert!(step.penalties.iter().flatten().all(|&p| p == 0.0));
            }
            for (k, s) in e.sessions.iter().enumerate() {
                let total = s.delivered_bits + s.remaining_bits;
                assert!((total - s.payload_bits).abs() <= 1e-9 * s.payload_bits);
                assert!(s.slots_used >= prev_used[k]);
                prev_used[k] = s.slots_used;
                let u = e.time_left(k);
                assert!((0.0..=0.1).contains(&u));
            }
        }
        assert_eq!(e.slot(), 100);
    }

    #[test]
    fn transitions_span_decision_to_decision() {
        let mut e = env(9);
        let mut decisions = 0;
        let mut exps = Vec::new();
        while !Environment::is_done(&e) {
            let mut choose = |_: &[f64]| {
                decisions += 1;
                11
            };
            exps.extend(Environment::step(&mut e, &mut choose).unwrap());
        }
        assert_eq!(exps.len(), decisions);
        let terminal = exps.iter().filter(|x| x.is_terminal()).count();
        assert_eq!(terminal, e.link_count());
        let spans: usize = exps.iter().map(|x| x.span as usize).sum();
        let used: usize = e.sessions().iter().map(|s| s.slots_used).sum();
        assert_eq!(spans, used);
    }
}
