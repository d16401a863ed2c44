//! Broadcast V2V: each vehicle is an agent deciding, per held message,
//! whether to (re)broadcast it now and on which sub-band.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::unicast::power_dbm_floored;
use std::collections::BTreeMap;

use super::{capacity_reward, latency_penalty, Environment, OpenTransition, RewardTerms, RoundRobin};
use crate::channel::{
    capacity, cue_sinr, generate_topology, interference_at, vue_sinr, Allocation, ChannelRealization, ChannelState,
    LinkBudget, Point, Topology,
};
use crate::config::{Mode, ObservationScaling, RunConfig};
use crate::dqn::Experience;
use crate::error::{Error, Result};
use crate::units::{db_to_linear, linear_to_db};

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastObservation {
    pub interference_prev_mw: Vec<f64>,
    pub bs_gain: Vec<f64>,
    pub neighbor_usage: Vec<u32>,
    pub time_left_s: f64,
    /// Times this vehicle has received the message.
    pub receive_count: u32,
    /// Distance to the nearest vehicle that already broadcast the message,
    /// or the configured sentinel when there is none.
    pub nearest_broadcaster_m: f64,
}

impl BroadcastObservation {
    pub fn feature_dim(n_rb: usize) -> usize {
        3 * n_rb + 3
    }

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
        f.push(s.receive_count.apply(self.receive_count as f64));
        f.push(s.distance_m.apply(self.nearest_broadcaster_m));
        f
    }
}

/// `Transmit(b)` broadcasts on sub-band `b`; `Hold` defers the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BroadcastAction {
    Transmit(usize),
    Hold,
}

impl BroadcastAction {
    pub fn action_count(n_rb: usize) -> usize {
        n_rb + 1
    }

    pub fn from_id(id: usize, n_rb: usize) -> Result<Self> {
        match id {
            b if b < n_rb => Ok(Self::Transmit(b)),
            b if b == n_rb => Ok(Self::Hold),
            _ => Err(Error::ActionOutOfRange { action: id, size: n_rb + 1 }),
        }
    }

    pub fn id(&self, n_rb: usize) -> usize {
        match *self {
            Self::Transmit(b) => b,
            Self::Hold => n_rb,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub id: usize,
    pub origin: usize,
    /// Sorted receiver set fixed when the message is created.
    pub targets: Vec<usize>,
    /// `received[j]`: target `j` holds the message (the E{k} set).
    pub received: Vec<bool>,
    pub receive_count: Vec<u32>,
    /// Vehicles that hold the message, the origin included.
    pub holders: Vec<bool>,
    pub broadcasters: Vec<usize>,
    pub broadcaster_positions: Vec<Point>,
    pub slots_used: usize,
    pub completed_slot: Option<usize>,
}

impl MessageState {
    fn new(id: usize, origin: usize, targets: Vec<usize>, n: usize) -> Self {
        let mut holders = vec![false; n];
        holders[origin] = true;
        Self {
            id,
            origin,
            targets,
            received: vec![false; n],
            receive_count: vec![0; n],
            holders,
            broadcasters: Vec::new(),
            broadcaster_positions: Vec::new(),
            slots_used: 0,
            completed_slot: None,
        }
    }

    pub fn received_count(&self) -> usize {
        self.targets.iter().filter(|&&j| self.received[j]).count()
    }

    pub fn is_complete(&self) -> bool {
        self.targets.iter().all(|&j| self.received[j])
    }

    pub fn is_target(&self, j: usize) -> bool {
        self.targets.binary_search(&j).is_ok()
    }
}

/// Capacity from transmitter `tx` summed over the targets of `msg` that do
/// not hold it yet; zero once every target is in E{k}.
pub fn unreached_capacity_bps(
    real: &ChannelRealization,
    alloc: &Allocation,
    budget: &LinkBudget,
    msg: &MessageState,
    tx: usize,
) -> Result<f64> {
    let mut sum = 0.0;
    for &j in &msg.targets {
        if j != tx && !msg.received[j] {
            sum += capacity(vue_sinr(real, alloc, budget, tx, j)?, budget.bandwidth_hz);
        }
    }
    Ok(sum)
}

/// One decision of a vehicle about one held message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BroadcastDecision {
    pub vehicle: usize,
    pub message: usize,
    pub action: BroadcastAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastStep {
    /// Reward of each decision, in input order.
    pub rewards: Vec<f64>,
    pub terms: RewardTerms,
    pub cue_capacity_bps: Vec<f64>,
    /// `(vehicle, message, sub_band)` of every broadcast in the slot.
    pub transmissions: Vec<(usize, usize, usize)>,
    /// `(message, receiver)` for every successful reception.
    pub receptions: Vec<(usize, usize)>,
    pub completed: Vec<usize>,
    pub done: bool,
}

/// Fraction of messages with at least one target that reached all targets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisseminationStats {
    pub messages: usize,
    pub delivered: usize,
}

impl DisseminationStats {
    pub fn success_probability(&self) -> f64 {
        if self.messages == 0 {
            0.0
        } else {
            self.delivered as f64 / self.messages as f64
        }
    }
}

pub struct BroadcastEnv {
    cfg: RunConfig,
    topo_rng: ChaCha8Rng,
    chan_rng: ChaCha8Rng,
    topology: Topology,
    channel: ChannelState,
    realization: ChannelRealization,
    budget: LinkBudget,
    threshold: f64,
    messages: Vec<MessageState>,
    /// Per vehicle, held messages still awaiting a broadcast decision, in arrival order.
    queues: Vec<Vec<usize>>,
    prev_interference_mw: Vec<f64>,
    prev_band: Vec<Option<usize>>,
    scheduler: RoundRobin,
    /// Pending decisions keyed by (vehicle, message).
    open: BTreeMap<(usize, usize), OpenTransition>,
    slot: usize,
    episodes_started: usize,
}

impl BroadcastEnv {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut topo_rng = ChaCha8Rng::seed_from_u64(seed);
        topo_rng.set_stream(0);
        let mut chan_rng = ChaCha8Rng::seed_from_u64(seed);
        chan_rng.set_stream(1);
        let topology = generate_topology(&cfg.scenario, cfg.n_vehicles, cfg.n_rb, Mode::Broadcast, &mut topo_rng)?;
        let channel = ChannelState::new(&cfg.channel, &cfg.scenario, &topology, &mut chan_rng);
        let mut env = Self {
            cfg: cfg.clone(),
            topo_rng,
            chan_rng,
            realization: channel.broadcast_realization(),
            topology,
            channel,
            budget: LinkBudget::from_config(&cfg.channel),
            threshold: db_to_linear(cfg.channel.sinr_threshold_db),
            messages: Vec::new(),
            queues: Vec::new(),
            prev_interference_mw: Vec::new(),
            prev_band: Vec::new(),
            scheduler: RoundRobin::default(),
            open: BTreeMap::new(),
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

    /// Replaces the current gain table, e.g. with tabulated test gains.
    pub fn set_realization(&mut self, real: ChannelRealization) {
        self.realization = real;
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn messages(&self) -> &[MessageState] {
        &self.messages
    }

    pub fn n_rb(&self) -> usize {
        self.cfg.n_rb
    }

    pub fn n_vehicles(&self) -> usize {
        self.topology.n_vehicles()
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.cfg.slots_per_episode()
    }

    /// Messages `vehicle` still has to decide on, in arrival order.
    pub fn pending(&self, vehicle: usize) -> &[usize] {
        &self.queues[vehicle]
    }

    /// Shared capacity reward, less the latency penalty while `message` is
    /// still incomplete.
    fn message_reward(&self, shared: f64, message: usize) -> f64 {
        let w = &self.cfg.reward;
        if self.messages[message].completed_slot.is_some() {
            shared
        } else {
            shared - w.lambda_p * latency_penalty(w, self.cfg.broadcast.latency_budget_s, self.time_left(message))
        }
    }

    pub fn time_left(&self, message: usize) -> f64 {
        let used = self.messages[message].slots_used as f64 * self.cfg.channel.slot_duration_s;
        (self.cfg.broadcast.latency_budget_s - used).max(0.0)
    }

    pub fn reset_episode(&mut self) -> Result<()> {
        let redraw = self.cfg.scenario.topology_redraw_episodes;
        if self.episodes_started > 0 && self.episodes_started % redraw == 0 {
            self.topology = generate_topology(
                &self.cfg.scenario,
                self.cfg.n_vehicles,
                self.cfg.n_rb,
                Mode::Broadcast,
                &mut self.topo_rng,
            )?;
            self.channel = ChannelState::new(&self.cfg.channel, &self.cfg.scenario, &self.topology, &mut self.chan_rng);
            self.realization = self.channel.broadcast_realization();
        } else if self.episodes_started > 0 {
            // Receiver groups follow the vehicles' current positions.
            self.topology.refresh_pairing(&self.cfg.scenario, Mode::Broadcast);
        }
        self.episodes_started += 1;
        let n = self.n_vehicles();
        self.messages.clear();
        self.queues = vec![Vec::new(); n];
        for _ in 0..self.cfg.broadcast.messages_per_vehicle {
            for v in 0..n {
                let id = self.messages.len();
                let targets = self.topology.broadcast_groups[v].clone();
                if !targets.is_empty() {
                    self.queues[v].push(id);
                }
                self.messages.push(MessageState::new(id, v, targets, n));
            }
        }
        self.prev_interference_mw = vec![0.0; n * self.n_rb()];
        self.prev_band = vec![None; n];
        self.scheduler.reset();
        self.open.clear();
        self.slot = 0;
        Ok(())
    }

    pub fn observe(&self, vehicle: usize, message: usize) -> Result<BroadcastObservation> {
        let held = self.messages.get(message).is_some_and(|m| vehicle < m.holders.len() && m.holders[vehicle]);
        if !held {
            return Err(Error::NotHeld { vehicle, message });
        }
        let m = &self.messages[message];
        let n_rb = self.n_rb();
        let mut usage = vec![0u32; n_rb];
        for &j in &self.topology.neighbors[vehicle] {
            if let Some(b) = self.prev_band[j] {
                usage[b] += 1;
            }
        }
        let here = self.topology.vehicles[vehicle].position;
        let nearest = m
            .broadcasters
            .iter()
            .zip(&m.broadcaster_positions)
            .filter(|&(&b, _)| b != vehicle)
            .map(|(_, p)| here.distance(p))
            .fold(f64::INFINITY, f64::min);
        Ok(BroadcastObservation {
            interference_prev_mw: self.prev_interference_mw[vehicle * n_rb..(vehicle + 1) * n_rb].to_vec(),
            bs_gain: (0..n_rb).map(|b| self.realization.h_tilde(vehicle, b)).collect(),
            neighbor_usage: usage,
            time_left_s: self.time_left(message),
            receive_count: m.receive_count[vehicle],
            nearest_broadcaster_m: if nearest.is_finite() { nearest } else { self.cfg.no_broadcaster_distance_m() },
        })
    }

    /// Vehicles allowed to decide this slot: round-robin over vehicles with
    /// pending messages.
    pub fn update_set(&mut self) -> Vec<usize> {
        let active: Vec<bool> = self.queues.iter().map(|q| !q.is_empty()).collect();
        self.scheduler.next(&active, self.cfg.broadcast.update_set_size)
    }

    /// Resolves one slot. `Transmit` removes the message from the vehicle's
    /// queue; `Hold` keeps it. A vehicle transmits at most one message per slot.
    pub fn apply_actions(&mut self, decisions: &[BroadcastDecision]) -> Result<BroadcastStep> {
        let n = self.n_vehicles();
        let n_rb = self.n_rb();
        let mut alloc = Allocation::silent(n);
        let mut transmissions = Vec::new();
        for d in decisions {
            if d.vehicle >= n || !self.queues[d.vehicle].contains(&d.message) {
                return Err(Error::NotHeld { vehicle: d.vehicle, message: d.message });
            }
            if let BroadcastAction::Transmit(b) = d.action {
                if b >= n_rb {
                    return Err(Error::ActionOutOfRange { action: b, size: n_rb + 1 });
                }
                if alloc.band[d.vehicle].is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "vehicle {} transmits more than one message in a slot",
                        d.vehicle
                    )));
                }
                alloc.assign(d.vehicle, b, self.cfg.channel.broadcast_power_dbm);
                transmissions.push((d.vehicle, d.message, b));
            }
        }

        let bw = self.budget.bandwidth_hz;
        let cue_capacity_bps: Vec<f64> = (0..n_rb)
            .map(|m| capacity(cue_sinr(&self.realization, &alloc, &self.budget, m), bw))
            .collect();
        let mut v2v_sum_bps = 0.0;
        let mut heard = Vec::new();
        for &(v, k, _) in &transmissions {
            let msg = &self.messages[k];
            v2v_sum_bps += unreached_capacity_bps(&self.realization, &alloc, &self.budget, msg, v)?;
            for &j in &msg.targets {
                if j != v && vue_sinr(&self.realization, &alloc, &self.budget, v, j)? >= self.threshold {
                    heard.push((k, j));
                }
            }
        }
        let terms = RewardTerms { v2i_sum_bps: cue_capacity_bps.iter().sum(), v2v_sum_bps };

        let positions: Vec<Point> = self.topology.positions();
        for &(v, k, _) in &transmissions {
            let msg = &mut self.messages[k];
            msg.broadcasters.push(v);
            msg.broadcaster_positions.push(positions[v]);
            self.queues[v].retain(|&x| x != k);
        }
        for &(k, j) in &heard {
            let msg = &mut self.messages[k];
            msg.receive_count[j] += 1;
            msg.received[j] = true;
            if !msg.holders[j] {
                msg.holders[j] = true;
                self.queues[j].push(k);
            }
        }

        let mut completed = Vec::new();
        for msg in self.messages.iter_mut() {
            if msg.completed_slot.is_some() || msg.targets.is_empty() {
                continue;
            }
            msg.slots_used += 1;
            if msg.is_complete() {
                msg.completed_slot = Some(self.slot);
                completed.push(msg.id);
            }
        }
        for &k in &completed {
            for q in self.queues.iter_mut() {
                q.retain(|&x| x != k);
            }
        }

        let shared = capacity_reward(&self.cfg.reward, terms);
        let rewards = decisions.iter().map(|d| self.message_reward(shared, d.message)).collect();

        for v in 0..n {
            for b in 0..n_rb {
                self.prev_interference_mw[v * n_rb + b] =
                    interference_at(&self.realization, &alloc, &self.budget, v, b, Some(v));
            }
        }
        self.prev_band = alloc.band;

        self.slot += 1;
        if self.is_done() {
            for q in self.queues.iter_mut() {
                q.clear();
            }
        }
        let dt = self.cfg.channel.slot_duration_s;
        self.channel.step(&mut self.topology, dt, &mut self.chan_rng);
        self.realization = self.channel.broadcast_realization();

        Ok(BroadcastStep {
            rewards,
            terms,
            cue_capacity_bps,
            transmissions,
            receptions: heard,
            completed,
            done: self.is_done(),
        })
    }

    pub fn dissemination_stats(&self) -> DisseminationStats {
        dissemination_stats(&self.messages)
    }
}

pub fn dissemination_stats(messages: &[MessageState]) -> DisseminationStats {
    let counted = messages.iter().filter(|m| !m.targets.is_empty());
    let mut s = DisseminationStats::default();
    for m in counted {
        s.messages += 1;
        if m.is_complete() {
            s.delivered += 1;
        }
    }
    s
}

impl Environment for BroadcastEnv {
    fn observation_dim(&self) -> usize {
        BroadcastObservation::feature_dim(self.n_rb())
    }

    fn action_count(&self) -> usize {
        BroadcastAction::action_count(self.n_rb())
    }

    fn reset(&mut self) -> Result<()> {
        self.reset_episode()
    }

    fn is_done(&self) -> bool {
        BroadcastEnv::is_done(self)
    }

    /// Each scheduled vehicle walks its queue in arrival order and stops at
    /// the first message it decides to transmit. A decision's transition runs
    /// to the vehicle's next decision on the same message; a transmission has
    /// none, so it runs until the message completes or the episode ends.
    fn step(&mut self, choose: &mut dyn FnMut(&[f64]) -> usize) -> Result<Vec<Experience>> {
        let n_rb = self.n_rb();
        let beta = self.cfg.dqn.discount;
        let scaling = self.cfg.observation.clone();
        let mut experiences = Vec::new();
        let mut decisions = Vec::new();
        for v in self.update_set() {
            for &k in self.queues[v].clone().iter() {
                let state = self.observe(v, k)?.features(&scaling);
                let id = choose(&state);
                let action = BroadcastAction::from_id(id, n_rb)?;
                if let Some(t) = self.open.remove(&(v, k)) {
                    experiences.push(t.close(Some(state.clone())));
                }
                self.open.insert((v, k), OpenTransition::new(state, id));
                decisions.push(BroadcastDecision { vehicle: v, message: k, action });
                if action != BroadcastAction::Hold {
                    break;
                }
            }
        }
        let out = self.apply_actions(&decisions)?;
        let shared = capacity_reward(&self.cfg.reward, out.terms);
        let slot_rewards: Vec<f64> = self.open.keys().map(|&(_, k)| self.message_reward(shared, k)).collect();
        for (t, r) in self.open.values_mut().zip(slot_rewards) {
            t.accrue(r, beta);
        }
        let done = self.is_done();
        let closed: Vec<(usize, usize)> = self
            .open
            .keys()
            .copied()
            .filter(|&(_, k)| done || self.messages[k].completed_slot.is_some())
            .collect();
        for key in closed {
            experiences.push(self.open.remove(&key).expect("listed above").close(None));
        }
        Ok(experiences)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(seed: u64) -> BroadcastEnv {
        BroadcastEnv::new(&RunConfig::for_mode(Mode::Broadcast), seed).unwrap()
    }

    #[test]
    fn action_ids() {
        assert_eq!(BroadcastAction::from_id(4, 4).unwrap(), BroadcastAction::Hold);
        assert_eq!(BroadcastAction::from_id(2, 4).unwrap(), BroadcastAction::Transmit(2));
        assert!(BroadcastAction::from_id(5, 4).is_err());
        for id in 0..5 {
            assert_eq!(BroadcastAction::from_id(id, 4).unwrap().id(4), id);
        }
    }

    #[test]
    fn originator_observation_uses_sentinel() {
        let e = env(1);
        let k = e.pending(0)[0];
        let o = e.observe(0, k).unwrap();
        assert_eq!(o.receive_count, 0);
        assert_eq!(o.nearest_broadcaster_m, e.config().no_broadcaster_distance_m());
        assert_eq!(o.features(&ObservationScaling::default()).len(), 15);
        assert!(matches!(e.observe(1, k), Err(Error::NotHeld { .. })));
    }

    #[test]
    fn everyone_holding_gives_interference_free_cues() {
        let mut e = env(2);
        let decisions: Vec<_> = (0..e.n_vehicles())
            .filter_map(|v| e.pending(v).first().map(|&k| BroadcastDecision { vehicle: v, message: k, action: BroadcastAction::Hold }))
            .collect();
        let real = e.realization().clone();
        let b = *e.budget();
        let step = e.apply_actions(&decisions).unwrap();
        assert_eq!(step.terms.v2v_sum_bps, 0.0);
        for (m, &c) in step.cue_capacity_bps.iter().enumerate() {
            assert_eq!(c, capacity(b.cue_power_mw * real.h(m) / b.noise_mw, b.bandwidth_hz));
        }
    }

    #[test]
    fn received_sets_only_grow() {
        let mut e = env(3);
        let mut prev: Vec<usize> = e.messages().iter().map(|m| m.received_count()).collect();
        let mut turn = 0usize;
        while !e.is_done() {
            let set = e.update_set();
            let decisions: Vec<_> = set
                .iter()
                .map(|&v| {
                    let k = e.pending(v)[0];
                    BroadcastDecision { vehicle: v, message: k, action: BroadcastAction::Transmit((v + turn) % 4) }
                })
                .collect();
            turn += 1;
            e.apply_actions(&decisions).unwrap();
            for (m, p) in e.messages().iter().zip(prev.iter_mut()) {
                assert!(m.received_count() >= *p);
                *p = m.received_count();
                for j in 0..m.received.len() {
                    assert!(!m.received[j] || m.is_target(j));
                }
            }
        }
        assert!(e.dissemination_stats().delivered > 0);
    }

    #[test]
    fn duplicate_transmission_is_rejected() {
        let mut cfg = RunConfig::for_mode(Mode::Broadcast);
        cfg.broadcast.messages_per_vehicle = 2;
        let mut e = BroadcastEnv::new(&cfg, 4).unwrap();
        let q = e.pending(0).to_vec();
        assert_eq!(q.len(), 2);
        let d: Vec<_> = q
            .iter()
            .map(|&k| BroadcastDecision { vehicle: 0, message: k, action: BroadcastAction::Transmit(0) })
            .collect();
        assert!(matches!(e.apply_actions(&d), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn stats_ratio() {
        let mk = |targets: Vec<usize>, got: &[usize]| {
            let mut m = MessageState::new(0, 0, targets, 4);
            for &j in got {
                m.received[j] = true;
            }
            m
        };
        let msgs = vec![mk(vec![1, 2], &[1, 2]), mk(vec![1], &[]), mk(vec![2, 3], &[3]), mk(vec![], &[])];
        let s = dissemination_stats(&msgs);
        assert_eq!((s.messages, s.delivered), (3, 1));
        assert!((s.success_probability() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(DisseminationStats::default().success_probability(), 0.0);
    }

    #[test]
    fn every_decision_closes_by_episode_end() {
        let mut e = env(6);
        let mut decisions = 0;
        let mut exps = Vec::new();
        let mut turn = 0usize;
        while !Environment::is_done(&e) {
            let mut choose = |_: &[f64]| {
                decisions += 1;
                turn += 1;
                if turn % 3 == 0 { 1 } else { 4 }
            };
            exps.extend(Environment::step(&mut e, &mut choose).unwrap());
        }
        assert_eq!(exps.len(), decisions);
        assert!(e.open.is_empty());
        assert!(exps.iter().any(|x| x.span > 1));
        assert!(exps.iter().all(|x| x.span >= 1 && x.is_finite()));
    }

    #[test]
    fn one_transmitter_two_targets_threshold() {
        let mut e = env(8);
        let (v, k) = (0..e.n_vehicles())
            .flat_map(|v| e.pending(v).iter().map(move |&k| (v, k)))
            .find(|&(_, k)| e.messages()[k].targets.len() >= 2)
            .expect("a message with two targets");
        let (a, b) = (e.messages()[k].targets[0], e.messages()[k].targets[1]);
        let budget = *e.budget();
        let p = crate::units::dbm_to_mw(e.config().channel.broadcast_power_dbm);
        let n = e.n_vehicles();
        let mut real = ChannelRealization::zeros(e.n_rb(), n, n);
        // SINR 2 dB at `a`, 0 dB at `b`, around the 1 dB threshold.
        real.set_vue_gain(v, a, 0, db_to_linear(2.0) * budget.noise_mw / p);
        real.set_vue_gain(v, b, 0, budget.noise_mw / p);
        e.set_realization(real);
        let d = BroadcastDecision { vehicle: v, message: k, action: BroadcastAction::Transmit(0) };
        let step = e.apply_actions(&[d]).unwrap();
        assert_eq!(step.receptions, vec![(k, a)]);
        let expected = capacity(db_to_linear(2.0), budget.bandwidth_hz) + capacity(1.0, budget.bandwidth_hz);
        assert!((step.terms.v2v_sum_bps - expected).abs() <= 1e-9 * expected);
        assert!(e.messages()[k].received[a] && !e.messages()[k].received[b]);
        assert!(!e.pending(v).contains(&k));
        assert!(e.pending(a).contains(&k));
    }
}
