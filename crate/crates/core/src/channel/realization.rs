//! Channel evolution and per-slot gain tables.
//!
//! Every gain is `pathloss x shadowing x fast fading` with antenna gains and
//! the receiver noise figure folded in, so that SINR is computed against the
//! bare thermal noise power.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::geometry::{Topology, Vehicle};
use super::pathloss::PathlossModel;
use crate::config::{ChannelConfig, ScenarioConfig};
use crate::units::db_to_linear;

/// Linear power gains for one slot, indexed by transmitter and receiver roles.
///
/// For unicast, transmitters and receivers are both V2V links (`t` and `r`
/// index links, the signal gain of link `k` is `vue_vue(k, k, b)`). For
/// broadcast, both index vehicles and `vue_vue(i, j, b)` is the gain from
/// vehicle `i` to vehicle `j`; the interference gain from `k'` to the `j`th
/// receiver of `k` does not depend on `k` and is `vue_vue(k', j, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub n_rb: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    /// CUE `m` to the base station, on sub-band `m`.
    pub cue_bs: Vec<f64>,
    /// `[t][b]`: V2V transmitter to the base station.
    pub vue_bs: Vec<f64>,
    /// `[m][r]`: CUE `m` to V2V receiver `r`, on sub-band `m`.
    pub cue_vue: Vec<f64>,
    /// `[t][r][b]`: V2V transmitter to V2V receiver.
    pub vue_vue: Vec<f64>,
}

impl ChannelRealization {
    pub fn zeros(n_rb: usize, n_tx: usize, n_rx: usize) -> Self {
        Self {
            n_rb,
            n_tx,
            n_rx,
            cue_bs: vec![0.0; n_rb],
            vue_bs: vec![0.0; n_tx * n_rb],
            cue_vue: vec![0.0; n_rb * n_rx],
            vue_vue: vec![0.0; n_tx * n_rx * n_rb],
        }
    }

    #[inline]
    pub fn h(&self, m: usize) -> f64 {
        self.cue_bs[m]
    }

    #[inline]
    pub fn h_tilde(&self, t: usize, b: usize) -> f64 {
        self.vue_bs[t * self.n_rb + b]
    }

    #[inline]
    pub fn g_tilde_c(&self, m: usize, r: usize) -> f64 {
        self.cue_vue[m * self.n_rx + r]
    }

    #[inline]
    pub fn vue_gain(&self, t: usize, r: usize, b: usize) -> f64 {
        self.vue_vue[(t * self.n_rx + r) * self.n_rb + b]
    }

    pub fn set_h_tilde(&mut self, t: usize, b: usize, v: f64) {
        self.vue_bs[t * self.n_rb + b] = v;
    }

    pub fn set_g_tilde_c(&mut self, m: usize, r: usize, v: f64) {
        self.cue_vue[m * self.n_rx + r] = v;
    }

    pub fn set_vue_gain(&mut self, t: usize, r: usize, b: usize, v: f64) {
        self.vue_vue[(t * self.n_rx + r) * self.n_rb + b] = v;
    }
}

/// Node-level large-scale state plus the current fast-fading draw.
#[derive(Debug, Clone)]
pub struct ChannelState {
    cfg: ChannelConfig,
    pathloss: PathlossModel,
    vehicle_height_m: f64,
    n_rb: usize,
    n_vehicles: usize,
    n_cues: usize,
    /// Large-scale gains in dB.
    v2v_db: Vec<f64>,
    v2i_db: Vec<f64>,
    cue_bs_db: Vec<f64>,
    cue_v_db: Vec<f64>,
    since_large_scale_s: f64,
    /// Fast-fading power factors.
    fade_vv: Vec<f64>,
    fade_vb: Vec<f64>,
    fade_cb: Vec<f64>,
    fade_cv: Vec<f64>,
}

impl ChannelState {
    pub fn new<R: Rng + ?Sized>(
        cfg: &ChannelConfig,
        scenario: &ScenarioConfig,
        topology: &Topology,
        rng: &mut R,
    ) -> Self {
        let n = topology.vehicles.len();
        let m = topology.cues.len();
        let mut state = Self {
            cfg: cfg.clone(),
            pathloss: PathlossModel::new(cfg, scenario.vehicle_height_m),
            vehicle_height_m: scenario.vehicle_height_m,
            n_rb: m,
            n_vehicles: n,
            n_cues: m,
            v2v_db: vec![0.0; n * n],
            v2i_db: vec![0.0; n],
            cue_bs_db: vec![0.0; m],
            cue_v_db: vec![0.0; m * n],
            since_large_scale_s: 0.0,
            fade_vv: vec![1.0; n * n * m],
            fade_vb: vec![1.0; n * m],
            fade_cb: vec![1.0; m],
            fade_cv: vec![1.0; m * n],
        };
        state.update_large_scale(topology, rng);
        state.redraw_fading(rng);
        state
    }

    pub fn pathloss(&self) -> &PathlossModel {
        &self.pathloss
    }

    /// Pathloss in dB between two ground nodes.
    pub fn v2v_pathloss_db(&self, topology: &Topology, a: &Vehicle, b: &Vehicle) -> f64 {
        let (pa, pb) = (a.position, b.position);
        if topology.line_of_sight(a, b) {
            self.pathloss.los_db(pa.distance(&pb))
        } else {
            self.pathloss.nlos_db((pa.x - pb.x).abs(), (pa.y - pb.y).abs())
        }
    }

    pub fn v2i_pathloss_db(&self, topology: &Topology, a: &Vehicle) -> f64 {
        let ground = a.position.distance(&topology.bs_position);
        let dh = topology.bs_height_m - self.vehicle_height_m;
        self.pathloss.v2i_db(ground.hypot(dh))
    }

    fn v2v_budget_db(&self) -> f64 {
        2.0 * self.cfg.vehicle_antenna_gain_dbi - self.cfg.vehicle_noise_figure_db
    }

    fn v2i_budget_db(&self) -> f64 {
        self.cfg.vehicle_antenna_gain_dbi + self.cfg.bs_antenna_gain_dbi - self.cfg.bs_noise_figure_db
    }

    /// Recomputes pathloss from current geometry and redraws shadowing.
    pub fn update_large_scale<R: Rng + ?Sized>(&mut self, topology: &Topology, rng: &mut R) {
        let (n, m) = (self.n_vehicles, self.n_cues);
        let v2v_std = self.cfg.v2v_shadow_std_db;
        let v2i_std = self.cfg.v2i_shadow_std_db;
        let mut normal = |std: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        };
        let vs = &topology.vehicles;
        for i in 0..n {
            self.v2v_db[i * n + i] = f64::NEG_INFINITY;
            for j in (i + 1)..n {
                let g = self.v2v_budget_db() - self.v2v_pathloss_db(topology, &vs[i], &vs[j]) - normal(v2v_std);
                self.v2v_db[i * n + j] = g;
                self.v2v_db[j * n + i] = g;
            }
        }
        for i in 0..n {
            self.v2i_db[i] = self.v2i_budget_db() - self.v2i_pathloss_db(topology, &vs[i]) - normal(v2i_std);
        }
        for c in 0..m {
            let cue = &topology.cues[c];
            self.cue_bs_db[c] = self.v2i_budget_db() - self.v2i_pathloss_db(topology, cue) - normal(v2i_std);
            for j in 0..n {
                self.cue_v_db[c * n + j] =
                    self.v2v_budget_db() - self.v2v_pathloss_db(topology, cue, &vs[j]) - normal(v2v_std);
            }
        }
    }

    /// Draws i.i.d. unit-mean exponential power factors (Rayleigh amplitude)
    /// per link per sub-band.
    pub fn redraw_fading<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if !self.cfg.fast_fading {
            return;
        }
        for buf in [&mut self.fade_vv, &mut self.fade_vb, &mut self.fade_cb, &mut self.fade_cv] {
            for f in buf.iter_mut() {
                *f = Exp1.sample(rng);
            }
        }
    }

    /// Advances nodes by `dt`, refreshes large-scale gains on the configured
    /// cadence and redraws fast fading.
    pub fn step<R: Rng + ?Sized>(&mut self, topology: &mut Topology, dt: f64, rng: &mut R) {
        topology.advance(dt);
        self.since_large_scale_s += dt;
        if self.since_large_scale_s + 1e-12 >= self.cfg.large_scale_interval_s {
            self.since_large_scale_s = 0.0;
            self.update_large_scale(topology, rng);
        }
        self.redraw_fading(rng);
    }

    /// Vehicle-to-vehicle linear gain on sub-band `b`; zero for a vehicle to itself.
    #[inline]
    pub fn v2v_gain(&self, i: usize, j: usize, b: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let n = self.n_vehicles;
        db_to_linear(self.v2v_db[i * n + j]) * self.fade_vv[(i * n + j) * self.n_rb + b]
    }

    #[inline]
    pub fn v2i_gain(&self, i: usize, b: usize) -> f64 {
        db_to_linear(self.v2i_db[i]) * self.fade_vb[i * self.n_rb + b]
    }

    #[inline]
    pub fn cue_bs_gain(&self, m: usize) -> f64 {
        db_to_linear(self.cue_bs_db[m]) * self.fade_cb[m]
    }

    #[inline]
    pub fn cue_v_gain(&self, m: usize, j: usize) -> f64 {
        db_to_linear(self.cue_v_db[m * self.n_vehicles + j]) * self.fade_cv[m * self.n_vehicles + j]
    }

    /// Large-scale V2V gain in dB (no fast fading).
    pub fn v2v_large_scale_db(&self, i: usize, j: usize) -> f64 {
        self.v2v_db[i * self.n_vehicles + j]
    }

    pub fn v2i_large_scale_db(&self, i: usize) -> f64 {
        self.v2i_db[i]
    }

    /// Gain table with V2V links as transmitters and receivers.
    pub fn unicast_realization(&self, links: &[(usize, usize)]) -> ChannelRealization {
        let k = links.len();
        let mut out = ChannelRealization::zeros(self.n_rb, k, k);
        for m in 0..self.n_rb {
            out.cue_bs[m] = self.cue_bs_gain(m);
            for (r, &(_, rx)) in links.iter().enumerate() {
                out.set_g_tilde_c(m, r, self.cue_v_gain(m, rx));
            }
        }
        for (t, &(tx, _)) in links.iter().enumerate() {
            for b in 0..self.n_rb {
                out.set_h_tilde(t, b, self.v2i_gain(tx, b));
            }
            for (r, &(_, rx)) in links.iter().enumerate() {
                for b in 0..self.n_rb {
                    out.set_vue_gain(t, r, b, self.v2v_gain(tx, rx, b));
                }
            }
        }
        out
    }

    /// Gain table with vehicles as transmitters and receivers.
    pub fn broadcast_realization(&self) -> ChannelRealization {
        let n = self.n_vehicles;
        let mut out = ChannelRealization::zeros(self.n_rb, n, n);
        for m in 0..self.n_rb {
            out.cue_bs[m] = self.cue_bs_gain(m);
            for j in 0..n {
                out.set_g_tilde_c(m, j, self.cue_v_gain(m, j));
            }
        }
        for i in 0..n {
            for b in 0..self.n_rb {
                out.set_h_tilde(i, b, self.v2i_gain(i, b));
            }
            for j in 0..n {
                for b in 0..self.n_rb {
                    out.set_vue_gain(i, j, b, self.v2v_gain(i, j, b));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::geometry::generate_topology;
    use crate::config::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, fast_fading: bool) -> (Topology, ChannelState, ChaCha8Rng) {
        let scen = ScenarioConfig::default();
        let cfg = ChannelConfig { fast_fading, ..ChannelConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = generate_topology(&scen, 8, 4, Mode::Unicast, &mut rng).unwrap();
        let state = ChannelState::new(&cfg, &scen, &topo, &mut rng);
        (topo, state, rng)
    }

    #[test]
    fn gains_positive_and_finite() {
        let (topo, state, _) = setup(1, true);
        let real = state.unicast_realization(&topo.v2v_links);
        for &g in real.cue_bs.iter().chain(&real.vue_bs).chain(&real.cue_vue) {
            assert!(g.is_finite() && g > 0.0);
        }
        for (t, &(tx, _)) in topo.v2v_links.iter().enumerate() {
            for (r, &(_, rx)) in topo.v2v_links.iter().enumerate() {
                for b in 0..4 {
                    let g = real.vue_gain(t, r, b);
                    assert!(g.is_finite());
                    assert_eq!(g > 0.0, tx != rx);
                }
            }
        }
    }

    #[test]
    fn zero_dt_without_fading_keeps_gains() {
        let (mut topo, mut state, mut rng) = setup(2, false);
        let before = state.unicast_realization(&topo.v2v_links);
        state.step(&mut topo, 0.0, &mut rng);
        assert_eq!(state.unicast_realization(&topo.v2v_links), before);
    }

    #[test]
    fn large_scale_refreshes_on_cadence() {
        let (mut topo, mut state, mut rng) = setup(3, false);
        let before = state.v2v_large_scale_db(0, 1);
        for _ in 0..99 {
            state.step(&mut topo, 1e-3, &mut rng);
        }
        assert_eq!(state.v2v_large_scale_db(0, 1), before);
        state.step(&mut topo, 1e-3, &mut rng);
        assert_ne!(state.v2v_large_scale_db(0, 1), before);
    }

    #[test]
    fn stepping_is_reproducible() {
        let run = || {
            let (mut topo, mut state, mut rng) = setup(4, true);
            for _ in 0..150 {
                state.step(&mut topo, 1e-3, &mut rng);
            }
            state.unicast_realization(&topo.v2v_links)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fading_has_unit_mean() {
        let (mut topo, mut state, mut rng) = setup(5, true);
        let mut sum = 0.0;
        let mut n = 0usize;
        for _ in 0..200 {
            state.step(&mut topo, 0.0, &mut rng);
            sum += state.fade_vb.iter().sum::<f64>();
            n += state.fade_vb.len();
        }
        assert!((sum / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn doubling_distance_lowers_gain() {
        let (topo, state, _) = setup(6, false);
        let lane = &topo.lanes[topo.vehicles[0].lane];
        let at = |along: f64| {
            let mut v = topo.vehicles[0].clone();
            v.along = along;
            v.position = lane.point_at(along);
            v
        };
        let (a, b, c) = (at(10.0), at(30.0), at(50.0));
        let near = state.v2v_pathloss_db(&topo, &a, &b);
        let far = state.v2v_pathloss_db(&topo, &a, &c);
        assert!(far > near);
    }
}
