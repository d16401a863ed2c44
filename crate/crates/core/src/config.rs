//! Run configuration.
//!
//! Every knob of the simulator lives here and is (de)serialized as TOML. A file
//! only needs to mention the keys it overrides; everything else falls back to
//! the defaults below. Defaults that correspond to the standard V2X evaluation
//! table (carrier, antenna gains, noise figures, speed, lanes, latency budget,
//! power levels, noise power, reward weights, SINR threshold) use those values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Unicast,
    Broadcast,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Unicast => f.write_str("unicast"),
            Mode::Broadcast => f.write_str("broadcast"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unicast" => Ok(Mode::Unicast),
            "broadcast" => Ok(Mode::Broadcast),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub n_vehicles: usize,
    /// Number of sub-bands; one orthogonal CUE per sub-band.
    pub n_rb: usize,
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub unicast: UnicastConfig,
    pub broadcast: BroadcastConfig,
    pub reward: RewardConfig,
    pub observation: ObservationScaling,
    pub dqn: DqnConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Unicast,
            n_vehicles: 20,
            n_rb: 4,
            scenario: ScenarioConfig::default(),
            channel: ChannelConfig::default(),
            unicast: UnicastConfig::default(),
            broadcast: BroadcastConfig::default(),
            reward: RewardConfig::default(),
            observation: ObservationScaling::default(),
            dqn: DqnConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Road grid geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub block_width_m: f64,
    pub block_height_m: f64,
    pub lanes_per_direction: usize,
    pub lane_width_m: f64,
    pub vehicle_speed_kmh: f64,
    pub bs_height_m: f64,
    pub vehicle_height_m: f64,
    /// Minimum spacing between vehicles dropped on the same lane; bounds lane capacity.
    pub min_vehicle_gap_m: f64,
    /// Nearest vehicles each transmitter pairs with (unicast) and counts as neighbors.
    pub neighbors_per_vehicle: usize,
    /// Receivers of a broadcast are all vehicles within this radius of the originator.
    pub broadcast_radius_m: f64,
    /// Episodes between topology redraws.
    pub topology_redraw_episodes: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            blocks_x: 3,
            blocks_y: 3,
            block_width_m: 216.5,
            block_height_m: 125.0,
            lanes_per_direction: 3,
            lane_width_m: 3.5,
            vehicle_speed_kmh: 36.0,
            bs_height_m: 25.0,
            vehicle_height_m: 1.5,
            min_vehicle_gap_m: 5.0,
            neighbors_per_vehicle: 3,
            broadcast_radius_m: 150.0,
            topology_redraw_episodes: 10,
        }
    }
}

impl ScenarioConfig {
    pub fn width_m(&self) -> f64 {
        self.blocks_x as f64 * self.block_width_m
    }

    pub fn height_m(&self) -> f64 {
        self.blocks_y as f64 * self.block_height_m
    }

    pub fn diagonal_m(&self) -> f64 {
        self.width_m().hypot(self.height_m())
    }
}

/// Link budget, propagation and fading constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_freq_ghz: f64,
    pub bs_antenna_gain_dbi: f64,
    pub bs_noise_figure_db: f64,
    pub vehicle_antenna_gain_dbi: f64,
    pub vehicle_noise_figure_db: f64,
    pub noise_power_dbm: f64,
    /// Bandwidth of one sub-band.
    pub bandwidth_hz: f64,
    pub cue_power_dbm: f64,
    pub unicast_power_levels_dbm: Vec<f64>,
    pub broadcast_power_dbm: f64,
    pub sinr_threshold_db: f64,

    /// V2V LOS dual-slope model: `intercept + 10 n_near log10(d)` up to the
    /// breakpoint, `10 n_far log10(d / d_bp)` beyond it.
    pub los_intercept_db: f64,
    pub los_exponent_near: f64,
    pub los_exponent_far: f64,
    pub min_distance_m: f64,

    /// V2V NLOS corner model `PL_los(d1) + base - offset_coeff n_j + 10 n_j log10(d2)
    /// + freq_coeff log10(fc / 5 GHz)` with `n_j = max(nj_start - nj_slope d1, nj_min)`.
    pub nlos_base_db: f64,
    pub nlos_offset_coeff: f64,
    pub nlos_nj_start: f64,
    pub nlos_nj_slope: f64,
    pub nlos_nj_min: f64,
    pub nlos_freq_coeff: f64,

    /// V2I model `intercept + 10 exponent log10(d_km)` on 3-D distance.
    pub v2i_intercept_db: f64,
    pub v2i_exponent: f64,

    pub v2v_shadow_std_db: f64,
    pub v2i_shadow_std_db: f64,
    /// Rayleigh fast fading; when false the fading factor is fixed at 1.
    pub fast_fading: bool,
    pub slot_duration_s: f64,
    pub large_scale_interval_s: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_freq_ghz: 2.0,
            bs_antenna_gain_dbi: 8.0,
            bs_noise_figure_db: 5.0,
            vehicle_antenna_gain_dbi: 3.0,
            vehicle_noise_figure_db: 9.0,
            noise_power_dbm: -114.0,
            bandwidth_hz: 1.0e6,
            cue_power_dbm: 23.0,
            unicast_power_levels_dbm: vec![23.0, 10.0, 5.0],
            broadcast_power_dbm: 23.0,
            sinr_threshold_db: 1.0,
            los_intercept_db: 41.0,
            los_exponent_near: 2.27,
            los_exponent_far: 4.0,
            min_distance_m: 3.0,
            nlos_base_db: 20.0,
            nlos_offset_coeff: 12.5,
            nlos_nj_start: 2.8,
            nlos_nj_slope: 0.0024,
            nlos_nj_min: 1.84,
            nlos_freq_coeff: 3.0,
            v2i_intercept_db: 128.1,
            v2i_exponent: 3.76,
            v2v_shadow_std_db: 3.0,
            v2i_shadow_std_db: 8.0,
            fast_fading: true,
            slot_duration_s: 1.0e-3,
            large_scale_interval_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnicastConfig {
    /// Maximum tolerable V2V latency T0.
    pub latency_budget_s: f64,
    pub payload_bits: f64,
    /// Links that may change action per slot (round-robin).
    pub update_set_size: usize,
}

impl Default for UnicastConfig {
    fn default() -> Self {
        Self {
            latency_budget_s: 0.1,
            payload_bits: 120_000.0,
            update_set_size: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BroadcastConfig {
    pub latency_budget_s: f64,
    /// Vehicles that decide per slot (round-robin).
    pub update_set_size: usize,
    /// Messages each vehicle originates at episode start.
    pub messages_per_vehicle: usize,
    /// Distance feature reported when no other vehicle has broadcast the
    /// message yet. Defaults to the grid diagonal.
    pub no_broadcaster_distance_m: Option<f64>,
}

impl Default for BroadcastConfig {
    fn default() -> Self {
        Self {
            latency_budget_s: 0.1,
            update_set_size: 5,
            messages_per_vehicle: 1,
            no_broadcaster_distance_m: None,
        }
    }
}

/// Reward weights and the units capacities and elapsed time are expressed in
/// before weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub lambda_c: f64,
    pub lambda_d: f64,
    pub lambda_p: f64,
    pub capacity_unit_bps: f64,
    pub time_unit_s: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda_c: 0.1,
            lambda_d: 0.9,
            lambda_p: 1.0,
            capacity_unit_bps: 1.0e6,
            time_unit_s: 1.0e-4,
        }
    }
}

/// `feature = (raw - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub offset: f64,
    pub scale: f64,
}

impl Affine {
    pub const fn new(offset: f64, scale: f64) -> Self {
        Self { offset, scale }
    }

    #[inline]
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.offset) / self.scale
    }
}

/// Fixed standardization of observation fields. Power and gain fields are
/// converted to dB(m) before the affine map; zero power maps to `power_floor_dbm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationScaling {
    pub power_floor_dbm: f64,
    pub interference_dbm: Affine,
    pub bs_gain_db: Affine,
    pub neighbor_count: Affine,
    pub time_left_s: Affine,
    pub link_gain_db: Affine,
    pub load_fraction: Affine,
    pub receive_count: Affine,
    pub distance_m: Affine,
}

impl Default for ObservationScaling {
    fn default() -> Self {
        Self {
            power_floor_dbm: -140.0,
            interference_dbm: Affine::new(-100.0, 20.0),
            bs_gain_db: Affine::new(-110.0, 20.0),
            neighbor_count: Affine::new(0.0, 4.0),
            time_left_s: Affine::new(0.0, 0.1),
            link_gain_db: Affine::new(-100.0, 20.0),
            load_fraction: Affine::new(0.0, 1.0),
            receive_count: Affine::new(0.0, 4.0),
            distance_m: Affine::new(0.0, 200.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied every `lr_decay_steps` updates.
    pub lr_decay: f64,
    pub lr_decay_steps: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub discount: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_refresh_updates: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of training episodes over which epsilon anneals linearly.
    pub epsilon_anneal_fraction: f64,
    /// Positive factor applied to rewards before they enter the replay memory.
    pub reward_scale: f64,
    /// Gradient updates per environment slot.
    pub updates_per_slot: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![500, 250, 120],
            learning_rate: 0.01,
            lr_decay: 0.999,
            lr_decay_steps: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            discount: 0.99,
            batch_size: 32,
            replay_capacity: 100_000,
            target_refresh_updates: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.02,
            epsilon_anneal_fraction: 0.8,
            reward_scale: 0.01,
            updates_per_slot: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub episodes_per_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 300,
            episodes_per_epoch: 10,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_seeds: usize,
    /// Evaluation seeds are `seed_base .. seed_base + n_seeds`.
    pub seed_base: u64,
    pub episodes_per_seed: usize,
    /// Worker threads for evaluation cells; 0 lets the pool decide.
    pub workers: usize,
    pub cluster_iterations: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_seeds: 10,
            seed_base: 1_000_000,
            episodes_per_seed: 10,
            workers: 0,
            cluster_iterations: 200,
        }
    }
}

impl RunConfig {
    pub fn for_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn latency_budget_s(&self) -> f64 {
        match self.mode {
            Mode::Unicast => self.unicast.latency_budget_s,
            Mode::Broadcast => self.broadcast.latency_budget_s,
        }
    }

    /// Slots in one episode (one latency window).
    pub fn slots_per_episode(&self) -> usize {
        (self.latency_budget_s() / self.channel.slot_duration_s).round() as usize
    }

    pub fn no_broadcaster_distance_m(&self) -> f64 {
        self.broadcast
            .no_broadcaster_distance_m
            .unwrap_or_else(|| self.scenario.diagonal_m())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_rb == 0 {
            return bad("n_rb must be at least 1");
        }
        if self.n_vehicles < 2 {
            return bad("n_vehicles must be at least 2");
        }
        let s = &self.scenario;
        if s.blocks_x == 0 || s.blocks_y == 0 || s.lanes_per_direction == 0 {
            return bad("grid needs at least one block and one lane per direction");
        }
        if !(s.block_width_m > 0.0 && s.block_height_m > 0.0 && s.min_vehicle_gap_m > 0.0) {
            return bad("grid dimensions and vehicle gap must be positive");
        }
        if s.neighbors_per_vehicle == 0 {
            return bad("neighbors_per_vehicle must be at least 1");
        }
        if s.broadcast_radius_m <= 0.0 {
            return bad("broadcast_radius_m must be positive");
        }
        if s.topology_redraw_episodes == 0 {
            return bad("topology_redraw_episodes must be at least 1");
        }
        let c = &self.channel;
        if c.unicast_power_levels_dbm.is_empty() {
            return bad("unicast_power_levels_dbm must not be empty");
        }
        if !(c.bandwidth_hz > 0.0 && c.slot_duration_s > 0.0 && c.large_scale_interval_s > 0.0) {
            return bad("bandwidth, slot duration and large-scale interval must be positive");
        }
        if self.latency_budget_s() < c.slot_duration_s {
            return bad("latency budget shorter than one slot");
        }
        if self.unicast.payload_bits <= 0.0 {
            return bad("payload_bits must be positive");
        }
        if self.unicast.update_set_size == 0 || self.broadcast.update_set_size == 0 {
            return bad("update_set_size must be at least 1");
        }
        let d = &self.dqn;
        if !(0.0..=1.0).contains(&d.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if d.batch_size == 0 || d.replay_capacity < d.batch_size {
            return bad("replay capacity must hold at least one batch");
        }
        if d.hidden_layers.iter().any(|&w| w == 0) {
            return bad("hidden layer widths must be positive");
        }
        if !(d.reward_scale > 0.0) {
            return bad("reward_scale must be positive");
        }
        if d.target_refresh_updates == 0 || d.lr_decay_steps == 0 {
            return bad("target_refresh_updates and lr_decay_steps must be positive");
        }
        if self.train.episodes_per_epoch == 0 {
            return bad("episodes_per_epoch must be at least 1");
        }
        if self.eval.n_seeds == 0 || self.eval.episodes_per_seed == 0 {
            return bad("evaluation needs at least one seed and one episode");
        }
        Ok(())
    }
}
