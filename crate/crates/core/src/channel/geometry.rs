//! Manhattan road grid, vehicle drops and link pairing.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::units::kmh_to_ms;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Lane runs along y.
    Vertical,
    /// Lane runs along x.
    Horizontal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub axis: Axis,
    /// Index of the road (grid line) the lane belongs to, per axis.
    pub road: usize,
    /// +1 travels toward increasing coordinate, -1 toward decreasing.
    pub direction: f64,
    /// Fixed cross-coordinate of the lane centre line.
    pub offset: f64,
    pub length: f64,
}

impl Lane {
    pub fn point_at(&self, along: f64) -> Point {
        match self.axis {
            Axis::Vertical => Point::new(self.offset, along),
            Axis::Horizontal => Point::new(along, self.offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub lane: usize,
    /// Coordinate along the lane, in `[0, lane.length)`.
    pub along: f64,
    /// Signed speed along the lane axis, m/s.
    pub velocity: f64,
    pub position: Point,
}

/// Placement of every node in one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub lanes: Vec<Lane>,
    pub vehicles: Vec<Vehicle>,
    /// Cellular users, one per sub-band, dropped on the same lanes.
    pub cues: Vec<Vehicle>,
    pub bs_position: Point,
    pub bs_height_m: f64,
    /// Nearest vehicles of each vehicle, closest first.
    pub neighbors: Vec<Vec<usize>>,
    /// Unicast `(tx_vehicle, rx_vehicle)` pairs; empty in broadcast mode.
    pub v2v_links: Vec<(usize, usize)>,
    /// Broadcast receiver sets, one per vehicle; empty in unicast mode.
    pub broadcast_groups: Vec<Vec<usize>>,
}

/// Lanes of a `blocks_x` x `blocks_y` grid: every grid line carries
/// `lanes_per_direction` lanes in each direction.
pub fn build_lanes(cfg: &ScenarioConfig) -> Vec<Lane> {
    let mut lanes = Vec::new();
    let (w, h) = (cfg.width_m(), cfg.height_m());
    for road in 0..=cfg.blocks_x {
        let x = road as f64 * cfg.block_width_m;
        for l in 0..cfg.lanes_per_direction {
            let shift = cfg.lane_width_m * (l as f64 + 0.5);
            lanes.push(Lane { axis: Axis::Vertical, road, direction: 1.0, offset: x + shift, length: h });
            lanes.push(Lane { axis: Axis::Vertical, road, direction: -1.0, offset: x - shift, length: h });
        }
    }
    for road in 0..=cfg.blocks_y {
        let y = road as f64 * cfg.block_height_m;
        for l in 0..cfg.lanes_per_direction {
            let shift = cfg.lane_width_m * (l as f64 + 0.5);
            lanes.push(Lane { axis: Axis::Horizontal, road, direction: 1.0, offset: y - shift, length: w });
            lanes.push(Lane { axis: Axis::Horizontal, road, direction: -1.0, offset: y + shift, length: w });
        }
    }
    lanes
}

fn lane_cells(lanes: &[Lane], gap: f64) -> Vec<usize> {
    lanes.iter().map(|l| (l.length / gap).floor() as usize).collect()
}

/// Total number of vehicles the grid can hold at the configured spacing.
pub fn lane_capacity(cfg: &ScenarioConfig) -> usize {
    lane_cells(&build_lanes(cfg), cfg.min_vehicle_gap_m).iter().sum()
}

/// Drops `count` nodes uniformly over the lane network (a spatial Poisson
/// process conditioned on its count), at most one per `min_vehicle_gap_m` cell.
fn drop_nodes<R: Rng + ?Sized>(
    lanes: &[Lane],
    cfg: &ScenarioConfig,
    count: usize,
    occupied: &mut Vec<bool>,
    rng: &mut R,
) -> Result<Vec<Vehicle>> {
    let cells = lane_cells(lanes, cfg.min_vehicle_gap_m);
    let free: Vec<usize> = (0..occupied.len()).filter(|&i| !occupied[i]).collect();
    if count > free.len() {
        return Err(Error::LaneCapacity { requested: count, capacity: free.len() });
    }
    let speed = kmh_to_ms(cfg.vehicle_speed_kmh);
    let mut picks: Vec<usize> = index::sample(rng, free.len(), count).into_iter().map(|i| free[i]).collect();
    // Sampling order is deterministic; keep it so that indices follow the draw.
    let mut out = Vec::with_capacity(count);
    for cell in picks.drain(..) {
        occupied[cell] = true;
        let mut rem = cell;
        let mut lane_idx = 0;
        while rem >= cells[lane_idx] {
            rem -= cells[lane_idx];
            lane_idx += 1;
        }
        let jitter: f64 = rng.random_range(0.0..1.0);
        let along = (rem as f64 + jitter) * cfg.min_vehicle_gap_m;
        let lane = &lanes[lane_idx];
        out.push(Vehicle {
            lane: lane_idx,
            along,
            velocity: lane.direction * speed,
            position: lane.point_at(along),
        });
    }
    Ok(out)
}

/// Indices of the `k` nearest vehicles to `i`, closest first; ties go to the
/// lower index.
pub fn nearest_vehicles(positions: &[Point], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = positions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (positions[i].distance(p), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

pub fn generate_topology<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    n_vehicles: usize,
    n_cues: usize,
    mode: Mode,
    rng: &mut R,
) -> Result<Topology> {
    if n_vehicles < 2 {
        return Err(Error::TooFewVehicles { required: 2, got: n_vehicles });
    }
    if mode == Mode::Unicast && n_vehicles <= cfg.neighbors_per_vehicle {
        return Err(Error::TooFewVehicles {
            required: cfg.neighbors_per_vehicle + 1,
            got: n_vehicles,
        });
    }
    let lanes = build_lanes(cfg);
    let total_cells: usize = lane_cells(&lanes, cfg.min_vehicle_gap_m).iter().sum();
    if n_vehicles + n_cues > total_cells {
        return Err(Error::LaneCapacity { requested: n_vehicles + n_cues, capacity: total_cells });
    }
    let mut occupied = vec![false; total_cells];
    let vehicles = drop_nodes(&lanes, cfg, n_vehicles, &mut occupied, rng)?;
    let cues = drop_nodes(&lanes, cfg, n_cues, &mut occupied, rng)?;

    let mut topo = Topology {
        lanes,
        vehicles,
        cues,
        bs_position: Point::new(cfg.width_m() / 2.0, cfg.height_m() / 2.0),
        bs_height_m: cfg.bs_height_m,
        neighbors: Vec::new(),
        v2v_links: Vec::new(),
        broadcast_groups: Vec::new(),
    };
    topo.refresh_pairing(cfg, mode);
    Ok(topo)
}

impl Topology {
    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.vehicles.iter().map(|v| v.position).collect()
    }

    /// Recomputes neighbor lists and, per mode, link pairs or broadcast groups
    /// from current positions.
    pub fn refresh_pairing(&mut self, cfg: &ScenarioConfig, mode: Mode) {
        let pos = self.positions();
        let n = pos.len();
        let k = cfg.neighbors_per_vehicle.min(n.saturating_sub(1));
        self.neighbors = (0..n).map(|i| nearest_vehicles(&pos, i, k)).collect();
        self.v2v_links.clear();
        self.broadcast_groups.clear();
        match mode {
            Mode::Unicast => {
                for (i, nbrs) in self.neighbors.iter().enumerate() {
                    self.v2v_links.extend(nbrs.iter().map(|&j| (i, j)));
                }
            }
            Mode::Broadcast => {
                self.broadcast_groups = (0..n)
                    .map(|i| {
                        (0..n)
                            .filter(|&j| j != i && pos[i].distance(&pos[j]) <= cfg.broadcast_radius_m)
                            .collect()
                    })
                    .collect();
            }
        }
    }

    /// Moves every node `dt` seconds along its lane, wrapping at the grid edge.
    pub fn advance(&mut self, dt: f64) {
        let lanes = &self.lanes;
        for v in self.vehicles.iter_mut().chain(self.cues.iter_mut()) {
            let lane = &lanes[v.lane];
            v.along = (v.along + v.velocity * dt).rem_euclid(lane.length);
            v.position = lane.point_at(v.along);
        }
    }

    /// Two nodes have line of sight when they travel on the same road.
    pub fn line_of_sight(&self, a: &Vehicle, b: &Vehicle) -> bool {
        let (la, lb) = (&self.lanes[a.lane], &self.lanes[b.lane]);
        la.axis == lb.axis && la.road == lb.road
    }
}
