//! Road topology, propagation and link-quality computations.

pub mod geometry;
pub mod pathloss;
pub mod realization;
pub mod sinr;

pub use geometry::{generate_topology, Axis, Lane, Point, Topology, Vehicle};
pub use pathloss::PathlossModel;
pub use realization::{ChannelRealization, ChannelState};
pub use sinr::{capacity, cue_sinr, interference_at, vue_sinr, Allocation, LinkBudget};
