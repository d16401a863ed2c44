//! Training, evaluation and sweep drivers.

pub mod evaluate;
pub mod sweep;
pub mod train;

pub use evaluate::{
    evaluate, evaluate_seed, run_broadcast_episode, run_unicast_episode, EpisodeMetrics, MetricsReport, PolicyKind,
    PolicySpec, Summary,
};
pub use sweep::{sweep, write_sweep, SweepCell, SweepRow};
pub use train::{read_curve, train, train_env, write_curve, write_outputs, EpochRecord, TrainOutcome};
