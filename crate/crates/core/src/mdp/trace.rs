//! Per-slot episode traces as CSV.

use std::io::Write;

use serde::Serialize;

use super::broadcast::{BroadcastAction, BroadcastDecision, BroadcastEnv, BroadcastStep};
use super::unicast::{UnicastEnv, UnicastStep};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnicastTraceRow {
    pub episode: usize,
    pub slot: usize,
    pub link: usize,
    pub sub_band: Option<usize>,
    pub power_dbm: Option<f64>,
    pub v2i_sum_bps: f64,
    pub v2v_sum_bps: f64,
    pub capacity_bps: f64,
    pub reward: Option<f64>,
    pub time_left_s: f64,
    pub load_left: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BroadcastTraceRow {
    pub episode: usize,
    pub slot: usize,
    pub vehicle: usize,
    pub message: usize,
    /// Sub-band, or `hold`.
    pub decision: String,
    pub reward: f64,
    pub received: usize,
    pub targets: usize,
    pub v2i_sum_bps: f64,
    pub v2v_sum_bps: f64,
}

/// Rows for the slot just resolved by `step`. The band and power of link `k`
/// are read back from the environment, so call this right after
/// [`UnicastEnv::apply_actions`].
pub fn unicast_rows(episode: usize, env: &UnicastEnv, step: &UnicastStep) -> Vec<UnicastTraceRow> {
    let slot = env.slot() - 1;
    let levels = env.power_levels();
    (0..env.link_count())
        .filter(|&k| step.rewards[k].is_some())
        .map(|k| {
            let a = env.current_action(k);
            UnicastTraceRow {
                episode,
                slot,
                link: k,
                sub_band: a.map(|a| a.sub_band),
                power_dbm: a.map(|a| levels[a.power_index]),
                v2i_sum_bps: step.terms.v2i_sum_bps,
                v2v_sum_bps: step.terms.v2v_sum_bps,
                capacity_bps: step.vue_capacity_bps[k],
                reward: step.rewards[k],
                time_left_s: env.time_left(k),
                load_left: env.sessions()[k].load_left(),
            }
        })
        .collect()
}

pub fn broadcast_rows(
    episode: usize,
    env: &BroadcastEnv,
    decisions: &[BroadcastDecision],
    step: &BroadcastStep,
) -> Vec<BroadcastTraceRow> {
    let slot = env.slot() - 1;
    decisions
        .iter()
        .zip(&step.rewards)
        .map(|(d, &reward)| {
            let m = &env.messages()[d.message];
            BroadcastTraceRow {
                episode,
                slot,
                vehicle: d.vehicle,
                message: d.message,
                decision: match d.action {
                    BroadcastAction::Transmit(b) => b.to_string(),
                    BroadcastAction::Hold => "hold".into(),
                },
                reward,
                received: m.received_count(),
                targets: m.targets.len(),
                v2i_sum_bps: step.terms.v2i_sum_bps,
                v2v_sum_bps: step.terms.v2v_sum_bps,
            }
        })
        .collect()
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::mdp::UnicastAction;

    #[test]
    fn unicast_trace_has_header_and_rows() {
        let mut cfg = RunConfig::default();
        cfg.n_vehicles = 5;
        let mut env = UnicastEnv::new(&cfg, 9).unwrap();
        let set = env.update_set();
        let ups: Vec<_> = set.iter().map(|&k| (k, UnicastAction { sub_band: 1, power_index: 0 })).collect();
        let step = env.apply_actions(&ups).unwrap();
        let rows = unicast_rows(0, &env, &step);
        assert_eq!(rows.len(), env.link_count());
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("episode,slot,link,sub_band,power_dbm,"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }
}
