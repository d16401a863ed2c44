//! Greedy evaluation of a policy over independent seeds.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baselines::{ClusterUnicast, PPersistenceCluster, RandomBroadcast, RandomUnicast};
use crate::config::{Mode, RunConfig};
use crate::dqn::QNetwork;
use crate::error::{Error, Result};
use crate::mdp::{BroadcastAction, BroadcastEnv, UnicastEnv};
use crate::mdp::broadcast::BroadcastDecision;
use crate::policy::{BroadcastPolicy, GreedyQ, UnicastPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Dqn,
    Random,
    Cluster,
    Ppersist,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dqn => "dqn",
            Self::Random => "random",
            Self::Cluster => "cluster",
            Self::Ppersist => "ppersist",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(Self::Dqn),
            "random" => Ok(Self::Random),
            "cluster" => Ok(Self::Cluster),
            "ppersist" => Ok(Self::Ppersist),
            other => Err(Error::InvalidArgument(format!("unknown policy `{other}`"))),
        }
    }
}

/// A policy to evaluate; `Dqn` carries the trained network.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    Dqn(QNetwork),
    Random,
    Cluster,
    Ppersist,
}

impl PolicySpec {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Self::Dqn(_) => PolicyKind::Dqn,
            Self::Random => PolicyKind::Random,
            Self::Cluster => PolicyKind::Cluster,
            Self::Ppersist => PolicyKind::Ppersist,
        }
    }

    /// A baseline spec; `Dqn` needs a network and is rejected here.
    pub fn baseline(kind: PolicyKind) -> Result<Self> {
        match kind {
            PolicyKind::Random => Ok(Self::Random),
            PolicyKind::Cluster => Ok(Self::Cluster),
            PolicyKind::Ppersist => Ok(Self::Ppersist),
            PolicyKind::Dqn => Err(Error::InvalidArgument("dqn policy needs a checkpoint".into())),
        }
    }

    fn unicast(&self, cfg: &RunConfig, seed: u64) -> Result<Box<dyn UnicastPolicy>> {
        Ok(match self {
            Self::Dqn(net) => Box::new(GreedyQ { network: net.clone(), scaling: cfg.observation.clone() }),
            Self::Random => Box::new(RandomUnicast::new(seed)),
            Self::Cluster => Box::new(ClusterUnicast::new(cfg.eval.cluster_iterations)),
            Self::Ppersist => {
                return Err(Error::InvalidArgument("ppersist is a broadcast policy".into()));
            }
        })
    }

    fn broadcast(&self, cfg: &RunConfig, seed: u64) -> Result<Box<dyn BroadcastPolicy>> {
        Ok(match self {
            Self::Dqn(net) => Box::new(GreedyQ { network: net.clone(), scaling: cfg.observation.clone() }),
            Self::Random => Box::new(RandomBroadcast::new(seed)),
            Self::Ppersist => Box::new(PPersistenceCluster::new(cfg.eval.cluster_iterations, seed)),
            Self::Cluster => {
                return Err(Error::InvalidArgument("cluster is a unicast policy; use ppersist".into()));
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    /// Sum V2I capacity averaged over the episode's slots, bits/s.
    pub v2i_rate_bps: f64,
    /// Fraction of links (unicast) or messages (broadcast) delivered within the budget.
    pub satisfied: f64,
}

/// Plays the environment's current episode to the end.
pub fn run_unicast_episode(env: &mut UnicastEnv, policy: &mut dyn UnicastPolicy) -> Result<EpisodeMetrics> {
    policy.begin_episode(env)?;
    let (mut v2i, mut slots) = (0.0, 0usize);
    while !env.is_done() {
        let set = env.update_set();
        let mut updates = Vec::with_capacity(set.len());
        for k in set {
            updates.push((k, policy.act(env, k)?));
        }
        let step = env.apply_actions(&updates)?;
        v2i += step.terms.v2i_sum_bps;
        slots += 1;
    }
    Ok(EpisodeMetrics { v2i_rate_bps: v2i / slots.max(1) as f64, satisfied: env.satisfied_fraction() })
}

/// Each scheduled vehicle walks its queue in arrival order and stops at the
/// first message it transmits.
pub fn broadcast_decisions(env: &mut BroadcastEnv, policy: &mut dyn BroadcastPolicy) -> Result<Vec<BroadcastDecision>> {
    let mut decisions = Vec::new();
    for v in env.update_set() {
        for &k in env.pending(v).to_vec().iter() {
            let action = policy.act(env, v, k)?;
            decisions.push(BroadcastDecision { vehicle: v, message: k, action });
            if action != BroadcastAction::Hold {
                break;
            }
        }
    }
    Ok(decisions)
}

pub fn run_broadcast_episode(env: &mut BroadcastEnv, policy: &mut dyn BroadcastPolicy) -> Result<EpisodeMetrics> {
    policy.begin_episode(env)?;
    let (mut v2i, mut slots) = (0.0, 0usize);
    while !env.is_done() {
        let decisions = broadcast_decisions(env, policy)?;
        let step = env.apply_actions(&decisions)?;
        v2i += step.terms.v2i_sum_bps;
        slots += 1;
    }
    Ok(EpisodeMetrics {
        v2i_rate_bps: v2i / slots.max(1) as f64,
        satisfied: env.dissemination_stats().success_probability(),
    })
}

/// Mean over `episodes` consecutive episodes of one seed.
pub fn evaluate_seed(cfg: &RunConfig, policy: &PolicySpec, seed: u64) -> Result<EpisodeMetrics> {
    let episodes = cfg.eval.episodes_per_seed.max(1);
    let mut total = EpisodeMetrics { v2i_rate_bps: 0.0, satisfied: 0.0 };
    let mut add = |m: EpisodeMetrics| {
        total.v2i_rate_bps += m.v2i_rate_bps;
        total.satisfied += m.satisfied;
    };
    match cfg.mode {
        Mode::Unicast => {
            let mut env = UnicastEnv::new(cfg, seed)?;
            let mut p = policy.unicast(cfg, seed)?;
            for e in 0..episodes {
                if e > 0 {
                    env.reset_episode()?;
                }
                add(run_unicast_episode(&mut env, p.as_mut())?);
            }
        }
        Mode::Broadcast => {
            let mut env = BroadcastEnv::new(cfg, seed)?;
            let mut p = policy.broadcast(cfg, seed)?;
            for e in 0..episodes {
                if e > 0 {
                    env.reset_episode()?;
                }
                add(run_broadcast_episode(&mut env, p.as_mut())?);
            }
        }
    }
    Ok(EpisodeMetrics {
        v2i_rate_bps: total.v2i_rate_bps / episodes as f64,
        satisfied: total.satisfied / episodes as f64,
    })
}

/// Mean and 95% Student-t half-width of per-seed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub ci95_half_width: f64,
    pub per_seed: Vec<f64>,
}

impl Summary {
    pub fn of(values: Vec<f64>) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let half = if n < 2 {
            f64::INFINITY
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive dof").inverse_cdf(0.975);
            t * (var / n as f64).sqrt()
        };
        Self { mean, ci95_half_width: half, per_seed: values }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci95_half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95_half_width
    }

    /// Strictly greater mean with disjoint confidence intervals.
    pub fn beats(&self, other: &Summary) -> bool {
        self.mean > other.mean && self.lower() > other.upper()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: Mode,
    pub policy: PolicyKind,
    pub n_vehicles: usize,
    pub n_rb: usize,
    pub seeds: Vec<u64>,
    pub episodes_per_seed: usize,
    pub v2i_rate_bps: Summary,
    pub satisfied: Summary,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Evaluates `policy` on seeds `seed_base .. seed_base + n_seeds`. Seeds run
/// in parallel; results are kept in seed order.
pub fn evaluate(cfg: &RunConfig, policy: &PolicySpec) -> Result<MetricsReport> {
    cfg.validate()?;
    if cfg.eval.n_seeds == 0 {
        return Err(Error::Config("eval.n_seeds must be positive".into()));
    }
    let seeds: Vec<u64> = (0..cfg.eval.n_seeds as u64).map(|i| cfg.eval.seed_base + i).collect();
    let cells: Vec<Result<EpisodeMetrics>> =
        pool(cfg.eval.workers)?.install(|| seeds.par_iter().map(|&s| evaluate_seed(cfg, policy, s)).collect());
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        mode: cfg.mode,
        policy: policy.kind(),
        n_vehicles: cfg.n_vehicles,
        n_rb: cfg.n_rb,
        seeds,
        episodes_per_seed: cfg.eval.episodes_per_seed.max(1),
        v2i_rate_bps: Summary::of(cells.iter().map(|c| c.v2i_rate_bps).collect()),
        satisfied: Summary::of(cells.iter().map(|c| c.satisfied).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: Mode) -> RunConfig {
        let mut cfg = RunConfig::for_mode(mode);
        cfg.n_vehicles = 8;
        cfg.eval.n_seeds = 3;
        cfg.eval.episodes_per_seed = 1;
        cfg
    }

    #[test]
    fn summary_mean_and_interval() {
        let s = Summary::of(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        // t(0.975, 2) = 4.302652729749464
        assert!((s.ci95_half_width - 4.302_652_729_749_464 / 3f64.sqrt()).abs() < 1e-9);
        assert!(Summary::of(vec![10.0, 10.5, 11.0]).beats(&s));
        assert!(!s.beats(&s));
    }

    #[test]
    fn policy_names_round_trip() {
        for k in [PolicyKind::Dqn, PolicyKind::Random, PolicyKind::Cluster, PolicyKind::Ppersist] {
            assert_eq!(k.to_string().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn evaluation_is_reproducible_and_worker_independent() {
        let mut cfg = small(Mode::Unicast);
        let a = evaluate(&cfg, &PolicySpec::Random).unwrap();
        cfg.eval.workers = 1;
        let b = evaluate(&cfg, &PolicySpec::Random).unwrap();
        assert_eq!(a, b);
        let mean = a.satisfied.per_seed.iter().sum::<f64>() / 3.0;
        assert_eq!(a.satisfied.mean, mean);
        assert!(a.satisfied.per_seed.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn broadcast_baselines_run() {
        let cfg = small(Mode::Broadcast);
        for p in [PolicySpec::Random, PolicySpec::Ppersist] {
            let r = evaluate(&cfg, &p).unwrap();
            assert!(r.v2i_rate_bps.mean > 0.0);
        }
        assert!(evaluate(&cfg, &PolicySpec::Cluster).is_err());
    }

    #[test]
    fn checkpoint_shape_mismatch_is_an_error() {
        let cfg = small(Mode::Unicast);
        let net = QNetwork::zeros(&[5, 4, 12]).unwrap();
        assert!(matches!(evaluate(&cfg, &PolicySpec::Dqn(net)), Err(Error::DimensionMismatch { .. })));
    }
}
