//! Comparison methods: random allocation, cluster-and-swap and p-persistence.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{vue_sinr, Allocation, ChannelRealization, LinkBudget, Point};
use crate::error::{Error, Result};
use crate::mdp::{BroadcastAction, BroadcastEnv, UnicastAction, UnicastEnv};
use crate::policy::{BroadcastPolicy, UnicastPolicy};

/// Independent uniform sub-band per link at `power_dbm`.
pub fn random_allocate<R: Rng + ?Sized>(n_links: usize, n_rb: usize, power_dbm: f64, rng: &mut R) -> Allocation {
    let mut a = Allocation::silent(n_links);
    for k in 0..n_links {
        a.assign(k, rng.random_range(0..n_rb), power_dbm);
    }
    a
}

/// Rebroadcast with probability `distance / range`, clamped to `[0, 1]`.
pub fn p_persistence_decide<R: Rng + ?Sized>(distance_m: f64, range_m: f64, rng: &mut R) -> Result<bool> {
    if !(distance_m >= 0.0) {
        return Err(Error::InvalidArgument(format!("distance {distance_m}")));
    }
    if !(range_m > 0.0) {
        return Err(Error::InvalidArgument(format!("range {range_m}")));
    }
    let p = (distance_m / range_m).clamp(0.0, 1.0);
    Ok(rng.random::<f64>() < p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster of each item.
    pub cluster_of: Vec<usize>,
    pub rb_of_cluster: Vec<usize>,
    /// Final sub-band of each item after swapping.
    pub band: Vec<usize>,
    pub objective: f64,
    pub swaps_accepted: usize,
}

/// Lloyd's k-means with centroids seeded at evenly spaced items.
pub fn kmeans(points: &[[f64; 3]], k: usize, max_iter: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let k = k.min(n);
    let mut centroids: Vec<[f64; 3]> = (0..k).map(|c| points[c * n / k]).collect();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centroids[a]).total_cmp(&sq_dist(p, &centroids[b])))
                .unwrap();
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64; 3]> = points.iter().zip(&assign).filter(|&(_, &a)| a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..3 {
                centroid[d] = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    assign
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|d| (a[d] - b[d]) * (a[d] - b[d])).sum()
}

/// Clusters items on `(position, load)`, gives cluster `c` sub-band
/// `c mod n_rb`, then sweeps item pairs in index order and swaps their
/// sub-bands whenever `objective` strictly improves. Each evaluated swap
/// counts against `iterations`; a full sweep without a swap ends the search.
pub fn cluster_and_swap(
    features: &[[f64; 3]],
    n_rb: usize,
    iterations: usize,
    objective: &mut dyn FnMut(&[usize]) -> f64,
) -> ClusterAssignment {
    let cluster_of = kmeans(features, n_rb, 50);
    let n_clusters = cluster_of.iter().copied().max().map_or(0, |m| m + 1);
    let rb_of_cluster: Vec<usize> = (0..n_clusters).map(|c| c % n_rb.max(1)).collect();
    let mut band: Vec<usize> = cluster_of.iter().map(|&c| rb_of_cluster[c]).collect();
    let mut best = objective(&band);
    let mut used = 0;
    let mut swaps_accepted = 0;
    let n = band.len();
    'search: loop {
        let mut improved = false;
        for i in 0..n {
            for j in i + 1..n {
                if band[i] == band[j] {
                    continue;
                }
                if used >= iterations {
                    break 'search;
                }
                used += 1;
                band.swap(i, j);
                let value = objective(&band);
                if value > best {
                    best = value;
                    swaps_accepted += 1;
                    improved = true;
                } else {
                    band.swap(i, j);
                }
            }
        }
        if !improved {
            break;
        }
    }
    ClusterAssignment { cluster_of, rb_of_cluster, band, objective: best, swaps_accepted }
}

/// Sum of V2V SINRs when transmitter `k` uses `band[k]` at `power_dbm` and
/// is heard at receiver `receiver[k]`.
pub fn sum_sinr(real: &ChannelRealization, budget: &LinkBudget, band: &[usize], power_dbm: f64, receiver: &[usize]) -> f64 {
    let mut alloc = Allocation::silent(band.len());
    for (k, &b) in band.iter().enumerate() {
        alloc.assign(k, b, power_dbm);
    }
    (0..band.len())
        .map(|k| vue_sinr(real, &alloc, budget, k, receiver[k]).expect("every transmitter is allocated"))
        .sum()
}

fn normalized(p: Point, scale: f64, load: f64) -> [f64; 3] {
    [p.x / scale, p.y / scale, load]
}

fn max_power_index(levels: &[f64]) -> usize {
    (0..levels.len()).max_by(|&a, &b| levels[a].total_cmp(&levels[b]).then(b.cmp(&a))).unwrap_or(0)
}

/// Uniform sub-band at maximum power on every turn.
#[derive(Debug, Clone)]
pub struct RandomUnicast {
    rng: ChaCha8Rng,
}

impl RandomUnicast {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl UnicastPolicy for RandomUnicast {
    fn act(&mut self, env: &UnicastEnv, _link: usize) -> Result<UnicastAction> {
        Ok(UnicastAction {
            sub_band: self.rng.random_range(0..env.n_rb()),
            power_index: max_power_index(env.power_levels()),
        })
    }
}

/// Cluster-and-swap computed once per episode from the first slot's gains,
/// at maximum power.
#[derive(Debug, Clone)]
pub struct ClusterUnicast {
    pub iterations: usize,
    band: Vec<usize>,
}

impl ClusterUnicast {
    pub fn new(iterations: usize) -> Self {
        Self { iterations, band: Vec::new() }
    }
}

impl UnicastPolicy for ClusterUnicast {
    fn begin_episode(&mut self, env: &UnicastEnv) -> Result<()> {
        let topo = env.topology();
        let scale = env.config().scenario.diagonal_m();
        let features: Vec<[f64; 3]> = topo
            .v2v_links
            .iter()
            .enumerate()
            .map(|(k, &(tx, _))| normalized(topo.vehicles[tx].position, scale, env.sessions()[k].load_left()))
            .collect();
        let levels = env.power_levels();
        let power = levels[max_power_index(levels)];
        let receivers: Vec<usize> = (0..features.len()).collect();
        let (real, budget) = (env.realization(), env.budget());
        let mut objective = |band: &[usize]| sum_sinr(real, budget, band, power, &receivers);
        self.band = cluster_and_swap(&features, env.n_rb(), self.iterations, &mut objective).band;
        Ok(())
    }

    fn act(&mut self, env: &UnicastEnv, link: usize) -> Result<UnicastAction> {
        let sub_band = *self.band.get(link).ok_or(Error::InactiveLink(link))?;
        Ok(UnicastAction { sub_band, power_index: max_power_index(env.power_levels()) })
    }
}

/// Uniform over all `N_RB + 1` broadcast actions.
#[derive(Debug, Clone)]
pub struct RandomBroadcast {
    rng: ChaCha8Rng,
}

impl RandomBroadcast {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl BroadcastPolicy for RandomBroadcast {
    fn act(&mut self, env: &BroadcastEnv, _vehicle: usize, _message: usize) -> Result<BroadcastAction> {
        BroadcastAction::from_id(self.rng.random_range(0..=env.n_rb()), env.n_rb())
    }
}

/// p-persistence rebroadcast decision, taken once per held message at the
/// first turn, with sub-bands from cluster-and-swap over vehicles.
#[derive(Debug, Clone)]
pub struct PPersistenceCluster {
    pub iterations: usize,
    rng: ChaCha8Rng,
    band: Vec<usize>,
    decided: HashSet<(usize, usize)>,
}

impl PPersistenceCluster {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self { iterations, rng: ChaCha8Rng::seed_from_u64(seed), band: Vec::new(), decided: HashSet::new() }
    }
}

impl BroadcastPolicy for PPersistenceCluster {
    fn begin_episode(&mut self, env: &BroadcastEnv) -> Result<()> {
        let topo = env.topology();
        let scale = env.config().scenario.diagonal_m();
        let n = env.n_vehicles();
        let features: Vec<[f64; 3]> = (0..n)
            .map(|v| normalized(topo.vehicles[v].position, scale, env.pending(v).len() as f64))
            .collect();
        let receivers: Vec<usize> = (0..n).map(|v| topo.neighbors[v].first().copied().unwrap_or(v)).collect();
        let power = env.config().channel.broadcast_power_dbm;
        let (real, budget) = (env.realization(), env.budget());
        let mut objective = |band: &[usize]| sum_sinr(real, budget, band, power, &receivers);
        self.band = cluster_and_swap(&features, env.n_rb(), self.iterations, &mut objective).band;
        self.decided.clear();
        Ok(())
    }

    fn act(&mut self, env: &BroadcastEnv, vehicle: usize, message: usize) -> Result<BroadcastAction> {
        let obs = env.observe(vehicle, message)?;
        if !self.decided.insert((vehicle, message)) {
            return Ok(BroadcastAction::Hold);
        }
        let range = env.config().scenario.broadcast_radius_m;
        if p_persistence_decide(obs.nearest_broadcaster_m, range, &mut self.rng)? {
            Ok(BroadcastAction::Transmit(self.band[vehicle]))
        } else {
            Ok(BroadcastAction::Hold)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_band_puts_everyone_on_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_allocate(7, 1, 23.0, &mut rng);
        assert!(a.band.iter().all(|&b| b == Some(0)));
        assert!(a.power_dbm.iter().all(|&p| p == 23.0));
    }

    #[test]
    fn random_allocation_is_reproducible() {
        let draw = |s| random_allocate(20, 4, 23.0, &mut ChaCha8Rng::seed_from_u64(s));
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn p_persistence_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            assert!(!p_persistence_decide(0.0, 100.0, &mut rng).unwrap());
            assert!(p_persistence_decide(100.0, 100.0, &mut rng).unwrap());
        }
        assert!(p_persistence_decide(-1.0, 100.0, &mut rng).is_err());
    }

    #[test]
    fn zero_iterations_returns_initial_assignment() {
        let features = [[0.0, 0.0, 1.0], [0.1, 0.0, 1.0], [5.0, 5.0, 0.0], [5.1, 5.0, 0.0]];
        let mut calls = 0;
        let out = cluster_and_swap(&features, 2, 0, &mut |_| {
            calls += 1;
            0.0
        });
        assert_eq!(calls, 1);
        assert_eq!(out.swaps_accepted, 0);
        let initial: Vec<usize> = out.cluster_of.iter().map(|&c| out.rb_of_cluster[c]).collect();
        assert_eq!(out.band, initial);
        assert_eq!(out.cluster_of[0], out.cluster_of[1]);
        assert_ne!(out.cluster_of[0], out.cluster_of[2]);
    }

    #[test]
    fn accepted_swaps_never_lower_the_objective() {
        let features: Vec<[f64; 3]> = (0..8).map(|i| [i as f64, (i * i % 5) as f64, 0.5]).collect();
        let weights = [3.0, -1.0, 2.0, 0.5, -2.0, 1.5, 0.25, -0.75];
        let mut history = Vec::new();
        let out = cluster_and_swap(&features, 3, 1000, &mut |band| {
            let v: f64 = band.iter().zip(&weights).map(|(&b, w)| b as f64 * w).sum();
            history.push(v);
            v
        });
        let mut best = history[0];
        for &v in &history {
            best = best.max(v);
        }
        assert_eq!(out.objective, best);
        assert!(out.objective >= history[0]);
    }

    fn chi_square_passes(counts: &[u64]) -> bool {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let total: u64 = counts.iter().sum();
        let expected = total as f64 / counts.len() as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        stat < ChiSquared::new((counts.len() - 1) as f64).unwrap().inverse_cdf(0.99)
    }

    #[test]
    fn random_bands_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_allocate(100_000, 4, 23.0, &mut rng);
        let mut counts = [0u64; 4];
        for b in a.band.iter().flatten() {
            counts[*b] += 1;
        }
        assert!(chi_square_passes(&counts), "{counts:?}");
    }

    #[test]
    fn p_persistence_at_half_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let hits = (0..100_000).filter(|_| p_persistence_decide(50.0, 100.0, &mut rng).unwrap()).count();
        assert!((hits as f64 / 1e5 - 0.5).abs() <= 0.01, "{hits}");
    }

    /// Exhaustive optimum over all 2^4 assignments, optionally restricted to
    /// two links per band, next to the swap search result.
    fn four_link_search(noise_mw: f64, balanced_only: bool) -> (ClusterAssignment, f64, Vec<usize>) {
        let direct = [[1.0, 0.6], [0.8, 0.9], [0.5, 1.2], [1.1, 0.7]];
        let mut real = ChannelRealization::zeros(2, 4, 4);
        for t in 0..4 {
            for b in 0..2 {
                real.set_g_tilde_c(b, t, 0.01);
                for r in 0..4 {
                    let g = if t == r { direct[t][b] } else { 0.3 + 0.05 * (t + 2 * r + b) as f64 };
                    real.set_vue_gain(t, r, b, g);
                }
            }
        }
        let budget = LinkBudget { cue_power_mw: 1.0, noise_mw, bandwidth_hz: 1.0 };
        let receiver = [0, 1, 2, 3];
        let objective = |band: &[usize]| sum_sinr(&real, &budget, band, 0.0, &receiver);

        let mut best = (f64::NEG_INFINITY, vec![]);
        for code in 0..16usize {
            let band: Vec<usize> = (0..4).map(|k| (code >> k) & 1).collect();
            if balanced_only && band.iter().sum::<usize>() != 2 {
                continue;
            }
            let v = objective(&band);
            if v > best.0 {
                best = (v, band);
            }
        }
        let features = [[0.0, 0.0, 1.0], [0.1, 0.0, 1.0], [5.0, 5.0, 0.0], [5.1, 5.0, 0.0]];
        let out = cluster_and_swap(&features, 2, 100, &mut |band| objective(band));
        (out, best.0, best.1)
    }

    #[test]
    fn swap_search_reaches_exhaustive_optimum() {
        let (out, value, band) = four_link_search(1.0, false);
        assert_eq!(out.band, band);
        assert_eq!(out.objective, value);
    }

    #[test]
    fn swaps_keep_per_band_counts() {
        // At low noise isolating one link wins, which swaps cannot reach from
        // a two-per-band start; the search still finds the best balanced one.
        let (_, global, _) = four_link_search(0.01, false);
        let (out, value, band) = four_link_search(0.01, true);
        assert!(global > value);
        assert_eq!(out.band, band);
        assert_eq!(out.objective, value);
    }
}
