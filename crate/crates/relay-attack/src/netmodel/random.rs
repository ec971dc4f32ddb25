//! Seeded random instances for property tests and the `gen random` command.

use super::{Bus, BusId, GenId, Generator, Line, LineId, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    /// Susceptance range in per unit.
    pub susceptance: (f64, f64),
    /// Per-bus demand range; a bus gets zero demand with probability `p_zero_demand`.
    pub demand: (f64, f64),
    pub p_zero_demand: f64,
    /// Extra (non-tree) edges as a fraction of the bus count.
    pub extra_edges: f64,
    /// Probability that a bus hosts a generator. At least one bus always does.
    pub p_generator: f64,
    /// Total generating capacity as a multiple of total demand.
    pub capacity_margin: f64,
    /// Line limits as a fraction of total demand.
    pub limit: (f64, f64),
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            susceptance: (0.5, 5.0),
            demand: (0.1, 1.0),
            p_zero_demand: 0.3,
            extra_edges: 0.5,
            p_generator: 0.4,
            capacity_margin: 1.3,
            limit: (0.15, 0.8),
        }
    }
}

/// A connected network on `n` buses (random spanning tree plus extra edges).
pub fn random_network(spec: &RandomSpec, n: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n.max(1);
    let buses: Vec<Bus> = (0..n)
        .map(|i| {
            let demand = if rng.random_bool(spec.p_zero_demand) {
                0.0
            } else {
                rng.random_range(spec.demand.0..=spec.demand.1)
            };
            Bus { id: BusId(i as u64 + 1), demand }
        })
        .collect();
    let total: f64 = buses.iter().map(|b| b.demand).sum();
    let mut ends = Vec::new();
    for i in 1..n {
        ends.push((rng.random_range(0..i), i));
    }
    if n >= 3 {
        let extra = (spec.extra_edges * n as f64).round() as usize;
        for _ in 0..extra {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                ends.push((a.min(b), a.max(b)));
            }
        }
    }
    let scale = if total > 0.0 { total } else { 1.0 };
    let lines = ends
        .into_iter()
        .enumerate()
        .map(|(k, (from, to))| Line {
            id: LineId(k as u64 + 1),
            from,
            to,
            susceptance: rng.random_range(spec.susceptance.0..=spec.susceptance.1),
            limit: scale * rng.random_range(spec.limit.0..=spec.limit.1),
        })
        .collect();
    let mut hosts: Vec<usize> = (0..n).filter(|_| rng.random_bool(spec.p_generator)).collect();
    if hosts.is_empty() {
        hosts.push(rng.random_range(0..n));
    }
    let weights: Vec<f64> = hosts.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let wsum: f64 = weights.iter().sum();
    let generators = hosts
        .iter()
        .zip(&weights)
        .enumerate()
        .map(|(g, (&bus, w))| Generator {
            id: GenId(g as u64 + 1),
            bus,
            pmax: spec.capacity_margin * scale * w / wsum,
        })
        .collect();
    Network::new(1.0, buses, lines, generators).expect("random network is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_connected() {
        let spec = RandomSpec::default();
        for seed in 0..50 {
            let n = 1 + (seed as usize % 30);
            let a = random_network(&spec, n, seed);
            assert_eq!(a, random_network(&spec, n, seed));
            assert!(a.is_connected());
            assert_eq!(a.n_buses(), n);
            assert!(a.n_generators() >= 1);
        }
    }
}
