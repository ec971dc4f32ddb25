#![allow(dead_code)]

use relay_attack::graph::{block_decomposition, demand_threshold};
use relay_attack::netmodel::random::{random_network, RandomSpec};
use relay_attack::netmodel::{generate_relay_map, Network, RelayMap, RelayPolicy};

pub struct Fixture {
    pub name: String,
    pub net: Network,
    pub relays: RelayMap,
}

impl Fixture {
    pub fn new(name: impl Into<String>, net: Network) -> Self {
        let relays = generate_relay_map(&net, RelayPolicy::OnePerBus);
        Fixture { name: name.into(), net, relays }
    }
}

/// Random connected networks on 4 to 8 buses, cycling through the sizes.
pub fn random_fixtures(count: usize, seed0: u64) -> Vec<Fixture> {
    (0..count as u64)
        .map(|i| {
            let n = 4 + (i % 5) as usize;
            let seed = seed0 + i;
            Fixture::new(format!("rand{n}_s{seed}"), random_network(&RandomSpec::default(), n, seed))
        })
        .collect()
}

/// Raise every block-edge limit to the demand-based uncongested threshold,
/// leaving bridges as they are.
pub fn uncongested(net: &Network) -> Network {
    let t = demand_threshold(net).expect("connected").threshold;
    let blocks = block_decomposition(net).expect("connected");
    let mut limits: Vec<f64> = net.lines().iter().map(|l| l.limit).collect();
    for &k in &blocks.non_tree_edges {
        limits[k] = limits[k].max(t);
    }
    net.with_limits(&limits).expect("positive limits")
}

/// Random fixtures that have at least one cycle, pushed into the
/// uncongested regime.
pub fn uncongested_fixtures(count: usize, seed0: u64) -> Vec<Fixture> {
    let mut out = Vec::new();
    let mut seed = seed0;
    while out.len() < count {
        let n = 4 + (seed % 5) as usize;
        let net = random_network(&RandomSpec::default(), n, seed);
        if !block_decomposition(&net).expect("connected").non_tree_edges.is_empty() {
            out.push(Fixture::new(format!("unc{n}_s{seed}"), uncongested(&net)));
        }
        seed += 1;
    }
    out
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-9
}
