use super::Network;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelayId(pub u64);

impl fmt::Display for RelayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One relay and the component indices it controls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relay {
    pub id: RelayId,
    pub lines: Vec<usize>,
    pub gens: Vec<usize>,
    pub buses: Vec<usize>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RelayMapError {
    #[error("relay {relay} controls {kind} index {index}, which does not exist")]
    Dangling { relay: RelayId, kind: &'static str, index: usize },
    #[error("duplicate relay id {0}")]
    Duplicate(RelayId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelayPolicy {
    /// Relay r_b controls bus b, its generators and every adjacent line.
    #[default]
    OnePerBus,
}

/// Relays with forward control lists and the inverse maps ℛ_k, ℛ_g, ℛ_b.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayMap {
    relays: Vec<Relay>,
    line_relays: Vec<Vec<usize>>,
    gen_relays: Vec<Vec<usize>>,
    bus_relays: Vec<Vec<usize>>,
}

impl RelayMap {
    pub fn new(net: &Network, mut relays: Vec<Relay>) -> Result<Self, RelayMapError> {
        let mut ids: Vec<RelayId> = relays.iter().map(|r| r.id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(RelayMapError::Duplicate(w[0]));
        }
        let mut line_relays = vec![Vec::new(); net.n_lines()];
        let mut gen_relays = vec![Vec::new(); net.n_generators()];
        let mut bus_relays = vec![Vec::new(); net.n_buses()];
        for (r, relay) in relays.iter_mut().enumerate() {
            for (kind, list, inv) in [
                ("line", &mut relay.lines, &mut line_relays),
                ("generator", &mut relay.gens, &mut gen_relays),
                ("bus", &mut relay.buses, &mut bus_relays),
            ] {
                list.sort_unstable();
                list.dedup();
                for &i in list.iter() {
                    let slot = inv.get_mut(i).ok_or(RelayMapError::Dangling {
                        relay: relay.id,
                        kind,
                        index: i,
                    })?;
                    slot.push(r);
                }
            }
        }
        Ok(RelayMap { relays, line_relays, gen_relays, bus_relays })
    }

    pub fn relays(&self) -> &[Relay] {
        &self.relays
    }
    pub fn len(&self) -> usize {
        self.relays.len()
    }
    pub fn is_empty(&self) -> bool {
        self.relays.is_empty()
    }
    /// ℛ_k: relays controlling line k.
    pub fn line_relays(&self, k: usize) -> &[usize] {
        &self.line_relays[k]
    }
    /// ℛ_g: relays controlling generator g.
    pub fn gen_relays(&self, g: usize) -> &[usize] {
        &self.gen_relays[g]
    }
    /// ℛ_b: relays controlling bus b.
    pub fn bus_relays(&self, b: usize) -> &[usize] {
        &self.bus_relays[b]
    }
    pub fn n_lines(&self) -> usize {
        self.line_relays.len()
    }
    pub fn n_gens(&self) -> usize {
        self.gen_relays.len()
    }
    pub fn n_buses(&self) -> usize {
        self.bus_relays.len()
    }

    /// True when every line, generator and bus has at least one relay.
    pub fn covers_all(&self) -> bool {
        self.line_relays.iter().chain(&self.gen_relays).chain(&self.bus_relays).all(|r| !r.is_empty())
    }

    /// Whether this map was built for a network with these dimensions.
    pub fn matches(&self, net: &Network) -> bool {
        self.n_lines() == net.n_lines()
            && self.n_gens() == net.n_generators()
            && self.n_buses() == net.n_buses()
    }
}

pub fn generate_relay_map(net: &Network, policy: RelayPolicy) -> RelayMap {
    match policy {
        RelayPolicy::OnePerBus => {
            let gens_at = net.generators_at();
            let mut relays: Vec<Relay> = net
                .buses()
                .iter()
                .enumerate()
                .map(|(b, bus)| Relay {
                    id: RelayId(bus.id.0),
                    lines: Vec::new(),
                    gens: gens_at[b].clone(),
                    buses: vec![b],
                })
                .collect();
            for (k, l) in net.lines().iter().enumerate() {
                relays[l.from].lines.push(k);
                relays[l.to].lines.push(k);
            }
            RelayMap::new(net, relays).expect("one-per-bus map is valid by construction")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::triad;
    use crate::netmodel::{Bus, BusId, GenId, Generator};

    #[test]
    fn triad_one_per_bus() {
        let net = triad();
        let map = generate_relay_map(&net, RelayPolicy::OnePerBus);
        assert_eq!(map.len(), 3);
        assert_eq!(map.line_relays(0), &[0, 1]);
        for k in 0..3 {
            assert_eq!(map.line_relays(k).len(), 2);
        }
        assert_eq!(map.gen_relays(0), &[0]);
        for b in 0..3 {
            assert_eq!(map.bus_relays(b), &[b]);
        }
        assert!(map.covers_all());
    }

    #[test]
    fn single_bus() {
        let net = Network::new(
            100.0,
            vec![Bus { id: BusId(7), demand: 0.1 }],
            vec![],
            vec![Generator { id: GenId(1), bus: 0, pmax: 1.0 }],
        )
        .unwrap();
        let map = generate_relay_map(&net, RelayPolicy::OnePerBus);
        assert_eq!(map.len(), 1);
        assert_eq!(map.relays()[0].buses, vec![0]);
        assert_eq!(map.relays()[0].gens, vec![0]);
        assert!(map.relays()[0].lines.is_empty());
    }

    #[test]
    fn dangling_rejected() {
        let net = triad();
        let r = Relay { id: RelayId(1), lines: vec![9], gens: vec![], buses: vec![] };
        assert!(matches!(RelayMap::new(&net, vec![r]), Err(RelayMapError::Dangling { kind: "line", .. })));
    }

    #[test]
    fn inverse_consistent_on_random() {
        for seed in 0..20 {
            let net = crate::netmodel::random::random_network(&Default::default(), 4 + seed as usize % 5, seed);
            let map = generate_relay_map(&net, RelayPolicy::OnePerBus);
            for (r, relay) in map.relays().iter().enumerate() {
                for &k in &relay.lines {
                    assert!(map.line_relays(k).contains(&r));
                }
            }
            for k in 0..net.n_lines() {
                assert_eq!(map.line_relays(k).len(), 2);
            }
            for g in 0..net.n_generators() {
                assert_eq!(map.gen_relays(g).len(), 1);
            }
        }
    }
}
