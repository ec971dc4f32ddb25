//! Network data model, case ingestion, relay maps and budget arithmetic.
//!
//! All power quantities are stored in per unit on the network's MVA base.
//! Components are addressed by their position (bus index, line index,
//! generator index); the `*Id` newtypes are external labels carried along
//! for reporting and serialization.

mod budget;
mod instance;
mod matpower;
pub mod random;
mod relays;

pub use budget::{budget_from_percentage, Budget, BudgetError};
pub use instance::{
    parse_instance_json, write_instance_json, Instance, InstanceFile, ParseInstanceError,
};
pub use matpower::{parse_matpower, parse_matpower_with, MatpowerError, NegativeDemand, ParseOptions};
pub use relays::{generate_relay_map, Relay, RelayId, RelayMap, RelayMapError, RelayPolicy};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

macro_rules! label {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

label!(BusId);
label!(LineId);
label!(GenId);

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// D_b in per unit.
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: LineId,
    /// Index of the origin bus o(k).
    pub from: usize,
    /// Index of the destination bus d(k).
    pub to: usize,
    pub susceptance: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: GenId,
    /// Index of the bus b(g).
    pub bus: usize,
    pub pmax: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NetworkError {
    #[error("base MVA must be positive, got {0}")]
    BadBase(f64),
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("line {line} references bus index {bus} but the network has {n} buses")]
    DanglingLine { line: LineId, bus: usize, n: usize },
    #[error("generator {gen} references bus index {bus} but the network has {n} buses")]
    DanglingGenerator { gen: GenId, bus: usize, n: usize },
    #[error("line {0} connects a bus to itself")]
    SelfLoop(LineId),
    #[error("line {line} has non-positive susceptance {value}")]
    Susceptance { line: LineId, value: f64 },
    #[error("line {line} has invalid limit {value}")]
    Limit { line: LineId, value: f64 },
    #[error("generator {gen} has invalid capacity {value}")]
    Capacity { gen: GenId, value: f64 },
    #[error("bus {bus} has invalid demand {value}")]
    Demand { bus: BusId, value: f64 },
    #[error("angle difference bound must be positive and finite, got {0}")]
    AngleBound(f64),
}

/// A validated transmission network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    base_mva: f64,
    buses: Vec<Bus>,
    lines: Vec<Line>,
    generators: Vec<Generator>,
    angle_bound: Option<f64>,
    connected: bool,
}

fn nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

impl Network {
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        generators: Vec<Generator>,
    ) -> Result<Self, NetworkError> {
        if !(base_mva.is_finite() && base_mva > 0.0) {
            return Err(NetworkError::BadBase(base_mva));
        }
        let mut seen = HashMap::with_capacity(buses.len());
        for b in &buses {
            if seen.insert(b.id, ()).is_some() {
                return Err(NetworkError::DuplicateBus(b.id));
            }
            if !nonneg(b.demand) {
                return Err(NetworkError::Demand { bus: b.id, value: b.demand });
            }
        }
        let n = buses.len();
        for l in &lines {
            for bus in [l.from, l.to] {
                if bus >= n {
                    return Err(NetworkError::DanglingLine { line: l.id, bus, n });
                }
            }
            if l.from == l.to {
                return Err(NetworkError::SelfLoop(l.id));
            }
            if !(l.susceptance.is_finite() && l.susceptance > 0.0) {
                return Err(NetworkError::Susceptance { line: l.id, value: l.susceptance });
            }
            if !nonneg(l.limit) {
                return Err(NetworkError::Limit { line: l.id, value: l.limit });
            }
        }
        for g in &generators {
            if g.bus >= n {
                return Err(NetworkError::DanglingGenerator { gen: g.id, bus: g.bus, n });
            }
            if !nonneg(g.pmax) {
                return Err(NetworkError::Capacity { gen: g.id, value: g.pmax });
            }
        }
        let mut net = Network {
            base_mva,
            buses,
            lines,
            generators,
            angle_bound: None,
            connected: true,
        };
        net.connected = net.components().len() <= 1;
        Ok(net)
    }

    pub fn with_angle_bound(mut self, theta: f64) -> Result<Self, NetworkError> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(NetworkError::AngleBound(theta));
        }
        self.angle_bound = Some(theta);
        Ok(self)
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }
    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
    /// Optional phase-angle-difference bound Θ in radians.
    pub fn angle_bound(&self) -> Option<f64> {
        self.angle_bound
    }
    /// Whether the lines connect every bus. Disconnected networks are allowed.
    pub fn is_connected(&self) -> bool {
        self.connected
    }
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }
    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }
    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn demands(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.demand).collect()
    }

    /// Generators grouped by bus index (𝒢_b).
    pub fn generators_at(&self) -> Vec<Vec<usize>> {
        let mut at = vec![Vec::new(); self.n_buses()];
        for (g, gen) in self.generators.iter().enumerate() {
            at[gen.bus].push(g);
        }
        at
    }

    /// Lines entering each bus (𝒦⁺_b, d(k) = b) and leaving it (𝒦⁻_b, o(k) = b).
    pub fn incident_lines(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let n = self.n_buses();
        let (mut into, mut out) = (vec![Vec::new(); n], vec![Vec::new(); n]);
        for (k, l) in self.lines.iter().enumerate() {
            into[l.to].push(k);
            out[l.from].push(k);
        }
        (into, out)
    }

    /// Connected components as sorted lists of bus indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n_buses();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for l in &self.lines {
            let (a, b) = (find(&mut parent, l.from), find(&mut parent, l.to));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }

    /// Copy with the line set restricted to `keep` (in original order).
    pub fn with_lines(&self, keep: impl Fn(usize) -> bool) -> Network {
        let lines = self
            .lines
            .iter()
            .enumerate()
            .filter(|(k, _)| keep(*k))
            .map(|(_, l)| l.clone())
            .collect();
        let mut net = Network { lines, ..self.clone() };
        net.connected = net.components().len() <= 1;
        net
    }

    /// Copy with new thermal limits (one per line).
    pub fn with_limits(&self, limits: &[f64]) -> Result<Network, NetworkError> {
        assert_eq!(limits.len(), self.n_lines(), "one limit per line");
        let mut lines = self.lines.clone();
        for (l, &f) in lines.iter_mut().zip(limits) {
            l.limit = f;
        }
        let net = Network::new(self.base_mva, self.buses.clone(), lines, self.generators.clone())?;
        Ok(Network { angle_bound: self.angle_bound, ..net })
    }
}

/// Σ_b D_b.
pub fn total_demand(net: &Network) -> f64 {
    net.buses.iter().map(|b| b.demand).sum()
}

/// Σ_g P̄_g.
pub fn total_capacity(net: &Network) -> f64 {
    net.generators.iter().map(|g| g.pmax).sum()
}

/// Merge all generators at a bus into one whose capacity is the sum.
///
/// The merged generator keeps the id of the first generator at the bus and
/// generators are emitted in bus order. A network that already has at most
/// one generator per bus comes back unchanged.
pub fn aggregate_generators(net: &Network) -> Network {
    let at = net.generators_at();
    if at.iter().all(|g| g.len() <= 1) {
        return net.clone();
    }
    let generators = at
        .iter()
        .enumerate()
        .filter(|(_, gs)| !gs.is_empty())
        .map(|(b, gs)| Generator {
            id: net.generators[gs[0]].id,
            bus: b,
            pmax: gs.iter().map(|&g| net.generators[g].pmax).sum(),
        })
        .collect();
    Network { generators, ..net.clone() }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Matpower { path: String, source: MatpowerError },
    #[error("{path}: {source}")]
    Json { path: String, source: ParseInstanceError },
}

/// Read a `.m` case (one relay per bus) or a native `.json` instance.
pub fn load_instance(path: &Path, opts: &ParseOptions) -> Result<Instance, LoadError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: shown.clone(), source })?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("m")) {
        let (net, _) = parse_matpower_with(&text, opts).map_err(|source| LoadError::Matpower { path: shown, source })?;
        Ok(Instance::with_default_relays(stem, net))
    } else {
        let mut inst = parse_instance_json(&text).map_err(|source| LoadError::Json { path: shown, source })?;
        if inst.name.is_none() {
            inst.name = stem;
        }
        Ok(inst)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Three buses on a cycle, one generator at bus 1, demand at buses 2 and 3.
    pub fn triad() -> Network {
        triad_with_susceptances([1.0, 1.0, 1.0])
    }

    pub fn triad_with_susceptances(b: [f64; 3]) -> Network {
        let buses = [0.0, 1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &d)| Bus { id: BusId(i as u64 + 1), demand: d })
            .collect();
        let ends = [(0, 1), (1, 2), (0, 2)];
        let lines = ends
            .iter()
            .zip(b)
            .enumerate()
            .map(|(k, (&(from, to), s))| Line {
                id: LineId(k as u64 + 1),
                from,
                to,
                susceptance: s,
                limit: 2.0,
            })
            .collect();
        let gens = vec![Generator { id: GenId(1), bus: 0, pmax: 3.0 }];
        Network::new(1.0, buses, lines, gens).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::triad;
    use super::*;

    #[test]
    fn triad_fields() {
        let net = triad();
        assert_eq!((net.n_buses(), net.n_lines(), net.n_generators()), (3, 3, 1));
        assert_eq!(net.lines()[0].from, 0);
        assert_eq!(net.lines()[0].to, 1);
        assert_eq!(net.generators()[0].bus, 0);
        assert!(net.is_connected());
    }

    #[test]
    fn total_demand_values() {
        assert_eq!(total_demand(&triad()), 2.0);
        let empty = Network::new(100.0, vec![Bus { id: BusId(1), demand: 0.0 }], vec![], vec![]).unwrap();
        assert_eq!(total_demand(&empty), 0.0);
    }

    #[test]
    fn rejects_bad_data() {
        let bus = |i| Bus { id: BusId(i), demand: 0.0 };
        let line = |s, l| Line { id: LineId(1), from: 0, to: 1, susceptance: s, limit: l };
        assert!(matches!(
            Network::new(1.0, vec![bus(1), bus(2)], vec![line(0.0, 1.0)], vec![]),
            Err(NetworkError::Susceptance { .. })
        ));
        assert!(matches!(
            Network::new(1.0, vec![bus(1), bus(2)], vec![line(1.0, -1.0)], vec![]),
            Err(NetworkError::Limit { .. })
        ));
        assert!(matches!(
            Network::new(1.0, vec![bus(1), bus(1)], vec![], vec![]),
            Err(NetworkError::DuplicateBus(_))
        ));
        let mut l = line(1.0, 1.0);
        l.to = 5;
        assert!(matches!(
            Network::new(1.0, vec![bus(1), bus(2)], vec![l], vec![]),
            Err(NetworkError::DanglingLine { .. })
        ));
    }

    #[test]
    fn disconnected_is_flagged() {
        let buses = (1..=3).map(|i| Bus { id: BusId(i), demand: 0.0 }).collect();
        let lines = vec![Line { id: LineId(1), from: 0, to: 1, susceptance: 1.0, limit: 1.0 }];
        let net = Network::new(1.0, buses, lines, vec![]).unwrap();
        assert!(!net.is_connected());
        assert_eq!(net.components(), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn aggregation_sums_and_is_idempotent() {
        let buses = (1..=2).map(|i| Bus { id: BusId(i), demand: 0.3 }).collect();
        let lines = vec![Line { id: LineId(1), from: 0, to: 1, susceptance: 1.0, limit: 1.0 }];
        let gens = vec![
            Generator { id: GenId(1), bus: 1, pmax: 0.5 },
            Generator { id: GenId(2), bus: 1, pmax: 0.7 },
        ];
        let net = Network::new(1.0, buses, lines, gens).unwrap();
        let agg = aggregate_generators(&net);
        assert_eq!(agg.n_generators(), 1);
        assert!((agg.generators()[0].pmax - 1.2).abs() < 1e-12);
        assert_eq!(agg.lines(), net.lines());
        assert_eq!(total_demand(&agg), total_demand(&net));
        assert_eq!(aggregate_generators(&agg), agg);
        assert_eq!(aggregate_generators(&triad()), triad());
    }
}
