//! Native JSON instance format: a network plus its relay map.

use super::{
    generate_relay_map, Bus, BusId, GenId, Generator, Line, LineId, Network, NetworkError, Relay,
    RelayId, RelayMap, RelayMapError, RelayPolicy,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::hash::Hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: BusId,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub id: LineId,
    pub from: BusId,
    pub to: BusId,
    pub susceptance: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRecord {
    pub id: GenId,
    pub bus: BusId,
    pub pmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayRecord {
    pub id: RelayId,
    #[serde(default)]
    pub lines: Vec<LineId>,
    #[serde(default)]
    pub gens: Vec<GenId>,
    #[serde(default)]
    pub buses: Vec<BusId>,
}

/// On-disk layout. Ids, not positions, are used for cross references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    #[serde(default)]
    pub lines: Vec<LineRecord>,
    #[serde(default)]
    pub generators: Vec<GenRecord>,
    /// Absent means the one-relay-per-bus policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relays: Option<Vec<RelayRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_bound: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ParseInstanceError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: u64 },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Relays(#[from] RelayMapError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: Option<String>,
    pub network: Network,
    pub relays: RelayMap,
}

impl Instance {
    pub fn with_default_relays(name: Option<String>, network: Network) -> Self {
        let relays = generate_relay_map(&network, RelayPolicy::OnePerBus);
        Instance { name, network, relays }
    }
}

fn index_of<T: Copy + Eq + Hash + Into<u64>>(
    ids: impl Iterator<Item = T>,
    kind: &'static str,
) -> Result<HashMap<T, usize>, ParseInstanceError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id, i).is_some() {
            return Err(ParseInstanceError::DuplicateId { kind, id: id.into() });
        }
    }
    Ok(map)
}

macro_rules! into_u64 {
    ($($t:ty),*) => {$(impl From<$t> for u64 { fn from(x: $t) -> u64 { x.0 } })*};
}
into_u64!(BusId, LineId, GenId);

fn resolve<T: Copy + Eq + Hash + Into<u64>>(
    map: &HashMap<T, usize>,
    id: T,
    kind: &'static str,
) -> Result<usize, ParseInstanceError> {
    map.get(&id).copied().ok_or(ParseInstanceError::UnknownId { kind, id: id.into() })
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance, ParseInstanceError> {
        let bus_ix = index_of(self.buses.iter().map(|b| b.id), "bus")?;
        let line_ix = index_of(self.lines.iter().map(|l| l.id), "line")?;
        let gen_ix = index_of(self.generators.iter().map(|g| g.id), "generator")?;
        let buses = self.buses.iter().map(|b| Bus { id: b.id, demand: b.demand }).collect();
        let lines = self
            .lines
            .iter()
            .map(|l| {
                Ok(Line {
                    id: l.id,
                    from: resolve(&bus_ix, l.from, "bus")?,
                    to: resolve(&bus_ix, l.to, "bus")?,
                    susceptance: l.susceptance,
                    limit: l.limit,
                })
            })
            .collect::<Result<Vec<_>, ParseInstanceError>>()?;
        let gens = self
            .generators
            .iter()
            .map(|g| Ok(Generator { id: g.id, bus: resolve(&bus_ix, g.bus, "bus")?, pmax: g.pmax }))
            .collect::<Result<Vec<_>, ParseInstanceError>>()?;
        let mut network = Network::new(self.base_mva, buses, lines, gens)?;
        if let Some(theta) = self.angle_bound {
            network = network.with_angle_bound(theta)?;
        }
        let relays = match self.relays {
            None => generate_relay_map(&network, RelayPolicy::OnePerBus),
            Some(records) => {
                let relays = records
                    .into_iter()
                    .map(|r| {
                        Ok(Relay {
                            id: r.id,
                            lines: r.lines.iter().map(|&i| resolve(&line_ix, i, "line")).collect::<Result<_, _>>()?,
                            gens: r.gens.iter().map(|&i| resolve(&gen_ix, i, "generator")).collect::<Result<_, _>>()?,
                            buses: r.buses.iter().map(|&i| resolve(&bus_ix, i, "bus")).collect::<Result<_, _>>()?,
                        })
                    })
                    .collect::<Result<Vec<_>, ParseInstanceError>>()?;
                RelayMap::new(&network, relays)?
            }
        };
        Ok(Instance { name: self.name, network, relays })
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let net = &inst.network;
        let bus_id = |i: usize| net.buses()[i].id;
        InstanceFile {
            name: inst.name.clone(),
            base_mva: net.base_mva(),
            buses: net.buses().iter().map(|b| BusRecord { id: b.id, demand: b.demand }).collect(),
            lines: net
                .lines()
                .iter()
                .map(|l| LineRecord {
                    id: l.id,
                    from: bus_id(l.from),
                    to: bus_id(l.to),
                    susceptance: l.susceptance,
                    limit: l.limit,
                })
                .collect(),
            generators: net
                .generators()
                .iter()
                .map(|g| GenRecord { id: g.id, bus: bus_id(g.bus), pmax: g.pmax })
                .collect(),
            relays: Some(
                inst.relays
                    .relays()
                    .iter()
                    .map(|r| RelayRecord {
                        id: r.id,
                        lines: r.lines.iter().map(|&k| net.lines()[k].id).collect(),
                        gens: r.gens.iter().map(|&g| net.generators()[g].id).collect(),
                        buses: r.buses.iter().map(|&b| bus_id(b)).collect(),
                    })
                    .collect(),
            ),
            angle_bound: net.angle_bound(),
        }
    }
}

pub fn parse_instance_json(text: &str) -> Result<Instance, ParseInstanceError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.into_instance()
}

pub fn write_instance_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("instance serializes")
}
