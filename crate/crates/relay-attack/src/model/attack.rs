use super::ModelError;
use crate::netmodel::{Network, RelayMap};
use serde::{Deserialize, Serialize};

/// Relay choices and the component availabilities they induce.
///
/// `delta[r]` is true when relay r is attacked. `u`, `v`, `w` are true when
/// the generator, line or bus is still available.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackVector {
    pub delta: Vec<bool>,
    pub u: Vec<bool>,
    pub v: Vec<bool>,
    pub w: Vec<bool>,
}

impl AttackVector {
    /// Nothing attacked, everything available.
    pub fn none(net: &Network, relays: &RelayMap) -> Self {
        AttackVector {
            delta: vec![false; relays.len()],
            u: vec![true; net.n_generators()],
            v: vec![true; net.n_lines()],
            w: vec![true; net.n_buses()],
        }
    }

    /// Every relay attacked.
    pub fn everything(net: &Network, relays: &RelayMap) -> Self {
        let all: Vec<usize> = (0..relays.len()).collect();
        Self::from_relays(net, relays, &all)
    }

    /// Attack the given relay indices and switch off everything they control.
    pub fn from_relays(net: &Network, relays: &RelayMap, attacked: &[usize]) -> Self {
        let mut delta = vec![false; relays.len()];
        for &r in attacked {
            delta[r] = true;
        }
        let hit = |rs: &[usize]| rs.iter().any(|&r| delta[r]);
        let u = (0..net.n_generators()).map(|g| !hit(relays.gen_relays(g))).collect();
        let v = (0..net.n_lines()).map(|k| !hit(relays.line_relays(k))).collect();
        let w = (0..net.n_buses()).map(|b| !hit(relays.bus_relays(b))).collect();
        AttackVector { delta, u, v, w }
    }

    pub fn attacked_relays(&self) -> Vec<usize> {
        (0..self.delta.len()).filter(|&r| self.delta[r]).collect()
    }

    pub fn n_attacked(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    /// Lengths must match the network. With `strict`, also require the
    /// induced pattern: a component is off exactly when one of its relays is
    /// attacked.
    pub fn check(&self, net: &Network, relays: Option<&RelayMap>, strict: bool) -> Result<(), ModelError> {
        for (what, expected, got) in [
            ("generator", net.n_generators(), self.u.len()),
            ("line", net.n_lines(), self.v.len()),
            ("bus", net.n_buses(), self.w.len()),
        ] {
            if expected != got {
                return Err(ModelError::AttackShape { what, expected, got });
            }
        }
        let Some(relays) = relays else { return Ok(()) };
        if relays.len() != self.delta.len() {
            return Err(ModelError::AttackShape { what: "relay", expected: relays.len(), got: self.delta.len() });
        }
        let lists: [(&'static str, &[bool], fn(&RelayMap, usize) -> &[usize]); 3] = [
            ("generator", &self.u, RelayMap::gen_relays),
            ("line", &self.v, RelayMap::line_relays),
            ("bus", &self.w, RelayMap::bus_relays),
        ];
        for (what, on, ctl) in lists {
            for (i, &avail) in on.iter().enumerate() {
                let rs = ctl(relays, i);
                if let Some(&r) = rs.iter().find(|&&r| self.delta[r]) {
                    if avail {
                        return Err(ModelError::AttackedButOn { what, index: i, relay: r });
                    }
                } else if !avail && strict {
                    return Err(ModelError::InconsistentAttack { what, index: i });
                }
            }
        }
        Ok(())
    }
}
