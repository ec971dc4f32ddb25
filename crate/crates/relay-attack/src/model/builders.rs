use super::{AlgebraicModel, AttackVector, ConRole, ModelError, ObjSense, Role, Sense, VarId, VarKind};
use crate::netmodel::{Budget, Network, RelayMap};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const INF: f64 = f64::INFINITY;

/// Defender physics used when evaluating an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Physics {
    Dcopf,
    Netflow,
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn defender(net: &Network, attack: &AttackVector, ohm: bool, reduced: bool, name: &str) -> AlgebraicModel {
    let mut m = AlgebraicModel::new(name, ObjSense::Minimize);
    let f: Vec<Option<VarId>> = net
        .lines()
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let on = attack.v[k];
            (!reduced || on).then(|| {
                let cap = l.limit * bit(on);
                m.add_var(Role::Flow, k, VarKind::Continuous, -cap, cap)
            })
        })
        .collect();
    let p: Vec<Option<VarId>> = net
        .generators()
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            let on = attack.u[g];
            (!reduced || on).then(|| m.add_var(Role::Dispatch, g, VarKind::Continuous, 0.0, gen.pmax * bit(on)))
        })
        .collect();
    let l: Vec<VarId> = net
        .buses()
        .iter()
        .enumerate()
        .map(|(b, bus)| m.add_var(Role::Shed, b, VarKind::Continuous, bus.demand * (1.0 - bit(attack.w[b])), bus.demand))
        .collect();
    if ohm {
        let theta: Vec<VarId> =
            (0..net.n_buses()).map(|b| m.add_var(Role::Angle, b, VarKind::Continuous, -PI, PI)).collect();
        for (k, line) in net.lines().iter().enumerate() {
            let Some(fk) = f[k] else { continue };
            let bk = line.susceptance;
            let terms = vec![(fk, 1.0), (theta[line.from], -bk), (theta[line.to], bk)];
            let slack = 2.0 * PI * bk * (1.0 - bit(attack.v[k]));
            m.add_constraint(ConRole::OhmUpper, k, terms.clone(), Sense::Le, slack);
            m.add_constraint(ConRole::OhmLower, k, terms, Sense::Ge, -slack);
        }
    }
    let (into, out) = net.incident_lines();
    let gens_at = net.generators_at();
    for (b, bus) in net.buses().iter().enumerate() {
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        terms.extend(into[b].iter().filter_map(|&k| f[k]).map(|v| (v, 1.0)));
        terms.extend(out[b].iter().filter_map(|&k| f[k]).map(|v| (v, -1.0)));
        terms.extend(gens_at[b].iter().filter_map(|&g| p[g]).map(|v| (v, 1.0)));
        terms.push((l[b], 1.0));
        m.add_constraint(ConRole::Balance, b, terms, Sense::Eq, bus.demand);
    }
    m.set_objective(l.iter().map(|&v| (v, 1.0)).collect(), 0.0);
    m
}

/// DCOPF defender LP with the attack substituted as constants.
pub fn build_defender_dcopf(net: &Network, attack: &AttackVector) -> Result<AlgebraicModel, ModelError> {
    attack.check(net, None, false)?;
    Ok(defender(net, attack, true, false, "defender_dcopf"))
}

/// DCOPF defender LP with attacked lines and generators removed.
pub fn build_defender_dcopf_reduced(net: &Network, attack: &AttackVector) -> Result<AlgebraicModel, ModelError> {
    attack.check(net, None, false)?;
    Ok(defender(net, attack, true, true, "defender_dcopf_reduced"))
}

/// Network-flow defender LP: the DCOPF without Ohm's law and angles.
pub fn build_defender_netflow(net: &Network, attack: &AttackVector) -> Result<AlgebraicModel, ModelError> {
    attack.check(net, None, false)?;
    Ok(defender(net, attack, false, false, "defender_netflow"))
}

pub fn build_defender(net: &Network, attack: &AttackVector, physics: Physics) -> Result<AlgebraicModel, ModelError> {
    match physics {
        Physics::Dcopf => build_defender_dcopf(net, attack),
        Physics::Netflow => build_defender_netflow(net, attack),
    }
}

struct Duals {
    lam_p: Vec<VarId>,
    lam_m: Vec<VarId>,
    mu: Vec<VarId>,
    gamma: Vec<VarId>,
    alpha: Vec<VarId>,
    beta: Vec<VarId>,
    /// ξ⁺, ξ⁻, κ⁺, κ⁻ when Ohm's law is dualized.
    ohm: Option<(Vec<VarId>, Vec<VarId>, Vec<VarId>, Vec<VarId>)>,
}

/// Dual variables and the dual feasibility rows of the defender LP.
/// `cap` is the box used for every dual (μ gets [−cap, cap]).
fn add_duals(m: &mut AlgebraicModel, net: &Network, cap: f64, ohm: bool) -> Duals {
    let c = VarKind::Continuous;
    let nk = net.n_lines();
    let nb = net.n_buses();
    let lam_p = (0..nk).map(|k| m.add_var(Role::LambdaPlus, k, c, 0.0, cap)).collect::<Vec<_>>();
    let lam_m = (0..nk).map(|k| m.add_var(Role::LambdaMinus, k, c, 0.0, cap)).collect::<Vec<_>>();
    let mu = (0..nb).map(|b| m.add_var(Role::Mu, b, c, -cap, cap)).collect::<Vec<_>>();
    let gamma = (0..net.n_generators()).map(|g| m.add_var(Role::Gamma, g, c, 0.0, cap)).collect::<Vec<_>>();
    let alpha = (0..nb).map(|b| m.add_var(Role::Alpha, b, c, 0.0, cap)).collect::<Vec<_>>();
    let beta = (0..nb).map(|b| m.add_var(Role::Beta, b, c, 0.0, cap)).collect::<Vec<_>>();
    let ohm = ohm.then(|| {
        (
            (0..nk).map(|k| m.add_var(Role::XiPlus, k, c, 0.0, cap)).collect::<Vec<_>>(),
            (0..nk).map(|k| m.add_var(Role::XiMinus, k, c, 0.0, cap)).collect::<Vec<_>>(),
            (0..nb).map(|b| m.add_var(Role::KappaPlus, b, c, 0.0, cap)).collect::<Vec<_>>(),
            (0..nb).map(|b| m.add_var(Role::KappaMinus, b, c, 0.0, cap)).collect::<Vec<_>>(),
        )
    });
    for (k, line) in net.lines().iter().enumerate() {
        let mut terms = vec![(lam_p[k], 1.0), (lam_m[k], -1.0), (mu[line.to], 1.0), (mu[line.from], -1.0)];
        if let Some((xp, xm, _, _)) = &ohm {
            terms.push((xp[k], 1.0));
            terms.push((xm[k], -1.0));
        }
        m.add_constraint(ConRole::DualFlow, k, terms, Sense::Eq, 0.0);
    }
    for (g, gen) in net.generators().iter().enumerate() {
        m.add_constraint(ConRole::DualDispatch, g, vec![(mu[gen.bus], 1.0), (gamma[g], -1.0)], Sense::Le, 0.0);
    }
    for b in 0..nb {
        m.add_constraint(ConRole::DualShed, b, vec![(alpha[b], 1.0), (mu[b], 1.0), (beta[b], -1.0)], Sense::Le, 1.0);
    }
    if let Some((xp, xm, kp, km)) = &ohm {
        let (into, out) = net.incident_lines();
        for b in 0..nb {
            let mut terms = Vec::new();
            for &k in &into[b] {
                let bk = net.lines()[k].susceptance;
                terms.push((xp[k], bk));
                terms.push((xm[k], -bk));
            }
            for &k in &out[b] {
                let bk = net.lines()[k].susceptance;
                terms.push((xm[k], bk));
                terms.push((xp[k], -bk));
            }
            terms.push((kp[b], 1.0));
            terms.push((km[b], -1.0));
            m.add_constraint(ConRole::DualAngle, b, terms, Sense::Eq, 0.0);
        }
    }
    Duals { lam_p, lam_m, mu, gamma, alpha, beta, ohm }
}

/// Dual of the network-flow defender LP at a fixed attack.
pub fn build_nf_dual_lp(net: &Network, attack: &AttackVector) -> Result<AlgebraicModel, ModelError> {
    attack.check(net, None, false)?;
    let mut m = AlgebraicModel::new("nf_dual", ObjSense::Maximize);
    let d = add_duals(&mut m, net, INF, false);
    let mut obj = Vec::new();
    for (k, line) in net.lines().iter().enumerate() {
        let c = -line.limit * bit(attack.v[k]);
        obj.push((d.lam_p[k], c));
        obj.push((d.lam_m[k], c));
    }
    for (g, gen) in net.generators().iter().enumerate() {
        obj.push((d.gamma[g], -gen.pmax * bit(attack.u[g])));
    }
    for (b, bus) in net.buses().iter().enumerate() {
        obj.push((d.alpha[b], bus.demand * (1.0 - bit(attack.w[b]))));
        obj.push((d.mu[b], bus.demand));
        obj.push((d.beta[b], -bus.demand));
    }
    obj.retain(|t| t.1 != 0.0);
    m.set_objective(obj, 0.0);
    Ok(m)
}

struct Attacker {
    u: Vec<VarId>,
    v: Vec<VarId>,
    w: Vec<VarId>,
}

fn add_attacker(m: &mut AlgebraicModel, net: &Network, relays: &RelayMap, budget: &Budget) -> Result<Attacker, ModelError> {
    if !relays.matches(net) {
        return Err(ModelError::RelayShape);
    }
    if budget.count > relays.len() {
        return Err(ModelError::Budget { count: budget.count, relays: relays.len() });
    }
    let bin = VarKind::Binary;
    let delta: Vec<VarId> = (0..relays.len()).map(|r| m.add_var(Role::Delta, r, bin, 0.0, 1.0)).collect();
    let v: Vec<VarId> = (0..net.n_lines()).map(|k| m.add_var(Role::LineUp, k, bin, 0.0, 1.0)).collect();
    let u: Vec<VarId> = (0..net.n_generators()).map(|g| m.add_var(Role::GenUp, g, bin, 0.0, 1.0)).collect();
    let w: Vec<VarId> = (0..net.n_buses()).map(|b| m.add_var(Role::BusUp, b, bin, 0.0, 1.0)).collect();
    m.add_constraint(ConRole::Budget, 0, delta.iter().map(|&d| (d, 1.0)).collect(), Sense::Le, budget.count as f64);
    let families: [(ConRole, ConRole, &[VarId], fn(&RelayMap, usize) -> &[usize]); 3] = [
        (ConRole::LineNeedsRelay, ConRole::LineRelayOff, &v, RelayMap::line_relays),
        (ConRole::GenNeedsRelay, ConRole::GenRelayOff, &u, RelayMap::gen_relays),
        (ConRole::BusNeedsRelay, ConRole::BusRelayOff, &w, RelayMap::bus_relays),
    ];
    for (needs, off, comp, ctl) in families {
        for (i, &x) in comp.iter().enumerate() {
            let rs = ctl(relays, i);
            let mut terms: Vec<(VarId, f64)> = rs.iter().map(|&r| (delta[r], 1.0)).collect();
            terms.push((x, 1.0));
            m.add_constraint(needs, i, terms, Sense::Ge, 1.0);
            for (j, &r) in rs.iter().enumerate() {
                m.add_constraint_sub(off, i, j, vec![(delta[r], 1.0), (x, 1.0)], Sense::Le, 1.0);
            }
        }
    }
    Ok(Attacker { u, v, w })
}

struct Bars {
    lam_p: Vec<VarId>,
    lam_m: Vec<VarId>,
    gamma: Vec<VarId>,
    alpha: Vec<VarId>,
    xi: Option<(Vec<VarId>, Vec<VarId>)>,
}

fn add_bars(m: &mut AlgebraicModel, net: &Network, ohm: bool) -> Bars {
    let c = VarKind::Continuous;
    let nk = net.n_lines();
    Bars {
        lam_p: (0..nk).map(|k| m.add_var(Role::LambdaPlusBar, k, c, 0.0, INF)).collect(),
        lam_m: (0..nk).map(|k| m.add_var(Role::LambdaMinusBar, k, c, 0.0, INF)).collect(),
        gamma: (0..net.n_generators()).map(|g| m.add_var(Role::GammaBar, g, c, 0.0, INF)).collect(),
        alpha: (0..net.n_buses()).map(|b| m.add_var(Role::AlphaBar, b, c, 0.0, INF)).collect(),
        xi: ohm.then(|| {
            (
                (0..nk).map(|k| m.add_var(Role::XiPlusBar, k, c, 0.0, INF)).collect(),
                (0..nk).map(|k| m.add_var(Role::XiMinusBar, k, c, 0.0, INF)).collect(),
            )
        }),
    }
}

fn set_linearized_objective(m: &mut AlgebraicModel, net: &Network, d: &Duals, bars: &Bars) {
    let mut obj = Vec::new();
    for (k, line) in net.lines().iter().enumerate() {
        obj.push((bars.lam_p[k], -line.limit));
        obj.push((bars.lam_m[k], -line.limit));
        if let Some((xp, xm)) = &bars.xi {
            obj.push((xp[k], -2.0 * PI * line.susceptance));
            obj.push((xm[k], -2.0 * PI * line.susceptance));
        }
    }
    for (g, gen) in net.generators().iter().enumerate() {
        obj.push((bars.gamma[g], -gen.pmax));
    }
    for (b, bus) in net.buses().iter().enumerate() {
        obj.push((bars.alpha[b], bus.demand));
        obj.push((d.mu[b], bus.demand));
        obj.push((d.beta[b], -bus.demand));
        if let Some((_, _, kp, km)) = &d.ohm {
            obj.push((kp[b], -PI));
            obj.push((km[b], -PI));
        }
    }
    obj.retain(|t| t.1 != 0.0);
    m.set_objective(obj, 0.0);
}

/// x̄ = x·z through x̄ ≤ Mz, x̄ ≥ x − M(1 − z), x̄ ≤ x.
fn product_rows(m: &mut AlgebraicModel, role: ConRole, i: usize, bar: VarId, x: VarId, z: VarId, big_m: f64) {
    m.add_constraint_sub(role, i, 0, vec![(bar, 1.0), (z, -big_m)], Sense::Le, 0.0);
    m.add_constraint_sub(role, i, 1, vec![(bar, 1.0), (x, -1.0), (z, -big_m)], Sense::Ge, -big_m);
    m.add_constraint_sub(role, i, 2, vec![(bar, 1.0), (x, -1.0)], Sense::Le, 0.0);
}

/// x̄ = x·(1 − z) through x̄ ≤ M(1 − z), x̄ ≥ x − Mz, x̄ ≤ x.
fn complement_rows(m: &mut AlgebraicModel, role: ConRole, i: usize, bar: VarId, x: VarId, z: VarId, big_m: f64) {
    m.add_constraint_sub(role, i, 0, vec![(bar, 1.0), (z, big_m)], Sense::Le, big_m);
    m.add_constraint_sub(role, i, 1, vec![(bar, 1.0), (x, -1.0), (z, big_m)], Sense::Ge, 0.0);
    m.add_constraint_sub(role, i, 2, vec![(bar, 1.0), (x, -1.0)], Sense::Le, 0.0);
}

fn linearize(m: &mut AlgebraicModel, net: &Network, a: &Attacker, d: &Duals, bars: &Bars, big_m: f64) {
    for k in 0..net.n_lines() {
        product_rows(m, ConRole::LinLambdaPlus, k, bars.lam_p[k], d.lam_p[k], a.v[k], big_m);
        product_rows(m, ConRole::LinLambdaMinus, k, bars.lam_m[k], d.lam_m[k], a.v[k], big_m);
        if let (Some((xbp, xbm)), Some((xp, xm, _, _))) = (&bars.xi, &d.ohm) {
            complement_rows(m, ConRole::LinXiPlus, k, xbp[k], xp[k], a.v[k], big_m);
            complement_rows(m, ConRole::LinXiMinus, k, xbm[k], xm[k], a.v[k], big_m);
        }
    }
    for g in 0..net.n_generators() {
        product_rows(m, ConRole::LinGamma, g, bars.gamma[g], d.gamma[g], a.u[g], big_m);
    }
    for b in 0..net.n_buses() {
        complement_rows(m, ConRole::LinAlpha, b, bars.alpha[b], d.alpha[b], a.w[b], big_m);
    }
}

/// The network-flow interdiction MILP with unit dual boxes and unit
/// linearization constants.
pub fn build_nflb_milp(net: &Network, relays: &RelayMap, budget: &Budget) -> Result<AlgebraicModel, ModelError> {
    let mut m = AlgebraicModel::new("nflb_milp", ObjSense::Maximize);
    let a = add_attacker(&mut m, net, relays, budget)?;
    let d = add_duals(&mut m, net, 1.0, false);
    let bars = add_bars(&mut m, net, false);
    linearize(&mut m, net, &a, &d, &bars, 1.0);
    set_linearized_objective(&mut m, net, &d, &bars);
    Ok(m)
}

/// Full DCOPF dual with the products encoded as indicator constraints.
pub fn build_logical_milp(net: &Network, relays: &RelayMap, budget: &Budget) -> Result<AlgebraicModel, ModelError> {
    let mut m = AlgebraicModel::new("logical_milp", ObjSense::Maximize);
    let a = add_attacker(&mut m, net, relays, budget)?;
    let d = add_duals(&mut m, net, INF, true);
    let bars = add_bars(&mut m, net, true);
    let eq = Sense::Eq;
    // (role, index, bar, dual, binary, value at which bar copies the dual)
    let mut links: Vec<(ConRole, usize, VarId, VarId, VarId, bool)> = Vec::new();
    for b in 0..net.n_buses() {
        links.push((ConRole::LinAlpha, b, bars.alpha[b], d.alpha[b], a.w[b], false));
    }
    if let (Some((xbp, xbm)), Some((xp, xm, _, _))) = (&bars.xi, &d.ohm) {
        for k in 0..net.n_lines() {
            links.push((ConRole::LinXiPlus, k, xbp[k], xp[k], a.v[k], false));
            links.push((ConRole::LinXiMinus, k, xbm[k], xm[k], a.v[k], false));
        }
    }
    for k in 0..net.n_lines() {
        links.push((ConRole::LinLambdaPlus, k, bars.lam_p[k], d.lam_p[k], a.v[k], true));
        links.push((ConRole::LinLambdaMinus, k, bars.lam_m[k], d.lam_m[k], a.v[k], true));
    }
    for g in 0..net.n_generators() {
        links.push((ConRole::LinGamma, g, bars.gamma[g], d.gamma[g], a.u[g], true));
    }
    for (role, i, bar, dual, z, copy_at) in links {
        m.add_indicator(role, i, 0, z, copy_at, vec![(bar, 1.0), (dual, -1.0)], eq, 0.0);
        m.add_indicator(role, i, 1, z, !copy_at, vec![(bar, 1.0)], eq, 0.0);
    }
    set_linearized_objective(&mut m, net, &d, &bars);
    Ok(m)
}

/// Full DCOPF dual with the products linearized by a single scalar M.
#[allow(non_snake_case)]
pub fn build_bigM_milp(net: &Network, relays: &RelayMap, budget: &Budget, big_m: f64) -> Result<AlgebraicModel, ModelError> {
    if big_m.is_nan() || big_m < 1.0 {
        return Err(ModelError::BigM(big_m));
    }
    let mut m = AlgebraicModel::new("bigm_milp", ObjSense::Maximize);
    let a = add_attacker(&mut m, net, relays, budget)?;
    let d = add_duals(&mut m, net, INF, true);
    let bars = add_bars(&mut m, net, true);
    linearize(&mut m, net, &a, &d, &bars, big_m);
    set_linearized_objective(&mut m, net, &d, &bars);
    Ok(m)
}

/// Read the attacker's binaries from a solution of one of the MILPs.
pub fn attack_from_values(m: &AlgebraicModel, values: &[f64], n_relays: usize, net: &Network) -> AttackVector {
    let read = |role: Role, n: usize| -> Vec<bool> {
        (0..n).map(|i| m.var(role, i).map(|v| values[v.0] > 0.5).unwrap_or(false)).collect()
    };
    AttackVector {
        delta: read(Role::Delta, n_relays),
        u: read(Role::GenUp, net.n_generators()),
        v: read(Role::LineUp, net.n_lines()),
        w: read(Role::BusUp, net.n_buses()),
    }
}

/// MILP point that encodes a known attack with all duals at zero. Used to
/// warm-start the comparison formulations.
pub fn attack_warm_start(m: &AlgebraicModel, attack: &AttackVector) -> Vec<(VarId, f64)> {
    let mut out = Vec::new();
    for (key, &id) in m.var_keys() {
        let val = match key.role {
            Role::Delta => bit(attack.delta[key.index]),
            Role::GenUp => bit(attack.u[key.index]),
            Role::LineUp => bit(attack.v[key.index]),
            Role::BusUp => bit(attack.w[key.index]),
            _ => continue,
        };
        out.push((id, val));
    }
    out
}

/// Defender primal values read back from a solved defender LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenderSolution {
    pub flows: Vec<f64>,
    pub dispatch: Vec<f64>,
    pub shed: Vec<f64>,
    pub angles: Option<Vec<f64>>,
    pub objective: f64,
}

impl DefenderSolution {
    /// Components absent from a reduced model read as zero.
    pub fn extract(net: &Network, m: &AlgebraicModel, values: &[f64]) -> Self {
        let get = |role: Role, n: usize| -> Vec<f64> {
            (0..n).map(|i| m.var(role, i).map(|v| values[v.0]).unwrap_or(0.0)).collect()
        };
        let shed = get(Role::Shed, net.n_buses());
        let angles = m.var(Role::Angle, 0).map(|_| get(Role::Angle, net.n_buses()));
        DefenderSolution {
            flows: get(Role::Flow, net.n_lines()),
            dispatch: get(Role::Dispatch, net.n_generators()),
            objective: shed.iter().sum(),
            shed,
            angles,
        }
    }

    /// Largest violation of the defender bounds and nodal balance.
    pub fn max_violation(&self, net: &Network, attack: &AttackVector) -> f64 {
        let mut worst = 0.0f64;
        for (b, bus) in net.buses().iter().enumerate() {
            let lo = bus.demand * (1.0 - bit(attack.w[b]));
            worst = worst.max(lo - self.shed[b]).max(self.shed[b] - bus.demand);
        }
        for (g, gen) in net.generators().iter().enumerate() {
            worst = worst.max(-self.dispatch[g]).max(self.dispatch[g] - gen.pmax * bit(attack.u[g]));
        }
        for (k, line) in net.lines().iter().enumerate() {
            worst = worst.max(self.flows[k].abs() - line.limit * bit(attack.v[k]));
        }
        let mut balance: Vec<f64> = net.buses().iter().map(|b| -b.demand).collect();
        for (k, line) in net.lines().iter().enumerate() {
            balance[line.to] += self.flows[k];
            balance[line.from] -= self.flows[k];
        }
        for (g, gen) in net.generators().iter().enumerate() {
            balance[gen.bus] += self.dispatch[g];
        }
        for (b, x) in balance.iter().enumerate() {
            worst = worst.max((x + self.shed[b]).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::triad;
    use crate::netmodel::{generate_relay_map, RelayPolicy};

    fn setup() -> (Network, RelayMap) {
        let net = triad();
        let rm = generate_relay_map(&net, RelayPolicy::OnePerBus);
        (net, rm)
    }

    #[test]
    fn nflb_registry_counts() {
        let (net, rm) = setup();
        let m = build_nflb_milp(&net, &rm, &Budget::count(1, 3).unwrap()).unwrap();
        assert!(m.validate().is_ok());
        assert_eq!(m.n_binaries(), 10);
        let duals = m.vars().iter().filter(|v| v.key.role.is_dual()).count();
        assert_eq!(duals, 16);
        let bars = [Role::LambdaPlusBar, Role::LambdaMinusBar, Role::GammaBar, Role::AlphaBar]
            .iter()
            .map(|&r| m.count_role(r))
            .sum::<usize>();
        assert_eq!(bars, 10);
        assert_eq!(m.n_vars(), 36);
        // budget, 7 coverage rows, 2·3 + 1 + 3 relay rows, 7 dual rows, 3·10 linearization rows
        assert_eq!(m.constraints().len(), 1 + 7 + 10 + 7 + 30);
        let mu = m.var(Role::Mu, 0).unwrap();
        assert_eq!((m.vars()[mu.0].lb, m.vars()[mu.0].ub), (-1.0, 1.0));
    }

    #[test]
    fn logical_and_bigm_shapes() {
        let (net, rm) = setup();
        let b = Budget::count(1, 3).unwrap();
        let l = build_logical_milp(&net, &rm, &b).unwrap();
        let g = build_bigM_milp(&net, &rm, &b, 2.0).unwrap();
        assert!(l.validate().is_ok() && g.validate().is_ok());
        assert_eq!(l.indicators().len(), 2 * (3 + 6 + 6 + 1));
        assert!(g.indicators().is_empty());
        assert_eq!(l.n_vars(), g.n_vars());
        let xi = l.var(Role::XiPlus, 0).unwrap();
        assert_eq!(l.vars()[xi.0].ub, INF);
        assert_eq!(build_bigM_milp(&net, &rm, &b, 0.5), Err(ModelError::BigM(0.5)));
    }

    #[test]
    fn builders_are_deterministic() {
        let (net, rm) = setup();
        let b = Budget::count(2, 3).unwrap();
        assert_eq!(build_nflb_milp(&net, &rm, &b).unwrap(), build_nflb_milp(&net, &rm, &b).unwrap());
        assert_eq!(build_logical_milp(&net, &rm, &b).unwrap(), build_logical_milp(&net, &rm, &b).unwrap());
        let a = AttackVector::from_relays(&net, &rm, &[1]);
        assert_eq!(build_defender_dcopf(&net, &a).unwrap(), build_defender_dcopf(&net, &a).unwrap());
    }

    #[test]
    fn reduced_drops_attacked_components() {
        let (net, rm) = setup();
        let a = AttackVector::from_relays(&net, &rm, &[0]);
        let full = build_defender_dcopf(&net, &a).unwrap();
        let red = build_defender_dcopf_reduced(&net, &a).unwrap();
        assert_eq!(full.count_role(Role::Flow), 3);
        assert_eq!(red.count_role(Role::Flow), 1);
        assert_eq!(red.count_role(Role::Dispatch), 0);
        let l0 = red.var(Role::Shed, 0).unwrap();
        assert_eq!(red.vars()[l0.0].lb, red.vars()[l0.0].ub);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (net, rm) = setup();
        assert!(matches!(
            build_nflb_milp(&net, &rm, &Budget { percentage: None, count: 4 }),
            Err(ModelError::Budget { count: 4, relays: 3 })
        ));
        let mut a = AttackVector::none(&net, &rm);
        a.v.pop();
        assert!(build_defender_netflow(&net, &a).is_err());
    }

    #[test]
    fn warm_start_round_trip() {
        let (net, rm) = setup();
        let m = build_nflb_milp(&net, &rm, &Budget::count(1, 3).unwrap()).unwrap();
        let a = AttackVector::from_relays(&net, &rm, &[2]);
        let mut x = vec![0.0; m.n_vars()];
        for (v, val) in attack_warm_start(&m, &a) {
            x[v.0] = val;
        }
        assert_eq!(attack_from_values(&m, &x, 3, &net), a);
        // zero duals with the attack binaries satisfy every row
        assert!(m.max_violation(&x) < 1e-12);
    }
}
