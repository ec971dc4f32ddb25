//! Ground truth for small instances: bilevel optima by enumerating attacks,
//! a total-unimodularity check of the dual constraint matrix, and an audit
//! of vertex duals.

mod tu;

pub use tu::{assemble_gh, verify_total_unimodularity, GhouilaHouri, Minor, TuLimits, TuMatrix, TuReport};

use crate::interdiction::{evaluate_attack, InterdictionError};
use crate::model::{build_nf_dual_lp, AttackVector, Physics};
use crate::netmodel::{Network, RelayMap};
use crate::solver::{Backend, SolveOptions, SolveStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Default cap on the number of defender LPs one enumeration may solve.
pub const DEFAULT_CAP: usize = 20_000;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("enumeration needs {needed} solves, cap is {cap}")]
    CapExceeded { needed: u128, cap: usize },
    #[error("attack {attack:?}: {source}")]
    Attack { attack: Vec<usize>, source: InterdictionError },
    #[error("attack {0:?}: no basic solution")]
    NotBasic(Vec<usize>),
    #[error("network has {0} generators at one bus; aggregate first")]
    MultipleGenerators(usize),
    #[error("{0}")]
    Limits(String),
}

/// Which relay subsets are enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationMode {
    /// Subsets of size exactly U plus the empty attack. Enough because
    /// attacking more relays only removes defender options.
    #[default]
    ExactlyU,
    /// Every subset of size at most U.
    AtMostU,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationOptions {
    pub cap: usize,
    pub mode: EnumerationMode,
    pub solve: SolveOptions,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { cap: DEFAULT_CAP, mode: EnumerationMode::ExactlyU, solve: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub value: f64,
    /// Every enumerated attack within 1e-9 of the optimum, in lexicographic order.
    pub argmax: Vec<Vec<usize>>,
    pub n_evaluated: usize,
    /// (attacked relays, defender optimum), in lexicographic order.
    pub table: Vec<(Vec<usize>, f64)>,
}

impl EnumerationResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("relays,load_shed_pu\n");
        for (set, v) in &self.table {
            let ids: Vec<String> = set.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(s, "{},{v}", ids.join(" "));
        }
        s
    }
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of attacks the enumeration would evaluate.
pub fn enumeration_size(n_relays: usize, u: usize, mode: EnumerationMode) -> u128 {
    let u = u.min(n_relays);
    match mode {
        EnumerationMode::ExactlyU if u == 0 => 1,
        EnumerationMode::ExactlyU => 1 + binom(n_relays, u),
        EnumerationMode::AtMostU => (0..=u).map(|k| binom(n_relays, k)).sum(),
    }
}

/// All k-subsets of 0..n in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else { return out };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn attack_sets(n: usize, u: usize, mode: EnumerationMode) -> Vec<Vec<usize>> {
    let u = u.min(n);
    let mut sets = vec![Vec::new()];
    match mode {
        EnumerationMode::ExactlyU if u > 0 => sets.extend(subsets(n, u)),
        EnumerationMode::ExactlyU => {}
        EnumerationMode::AtMostU => (1..=u).for_each(|k| sets.extend(subsets(n, k))),
    }
    sets
}

fn guard(n: usize, u: usize, opts: &EnumerationOptions) -> Result<Vec<Vec<usize>>, OracleError> {
    let needed = enumeration_size(n, u, opts.mode);
    if needed > opts.cap as u128 {
        return Err(OracleError::CapExceeded { needed, cap: opts.cap });
    }
    Ok(attack_sets(n, u, opts.mode))
}

/// Exact bilevel optimum by solving the defender LP for every attack.
pub fn brute_force_interdiction(
    backend: &dyn Backend,
    net: &Network,
    relays: &RelayMap,
    u: usize,
    physics: Physics,
    opts: &EnumerationOptions,
) -> Result<EnumerationResult, OracleError> {
    let sets = guard(relays.len(), u, opts)?;
    let table: Vec<(Vec<usize>, f64)> = sets
        .into_par_iter()
        .map(|set| {
            let a = AttackVector::from_relays(net, relays, &set);
            match evaluate_attack(backend, net, &a, physics, &opts.solve) {
                Ok(e) => Ok((set, e.load_shed)),
                Err(source) => Err(OracleError::Attack { attack: set, source }),
            }
        })
        .collect::<Result<_, _>>()?;
    let value = table.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let argmax = table.iter().filter(|t| t.1 >= value - 1e-9).map(|t| t.0.clone()).collect();
    Ok(EnumerationResult { value, argmax, n_evaluated: table.len(), table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualAudit {
    pub max_abs_dual: f64,
    pub worst_attack: Vec<usize>,
    pub n_attacks: usize,
}

/// Solve the network-flow dual LP at a vertex for every attack and return
/// the largest absolute dual component seen.
pub fn audit_vertex_duals(
    backend: &dyn Backend,
    net: &Network,
    relays: &RelayMap,
    u: usize,
    opts: &EnumerationOptions,
) -> Result<DualAudit, OracleError> {
    let sets = guard(relays.len(), u, opts)?;
    let solve = SolveOptions { require_basic_solution: true, ..opts.solve.clone() };
    let per: Vec<(Vec<usize>, f64)> = sets
        .into_par_iter()
        .map(|set| {
            let a = AttackVector::from_relays(net, relays, &set);
            let m = build_nf_dual_lp(net, &a).map_err(|e| OracleError::Attack { attack: set.clone(), source: e.into() })?;
            let r = backend.solve(&m, &solve).map_err(|e| OracleError::Attack { attack: set.clone(), source: e.into() })?;
            if r.status != SolveStatus::Optimal {
                return Err(OracleError::Attack {
                    attack: set,
                    source: InterdictionError::NoSolution { what: "dual LP", status: r.status, message: r.message },
                });
            }
            if r.duals.is_none() {
                return Err(OracleError::NotBasic(set));
            }
            let worst = m
                .vars()
                .iter()
                .zip(&r.values)
                .filter(|(v, _)| v.key.role.is_dual())
                .fold(0.0f64, |acc, (_, x)| acc.max(x.abs()));
            Ok((set, worst))
        })
        .collect::<Result<_, _>>()?;
    let (worst_attack, max_abs_dual) =
        per.iter().fold((Vec::new(), 0.0f64), |acc, (s, v)| if *v > acc.1 { (s.clone(), *v) } else { acc });
    Ok(DualAudit { max_abs_dual, worst_attack, n_attacks: per.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::triad;
    use crate::netmodel::{generate_relay_map, RelayPolicy};
    use crate::solver::HighsBackend;

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(enumeration_size(10, 3, EnumerationMode::ExactlyU), 121);
        assert_eq!(enumeration_size(10, 3, EnumerationMode::AtMostU), 1 + 10 + 45 + 120);
        assert_eq!(attack_sets(5, 2, EnumerationMode::AtMostU).len() as u128, enumeration_size(5, 2, EnumerationMode::AtMostU));
    }

    #[test]
    fn triad_extremes() {
        let net = triad();
        let rm = generate_relay_map(&net, RelayPolicy::OnePerBus);
        let b = HighsBackend::new();
        let o = EnumerationOptions::default();
        let r0 = brute_force_interdiction(&b, &net, &rm, 0, Physics::Dcopf, &o).unwrap();
        assert_eq!((r0.value, r0.n_evaluated), (0.0, 1));
        let r3 = brute_force_interdiction(&b, &net, &rm, 3, Physics::Dcopf, &o).unwrap();
        assert!((r3.value - 2.0).abs() < 1e-9);
        let r1 = brute_force_interdiction(&b, &net, &rm, 1, Physics::Netflow, &o).unwrap();
        assert_eq!(r1.argmax, vec![vec![0]]);
        assert!(r1.to_csv().lines().count() == 5);
    }

    #[test]
    fn cap_is_enforced() {
        let net = triad();
        let rm = generate_relay_map(&net, RelayPolicy::OnePerBus);
        let o = EnumerationOptions { cap: 2, ..Default::default() };
        let e = brute_force_interdiction(&HighsBackend::new(), &net, &rm, 1, Physics::Dcopf, &o);
        assert!(matches!(e, Err(OracleError::CapExceeded { needed: 4, cap: 2 })));
    }

    #[test]
    fn exactly_u_matches_at_most_u() {
        let net = triad();
        let rm = generate_relay_map(&net, RelayPolicy::OnePerBus);
        let b = HighsBackend::new();
        for u in 0..=3 {
            let a = brute_force_interdiction(&b, &net, &rm, u, Physics::Dcopf, &EnumerationOptions::default()).unwrap();
            let o = EnumerationOptions { mode: EnumerationMode::AtMostU, ..Default::default() };
            let c = brute_force_interdiction(&b, &net, &rm, u, Physics::Dcopf, &o).unwrap();
            assert!((a.value - c.value).abs() < 1e-9);
        }
    }

    #[test]
    fn triad_duals_are_unit_bounded() {
        let net = triad();
        let rm = generate_relay_map(&net, RelayPolicy::OnePerBus);
        let audit = audit_vertex_duals(&HighsBackend::new(), &net, &rm, 3, &EnumerationOptions::default()).unwrap();
        assert!(audit.max_abs_dual <= 1.0 + 1e-6, "{audit:?}");
        assert_eq!(audit.n_attacks, 2);
    }
}
