//! The network-flow lower bound, attack evaluation, the heuristic big-M and
//! the comparison protocol between the three single-level formulations.

mod experiment;

pub use experiment::{
    parse_results_csv, run_experiment, ComparisonRow, ExperimentConfig, MPolicy, SweepSummary, CSV_HEADER, DEFAULT_BUDGETS,
};

use crate::model::{
    attack_from_values, attack_warm_start, build_bigM_milp, build_defender, build_defender_dcopf_reduced,
    build_logical_milp, build_nflb_milp, AttackVector, DefenderSolution, ModelError, Physics,
};
use crate::netmodel::{total_demand, Budget, Network, RelayMap};
use crate::solver::{Backend, Emphasis, SolveOptions, SolveResult, SolveStatus, SolverError};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum InterdictionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{what} returned no solution (status {status:?}{})", .message.as_deref().map(|m| format!(": {m}")).unwrap_or_default())]
    NoSolution { what: &'static str, status: SolveStatus, message: Option<String> },
    #[error("the step-2 LP carries no basic duals")]
    NoDuals,
    #[error("formulation eq8 needs M")]
    MissingBigM,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("results file: {0}")]
    Csv(#[from] csv::Error),
}

fn need_solution(what: &'static str, r: &SolveResult) -> Result<(), InterdictionError> {
    if r.status.has_solution() {
        Ok(())
    } else {
        Err(InterdictionError::NoSolution { what, status: r.status, message: r.message.clone() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub load_shed: f64,
    pub solution: DefenderSolution,
    pub result: SolveResult,
}

/// Solve the defender LP for a fixed attack under the chosen physics.
pub fn evaluate_attack(
    backend: &dyn Backend,
    net: &Network,
    attack: &AttackVector,
    physics: Physics,
    opts: &SolveOptions,
) -> Result<Evaluation, InterdictionError> {
    let m = build_defender(net, attack, physics)?;
    let result = backend.solve(&m, opts)?;
    if result.status != SolveStatus::Optimal {
        return Err(InterdictionError::NoSolution { what: "defender LP", status: result.status, message: result.message });
    }
    let solution = DefenderSolution::extract(net, &m, &result.values);
    Ok(Evaluation { load_shed: result.objective, solution, result })
}

/// Outcome of the two-step bound: the network-flow MILP and the DCOPF
/// re-evaluation of its attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NflbReport {
    pub attack: AttackVector,
    /// Optimum (or incumbent) of the network-flow interdiction MILP.
    pub milp_value: f64,
    /// Load shed of that attack under DCOPF. This is the bound.
    pub dcopf_value: f64,
    /// False when the MILP stopped before proving optimality.
    pub milp_optimal: bool,
    pub milp_result: SolveResult,
    pub lp_result: SolveResult,
    pub budget: Budget,
    pub total_time_s: f64,
}

/// Solve the network-flow interdiction MILP, fix its attack and re-solve
/// the defender under DCOPF.
///
/// The step-2 LP is always solved for a basic solution so the heuristic M
/// can be read from it.
pub fn nflb(
    backend: &dyn Backend,
    net: &Network,
    relays: &RelayMap,
    budget: &Budget,
    opts: &SolveOptions,
) -> Result<NflbReport, InterdictionError> {
    let milp = build_nflb_milp(net, relays, budget)?;
    let milp_result = backend.solve(&milp, opts)?;
    need_solution("network-flow MILP", &milp_result)?;
    let attack = attack_from_values(&milp, &milp_result.values, relays.len(), net);
    attack.check(net, Some(relays), true)?;

    let lp = build_defender_dcopf_reduced(net, &attack)?;
    let lp_opts = SolveOptions {
        require_basic_solution: true,
        warm_start: Default::default(),
        target_objective: None,
        emphasis: Emphasis::Default,
        ..opts.clone()
    };
    let lp_result = backend.solve(&lp, &lp_opts)?;
    if lp_result.status != SolveStatus::Optimal {
        return Err(InterdictionError::NoSolution { what: "step-2 DCOPF", status: lp_result.status, message: lp_result.message });
    }
    Ok(NflbReport {
        milp_value: milp_result.objective,
        dcopf_value: lp_result.objective,
        milp_optimal: milp_result.status == SolveStatus::Optimal,
        total_time_s: milp_result.wall_time_s + lp_result.wall_time_s,
        attack,
        milp_result,
        lp_result,
        budget: *budget,
    })
}

impl NflbReport {
    /// Checks that hold for every run: the DCOPF value cannot be below the
    /// network-flow value and cannot exceed total demand.
    pub fn check_invariants(&self, net: &Network, tol: f64) -> Result<(), String> {
        if self.milp_optimal && self.dcopf_value < self.milp_value - tol {
            return Err(format!("DCOPF value {} below MILP value {}", self.dcopf_value, self.milp_value));
        }
        let d = total_demand(net);
        if self.dcopf_value > d + tol {
            return Err(format!("DCOPF value {} exceeds total demand {d}", self.dcopf_value));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicM {
    pub m: f64,
    pub max_abs_dual: f64,
}

/// M = ceil(max |dual|) over all row duals and reduced costs, at least 1.
pub fn heuristic_m_from_duals(lp_result: &SolveResult) -> Result<HeuristicM, InterdictionError> {
    let max = lp_result.max_abs_dual().ok_or(InterdictionError::NoDuals)?;
    // duals of exactly 1 come back as 1 + 1e-12 often enough to matter
    let m = (max - 1e-9).ceil().max(1.0);
    Ok(HeuristicM { m, max_abs_dual: max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Network-flow interdiction with unit dual bounds.
    Eq4,
    /// DCOPF interdiction with indicator constraints.
    Eq7,
    /// DCOPF interdiction with a scalar big-M.
    Eq8,
}

impl std::str::FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "eq4" => Ok(Formulation::Eq4),
            "eq7" => Ok(Formulation::Eq7),
            "eq8" => Ok(Formulation::Eq8),
            other => Err(format!("unknown formulation {other:?}; expected eq4, eq7 or eq8")),
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formulation::Eq4 => "eq4",
            Formulation::Eq7 => "eq7",
            Formulation::Eq8 => "eq8",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonSpec {
    pub big_m: Option<f64>,
    /// Stop once the incumbent reaches this load shed.
    pub target: Option<f64>,
    /// Attack handed to the solver as a partial starting point.
    pub warm_start: Option<AttackVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationRun {
    pub formulation: Formulation,
    pub status: SolveStatus,
    pub value: f64,
    pub best_bound: f64,
    pub time_s: f64,
    pub gap: f64,
    /// First incumbent time at or above the target, when one was given.
    pub time_to_target_s: Option<f64>,
    pub result: SolveResult,
}

/// One solve of a formulation under the comparison protocol: eq7 and eq8
/// run with the feasibility emphasis; eq8 needs M.
pub fn run_comparison(
    backend: &dyn Backend,
    net: &Network,
    relays: &RelayMap,
    budget: &Budget,
    formulation: Formulation,
    spec: &ComparisonSpec,
    opts: &SolveOptions,
) -> Result<FormulationRun, InterdictionError> {
    let model = match formulation {
        Formulation::Eq4 => build_nflb_milp(net, relays, budget)?,
        Formulation::Eq7 => build_logical_milp(net, relays, budget)?,
        Formulation::Eq8 => build_bigM_milp(net, relays, budget, spec.big_m.ok_or(InterdictionError::MissingBigM)?)?,
    };
    let mut o = opts.clone();
    o.target_objective = spec.target;
    if formulation != Formulation::Eq4 {
        o.emphasis = Emphasis::FindFeasible;
    }
    if let Some(a) = &spec.warm_start {
        o.warm_start = attack_warm_start(&model, a).into_iter().collect();
    }
    let result = backend.solve(&model, &o)?;
    need_solution("comparison MILP", &result)?;
    let time_to_target_s = spec.target.and_then(|t| result.time_to_reach(t, 1e-6 * t.abs().max(1.0)));
    Ok(FormulationRun {
        formulation,
        status: result.status,
        value: result.objective,
        best_bound: result.best_bound,
        time_s: result.wall_time_s,
        gap: result.gap,
        time_to_target_s,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::triad;
    use crate::netmodel::{generate_relay_map, RelayPolicy};
    use crate::solver::{DualValues, HighsBackend};

    fn setup() -> (Network, RelayMap) {
        let net = triad();
        let rm = generate_relay_map(&net, RelayPolicy::OnePerBus);
        (net, rm)
    }

    #[test]
    fn evaluate_extremes() {
        let (net, rm) = setup();
        let b = HighsBackend::new();
        let o = SolveOptions::default();
        let none = AttackVector::none(&net, &rm);
        let all = AttackVector::everything(&net, &rm);
        assert!(evaluate_attack(&b, &net, &none, Physics::Dcopf, &o).unwrap().load_shed.abs() < 1e-9);
        let e = evaluate_attack(&b, &net, &all, Physics::Dcopf, &o).unwrap();
        assert!((e.load_shed - 2.0).abs() < 1e-9);
        assert!(e.solution.max_violation(&net, &all) < 1e-7);
        for r in 0..3 {
            let a = AttackVector::from_relays(&net, &rm, &[r]);
            let nf = evaluate_attack(&b, &net, &a, Physics::Netflow, &o).unwrap().load_shed;
            let dc = evaluate_attack(&b, &net, &a, Physics::Dcopf, &o).unwrap().load_shed;
            assert!(nf <= dc + 1e-9);
        }
    }

    #[test]
    fn nflb_on_triad() {
        let (net, rm) = setup();
        let b = HighsBackend::new();
        let r = nflb(&b, &net, &rm, &Budget::count(1, 3).unwrap(), &SolveOptions::default()).unwrap();
        // attacking the generator bus sheds everything
        assert!((r.milp_value - 2.0).abs() < 1e-6);
        assert!((r.dcopf_value - 2.0).abs() < 1e-6);
        assert_eq!(r.attack.attacked_relays(), vec![0]);
        assert!(r.check_invariants(&net, 1e-6).is_ok());
        assert!(r.milp_optimal);
        let zero = nflb(&b, &net, &rm, &Budget::count(0, 3).unwrap(), &SolveOptions::default()).unwrap();
        assert!(zero.dcopf_value.abs() < 1e-9);
    }

    #[test]
    fn heuristic_m_rounding() {
        let mut r = SolveResult {
            backend: "t".into(),
            status: SolveStatus::Optimal,
            objective: 0.0,
            best_bound: 0.0,
            gap: 0.0,
            wall_time_s: 0.0,
            values: vec![],
            duals: Some(DualValues { rows: vec![0.5, -1.0], columns: vec![0.0] }),
            incumbents: vec![],
            message: None,
        };
        assert_eq!(heuristic_m_from_duals(&r).unwrap().m, 1.0);
        r.duals = Some(DualValues { rows: vec![-1.2], columns: vec![] });
        assert_eq!(heuristic_m_from_duals(&r).unwrap().m, 2.0);
        r.duals = Some(DualValues { rows: vec![], columns: vec![] });
        assert_eq!(heuristic_m_from_duals(&r).unwrap().m, 1.0);
        r.duals = None;
        assert!(matches!(heuristic_m_from_duals(&r), Err(InterdictionError::NoDuals)));
    }

    #[test]
    fn comparison_needs_m() {
        let (net, rm) = setup();
        let b = HighsBackend::new();
        let budget = Budget::count(1, 3).unwrap();
        let err = run_comparison(&b, &net, &rm, &budget, Formulation::Eq8, &ComparisonSpec::default(), &SolveOptions::default());
        assert!(matches!(err, Err(InterdictionError::MissingBigM)));
        let run = run_comparison(
            &b,
            &net,
            &rm,
            &budget,
            Formulation::Eq8,
            &ComparisonSpec { big_m: Some(2.0), target: Some(2.0), warm_start: None },
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(run.value >= 2.0 - 1e-6);
        assert!(run.time_to_target_s.is_some());
    }

    #[test]
    fn formulation_names() {
        for f in [Formulation::Eq4, Formulation::Eq7, Formulation::Eq8] {
            assert_eq!(f.to_string().parse::<Formulation>().unwrap(), f);
        }
        assert!("eq5".parse::<Formulation>().is_err());
    }
}
