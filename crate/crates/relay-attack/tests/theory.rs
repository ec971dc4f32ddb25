mod common;

use common::{rel_close, uncongested_fixtures};
use relay_attack::graph::{
    dcopf_feasible, flow_polytope_feasible, gen_proposition4, isf_flow, saturating_angle_flow, threshold_trials,
    IncidenceMatrix,
};
use relay_attack::interdiction::nflb;
use relay_attack::model::Physics;
use relay_attack::netmodel::Budget;
use relay_attack::oracle::{assemble_gh, brute_force_interdiction, verify_total_unimodularity, EnumerationOptions, TuLimits};
use relay_attack::netmodel::aggregate_generators;
use relay_attack::solver::{HighsBackend, SolveOptions};

#[test]
fn triangle_chain_is_polytope_feasible_but_dc_infeasible() {
    let b = HighsBackend::new();
    for n in 1..=6 {
        let p = gen_proposition4(n);
        let poly = flow_polytope_feasible(&p.network, &p.injections, &b).unwrap();
        assert!(poly.feasible, "n = {n}");
        let dc = dcopf_feasible(&p.network, &p.injections, 1e-9).unwrap();
        assert!(!dc.feasible, "n = {n}");
        assert!(dc.violations.contains(&p.critical_edge));
        // the witness flow is balanced and within limits
        let inc = IncidenceMatrix::new(&p.network);
        for bus in 0..p.network.n_buses() {
            let s: f64 = (0..p.network.n_lines()).map(|k| inc.get(bus, k) as f64 * p.witness[k]).sum();
            assert!((s - p.injections.0[bus]).abs() < 1e-12);
        }
        assert!(p.witness.iter().zip(p.network.lines()).all(|(f, l)| f.abs() <= l.limit + 1e-12));
        // two routes in the last triangle: the chord carries two thirds of n
        let f = isf_flow(&p.network, &p.injections, 0).unwrap().flows[p.critical_edge];
        assert!((f.abs() - 2.0 * n as f64 / 3.0).abs() < 1e-8, "n = {n}: {f}");
        assert!((saturating_angle_flow(&p) - n as f64).abs() < 1e-12);
    }
}

#[test]
fn threshold_trials_never_fail() {
    let trials = threshold_trials(60, 11, &HighsBackend::new()).unwrap();
    assert!(trials.iter().all(|t| t.holds()));
}

#[test]
fn uncongested_fixtures_have_exact_nflb() {
    let b = HighsBackend::new();
    for f in uncongested_fixtures(6, 40) {
        for u in 1..=2 {
            let budget = Budget::count(u, f.relays.len()).unwrap();
            let r = nflb(&b, &f.net, &f.relays, &budget, &SolveOptions::default()).unwrap();
            let dc = brute_force_interdiction(&b, &f.net, &f.relays, u, Physics::Dcopf, &EnumerationOptions::default()).unwrap();
            assert!(rel_close(r.dcopf_value, dc.value, 1e-6), "{} U={u}: {} vs {}", f.name, r.dcopf_value, dc.value);
            assert!(rel_close(r.milp_value, dc.value, 1e-6));
        }
    }
}

#[test]
fn gh_matrix_is_tu_on_small_fixtures() {
    for f in common::random_fixtures(3, 900) {
        let net = aggregate_generators(&f.net);
        let m = assemble_gh(&net).unwrap();
        let r = verify_total_unimodularity(&m, &TuLimits::default()).unwrap();
        assert!(r.passed, "{}: {:?}", f.name, r.witness);
    }
}
