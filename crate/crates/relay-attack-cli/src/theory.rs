use crate::fail::{Failure, CAP};
use relay_attack::graph::{
    dcopf_feasible, flow_polytope_feasible, gen_proposition4, isf_flow, random_balanced_injection, saturating_angle_flow,
    threshold_trial, InjectionVector,
};
use relay_attack::interdiction::evaluate_attack;
use relay_attack::model::{AttackVector, Physics};
use relay_attack::netmodel::{aggregate_generators, Instance};
use relay_attack::oracle::{assemble_gh, audit_vertex_duals, verify_total_unimodularity, EnumerationOptions, TuLimits};
use relay_attack::solver::{Backend, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Outcome of one check: a one-line summary plus machine-readable detail.
pub struct Verdict {
    pub passed: bool,
    pub summary: String,
    pub detail: Value,
}

pub fn tu(inst: &Instance, limits: &TuLimits) -> Result<Verdict, Failure> {
    let net = aggregate_generators(&inst.network);
    let m = assemble_gh(&net)?;
    let r = verify_total_unimodularity(&m, limits)?;
    if r.passed && !r.proved {
        return Err(Failure::new(
            CAP,
            format!(
                "no bad minor up to order {} of a {}x{} core, but the check is incomplete; raise --max-order or --max-minors",
                r.max_order_checked,
                r.core_rows.len(),
                r.core_cols.len()
            ),
        ));
    }
    let summary = match &r.witness {
        Some(w) => format!("submatrix of order {} has determinant {}", w.rows.len(), w.det),
        None if r.ghouila_houri.as_ref().is_some_and(|g| g.failing_subset.is_some()) => {
            "a column subset admits no equitable signing".to_string()
        }
        None => format!(
            "[G h] is {}x{}, core {}x{}, totally unimodular",
            m.n_rows(),
            m.n_cols(),
            r.core_rows.len(),
            r.core_cols.len()
        ),
    };
    Ok(Verdict { passed: r.passed, summary, detail: json!({ "rows": m.n_rows(), "cols": m.n_cols(), "report": r }) })
}

pub fn duals(backend: &dyn Backend, inst: &Instance, u: usize, opts: &EnumerationOptions) -> Result<Verdict, Failure> {
    let audit = audit_vertex_duals(backend, &inst.network, &inst.relays, u, opts)?;
    let passed = audit.max_abs_dual <= 1.0 + 1e-6;
    let summary = format!(
        "max |dual| {:.6} over {} attacks with U = {u} (worst attack {:?})",
        audit.max_abs_dual, audit.n_attacks, audit.worst_attack
    );
    Ok(Verdict { passed, summary, detail: json!({ "budget": u, "audit": audit }) })
}

pub fn thm2(backend: &dyn Backend, inst: &Instance, trials: usize, seed: u64) -> Result<Verdict, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.network.n_buses();
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let d = random_balanced_injection(n, &mut rng);
        out.push(threshold_trial(&inst.network, &d, backend, 1e-7)?);
    }
    let feasible = out.iter().filter(|t| t.polytope_feasible).count();
    let failures: Vec<usize> = (0..out.len()).filter(|&i| !out[i].holds()).collect();
    let worst = out.iter().map(|t| t.worst_ratio).fold(0.0, f64::max);
    let summary = format!(
        "{} of {trials} injections at the threshold are DCOPF feasible ({} flow-polytope feasible), worst |f|/limit {worst:.4}",
        trials - failures.len(),
        feasible
    );
    let detail = json!({
        "trials": trials,
        "seed": seed,
        "polytope_feasible": feasible,
        "failing_trials": failures,
        "worst_ratio": worst,
    });
    Ok(Verdict { passed: failures.is_empty(), summary, detail })
}

pub fn prop4(backend: &dyn Backend, n: usize) -> Result<Verdict, Failure> {
    let p = gen_proposition4(n);
    let poly = flow_polytope_feasible(&p.network, &p.injections, backend)?;
    let dc = dcopf_feasible(&p.network, &p.injections, 1e-9)?;
    let l = &p.network.lines()[p.critical_edge];
    let ids = |b: usize| p.network.buses()[b].id.0;
    let flow = dc.flows[p.critical_edge];
    let saturating = saturating_angle_flow(&p);
    let passed = poly.feasible && !dc.feasible;
    let summary = format!(
        "flow-polytope {}, DCOPF {}, violating edge ({},{}) flow {:.2} vs limit {:.2} (saturating-angle flow {:.2})",
        if poly.feasible { "feasible" } else { "infeasible" },
        if dc.feasible { "feasible" } else { "infeasible" },
        ids(l.from),
        ids(l.to),
        flow.abs(),
        l.limit,
        saturating
    );
    let detail = json!({
        "n": n,
        "polytope_feasible": poly.feasible,
        "dcopf_feasible": dc.feasible,
        "critical_edge": [ids(l.from), ids(l.to)],
        "isf_flow": flow,
        "limit": l.limit,
        "saturating_angle_flow": saturating,
        "violations": dc.violations,
    });
    Ok(Verdict { passed, summary, detail })
}

/// Solve the unattacked DCOPF, read its injections back and compare the
/// LP flows with the Laplacian solve.
pub fn isf(backend: &dyn Backend, inst: &Instance, opts: &SolveOptions) -> Result<Verdict, Failure> {
    let net = &inst.network;
    let ev = evaluate_attack(backend, net, &AttackVector::none(net, &inst.relays), Physics::Dcopf, opts)?;
    let sol = &ev.solution;
    let mut d: Vec<f64> = net.buses().iter().zip(&sol.shed).map(|(b, l)| l - b.demand).collect();
    for (g, p) in net.generators().iter().zip(&sol.dispatch) {
        d[g.bus] += p;
    }
    // cancel solver round-off so the balance check sees an exact zero sum
    let drift = d.iter().sum::<f64>() / d.len() as f64;
    d.iter_mut().for_each(|x| *x -= drift);
    let isf = isf_flow(net, &InjectionVector(d), 0)?;
    let scale = sol.flows.iter().fold(1.0f64, |m, f| m.max(f.abs()));
    let diff = isf.flows.iter().zip(&sol.flows).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let passed = diff <= 1e-6 * scale;
    let summary = format!("max |f_isf - f_lp| = {diff:.3e} over {} lines (load shed {:.2})", net.n_lines(), ev.load_shed);
    Ok(Verdict { passed, summary, detail: json!({ "max_abs_difference": diff, "load_shed": ev.load_shed, "flows": isf.flows }) })
}
