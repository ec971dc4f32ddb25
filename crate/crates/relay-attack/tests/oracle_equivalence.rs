mod common;

use common::{rel_close, Fixture};
use proptest::prelude::*;
use relay_attack::interdiction::{nflb, run_comparison, ComparisonSpec, Formulation};
use relay_attack::model::Physics;
use relay_attack::netmodel::random::{random_network, RandomSpec};
use relay_attack::netmodel::Budget;
use relay_attack::oracle::{brute_force_interdiction, EnumerationOptions};
use relay_attack::solver::{backend_with, Capability, HighsBackend, SolveOptions};

fn fixture(n: usize, seed: u64) -> Fixture {
    Fixture::new("p", random_network(&RandomSpec::default(), n, seed))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn network_flow_milp_matches_enumeration(n in 4usize..=7, seed in any::<u64>(), u in 1usize..=3) {
        let f = fixture(n, seed);
        let b = HighsBackend::new();
        let budget = Budget::count(u, f.relays.len()).unwrap();
        let r = nflb(&b, &f.net, &f.relays, &budget, &SolveOptions::default()).unwrap();
        let eo = EnumerationOptions::default();
        let nf = brute_force_interdiction(&b, &f.net, &f.relays, u, Physics::Netflow, &eo).unwrap();
        let dc = brute_force_interdiction(&b, &f.net, &f.relays, u, Physics::Dcopf, &eo).unwrap();
        prop_assert!(rel_close(r.milp_value, nf.value, 1e-6), "milp {} vs enumeration {}", r.milp_value, nf.value);
        // NFLB is the DC value of one feasible attack
        prop_assert!(r.dcopf_value <= dc.value + 1e-6);
        prop_assert!(r.dcopf_value >= r.milp_value - 1e-6);
        let table = dc.table.iter().find(|(s, _)| *s == r.attack.attacked_relays());
        if let Some((_, v)) = table {
            prop_assert!((v - r.dcopf_value).abs() < 1e-6);
        }
    }

    #[test]
    fn large_m_recovers_the_bilevel_optimum(n in 4usize..=6, seed in any::<u64>(), u in 1usize..=2) {
        let f = fixture(n, seed);
        let b = HighsBackend::new();
        let budget = Budget::count(u, f.relays.len()).unwrap();
        let dc = brute_force_interdiction(&b, &f.net, &f.relays, u, Physics::Dcopf, &EnumerationOptions::default()).unwrap();
        let spec = ComparisonSpec { big_m: Some(1e3), ..Default::default() };
        let run = run_comparison(&b, &f.net, &f.relays, &budget, Formulation::Eq8, &spec, &SolveOptions::default()).unwrap();
        prop_assert!(rel_close(run.value, dc.value, 1e-5), "eq8 {} vs enumeration {}", run.value, dc.value);
    }
}

#[test]
fn indicator_formulation_matches_enumeration() {
    let Some(ind) = backend_with(Capability::IndicatorConstraints) else {
        eprintln!("no backend with indicator constraints; skipping");
        return;
    };
    let b = HighsBackend::new();
    for f in common::random_fixtures(8, 300) {
        let u = 2;
        let budget = Budget::count(u, f.relays.len()).unwrap();
        let dc = brute_force_interdiction(&b, &f.net, &f.relays, u, Physics::Dcopf, &EnumerationOptions::default()).unwrap();
        let run = run_comparison(ind.as_ref(), &f.net, &f.relays, &budget, Formulation::Eq7, &ComparisonSpec::default(), &SolveOptions::default())
            .unwrap();
        assert!(rel_close(run.value, dc.value, 1e-5), "{}: eq7 {} vs enumeration {}", f.name, run.value, dc.value);
    }
}
