use super::InjectionVector;
use crate::netmodel::{Bus, BusId, GenId, Generator, Line, LineId, Network};

/// A chain of n triangles joined by bridges, with injections that fit the
/// flow polytope but admit no DC power flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop4Instance {
    pub n: usize,
    /// Injections encoded as unit generators at nodes 3i+1 and demand n at node 3n.
    pub network: Network,
    pub injections: InjectionVector,
    /// Flow-polytope feasible flow: (i+1)/2 on the edges of triangle i, i+1 on bridge i.
    pub witness: Vec<f64>,
    /// Index of the line (3n−2, 3n).
    pub critical_edge: usize,
}

/// Build Gⁿ with nodes numbered 1..=3n as bus ids.
///
/// Lines are emitted per triangle as (3i+1,3i+2), (3i+2,3i+3), (3i+1,3i+3),
/// followed by the bridge (3i+3,3i+4) when there is a next triangle.
pub fn gen_proposition4(n: usize) -> Prop4Instance {
    assert!(n >= 1, "the family starts at n = 1");
    let nodes = 3 * n;
    let nf = n as f64;
    let mut d = vec![0.0; nodes];
    for (i, x) in d.iter_mut().enumerate() {
        if (i + 1) % 3 == 1 {
            *x = 1.0;
        }
    }
    d[nodes - 1] = -nf;
    let mut lines = Vec::new();
    let mut witness = Vec::new();
    let mut push = |from: usize, to: usize, limit: f64, flow: f64| {
        lines.push(Line { id: LineId(lines.len() as u64 + 1), from: from - 1, to: to - 1, susceptance: 1.0, limit });
        witness.push(flow);
    };
    for i in 0..n {
        let t = (i as f64 + 1.0) / 2.0;
        push(3 * i + 1, 3 * i + 2, nf / 2.0, t);
        push(3 * i + 2, 3 * i + 3, nf / 2.0, t);
        push(3 * i + 1, 3 * i + 3, nf / 2.0, t);
        if i + 1 < n {
            push(3 * i + 3, 3 * i + 4, nf, i as f64 + 1.0);
        }
    }
    // the triangle chord of the last group
    let critical_edge = 4 * (n - 1) + 2;
    let buses = (0..nodes)
        .map(|i| Bus { id: BusId(i as u64 + 1), demand: if i == nodes - 1 { nf } else { 0.0 } })
        .collect();
    let generators = (0..nodes)
        .filter(|i| i % 3 == 0)
        .enumerate()
        .map(|(g, bus)| Generator { id: GenId(g as u64 + 1), bus, pmax: 1.0 })
        .collect();
    let network = Network::new(1.0, buses, lines, generators).expect("valid construction");
    Prop4Instance { n, network, injections: InjectionVector(d), witness, critical_edge }
}

/// Flow forced on (3n−2, 3n) if both routes of the last triangle were used
/// at capacity, fixing θ_{3n} = 0, θ_{3n−1} = F̄/B and θ_{3n−2} = 2F̄/B.
/// This is the counterfactual used to show infeasibility; it is not the
/// ISF flow, which splits 2/3 and 1/3 across the two routes.
pub fn saturating_angle_flow(p: &Prop4Instance) -> f64 {
    let lines = p.network.lines();
    let k = p.critical_edge;
    let (a, b, c) = (&lines[k - 2], &lines[k - 1], &lines[k]);
    let theta_mid = b.limit / b.susceptance;
    let theta_top = theta_mid + a.limit / a.susceptance;
    c.susceptance * theta_top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{dcopf_feasible, flow_polytope_feasible, isf_flow, IncidenceMatrix};
    use crate::netmodel::total_demand;
    use crate::solver::default_backend;

    #[test]
    fn base_case() {
        let p = gen_proposition4(1);
        assert_eq!(p.network.n_buses(), 3);
        assert_eq!(p.network.n_lines(), 3);
        assert_eq!(p.injections.0, vec![1.0, 0.0, -1.0]);
        assert!(p.network.lines().iter().all(|l| l.limit == 0.5));
    }

    #[test]
    fn three_triangle_chain() {
        let p = gen_proposition4(3);
        assert_eq!(p.network.n_buses(), 9);
        assert_eq!(p.network.n_lines(), 11);
        let limits: Vec<f64> = p.network.lines().iter().map(|l| l.limit).collect();
        assert_eq!(limits, vec![1.5, 1.5, 1.5, 3.0, 1.5, 1.5, 1.5, 3.0, 1.5, 1.5, 1.5]);
        let c = &p.network.lines()[p.critical_edge];
        assert_eq!((c.from + 1, c.to + 1), (7, 9));
        assert_eq!(total_demand(&p.network), 3.0);
    }

    #[test]
    fn witness_is_in_flow_polytope() {
        for n in 1..=6 {
            let p = gen_proposition4(n);
            let nf = IncidenceMatrix::new(&p.network).apply(&p.witness);
            for (x, d) in nf.iter().zip(&p.injections.0) {
                assert!((x - d).abs() < 1e-12);
            }
            for (f, l) in p.witness.iter().zip(p.network.lines()) {
                assert!(f.abs() <= l.limit + 1e-12);
            }
        }
    }

    #[test]
    fn feasibility_split() {
        let backend = default_backend();
        for n in 1..=6 {
            let p = gen_proposition4(n);
            assert!(flow_polytope_feasible(&p.network, &p.injections, backend.as_ref()).unwrap().feasible);
            let dc = dcopf_feasible(&p.network, &p.injections, 1e-6).unwrap();
            assert!(!dc.feasible);
            assert!(dc.violations.contains(&p.critical_edge));
            let isf = isf_flow(&p.network, &p.injections, 0).unwrap();
            let f = isf.flows[p.critical_edge].abs();
            assert!((f - 2.0 * n as f64 / 3.0).abs() < 1e-8);
            assert!((saturating_angle_flow(&p) - n as f64).abs() < 1e-12);
        }
    }
}
