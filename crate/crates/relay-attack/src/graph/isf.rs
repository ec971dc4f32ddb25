use super::{ensure_connected, GraphError, IncidenceMatrix, InjectionVector};
use crate::model::{AlgebraicModel, ObjSense, Role, Sense, VarKind};
use crate::netmodel::Network;
use crate::solver::{Backend, SolveOptions, SolveStatus};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

/// Reduced Laplacians up to this many buses are factored densely.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct IsfFlow {
    pub flows: Vec<f64>,
    /// Phase angles with θ_ref = 0.
    pub angles: Vec<f64>,
}

fn check_injection(net: &Network, d: &InjectionVector) -> Result<(), GraphError> {
    if d.len() != net.n_buses() {
        return Err(GraphError::Length { expected: net.n_buses(), got: d.len() });
    }
    let sum = d.sum();
    if sum.abs() > 1e-8 * d.max_abs().max(1.0) {
        return Err(GraphError::Unbalanced { sum });
    }
    Ok(())
}

/// Solve L₀ θ₀ = d₀ where L₀ is the Laplacian N B Nᵀ with the reference row
/// and column removed.
fn solve_reduced(net: &Network, d: &[f64], ref_bus: usize) -> Result<Vec<f64>, GraphError> {
    let n = net.n_buses();
    let pos = |b: usize| if b < ref_bus { Some(b) } else if b > ref_bus { Some(b - 1) } else { None };
    let m = n - 1;
    let rhs = DVector::from_iterator(m, (0..n).filter(|&b| b != ref_bus).map(|b| d[b]));
    let theta0 = if n <= DENSE_LIMIT {
        let mut lap = DMatrix::<f64>::zeros(m, m);
        for l in net.lines() {
            let (o, t, b) = (pos(l.from), pos(l.to), l.susceptance);
            if let Some(i) = o {
                lap[(i, i)] += b;
            }
            if let Some(j) = t {
                lap[(j, j)] += b;
            }
            if let (Some(i), Some(j)) = (o, t) {
                lap[(i, j)] -= b;
                lap[(j, i)] -= b;
            }
        }
        let chol = lap.cholesky().ok_or(GraphError::Singular)?;
        chol.solve(&rhs)
    } else {
        let mut coo = CooMatrix::new(m, m);
        for l in net.lines() {
            let (o, t, b) = (pos(l.from), pos(l.to), l.susceptance);
            if let Some(i) = o {
                coo.push(i, i, b);
            }
            if let Some(j) = t {
                coo.push(j, j, b);
            }
            if let (Some(i), Some(j)) = (o, t) {
                coo.push(i, j, -b);
                coo.push(j, i, -b);
            }
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc).map_err(|_| GraphError::Singular)?;
        let x = chol.solve(&DMatrix::from_column_slice(m, 1, rhs.as_slice()));
        DVector::from_column_slice(x.as_slice())
    };
    let mut theta = vec![0.0; n];
    for b in 0..n {
        if let Some(i) = pos(b) {
            theta[b] = theta0[i];
        }
    }
    Ok(theta)
}

/// The unique flow that satisfies both N f = d and Ohm's law
/// f_k = B_k(θ_o − θ_d), computed from the reduced Laplacian.
pub fn isf_flow(net: &Network, d: &InjectionVector, ref_bus: usize) -> Result<IsfFlow, GraphError> {
    ensure_connected(net)?;
    check_injection(net, d)?;
    if ref_bus >= net.n_buses() {
        return Err(GraphError::RefBus(ref_bus));
    }
    if net.n_buses() == 1 {
        return Ok(IsfFlow { flows: vec![], angles: vec![0.0] });
    }
    let angles = solve_reduced(net, &d.0, ref_bus)?;
    let flows = net
        .lines()
        .iter()
        .map(|l| l.susceptance * (angles[l.from] - angles[l.to]))
        .collect();
    Ok(IsfFlow { flows, angles })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcopfFeasibility {
    pub feasible: bool,
    pub flows: Vec<f64>,
    /// Lines with |f_k| > F̄_k + tol.
    pub violations: Vec<usize>,
}

/// Whether the ISF flow respects every thermal limit. Phase-angle bounds
/// are not part of this check.
pub fn dcopf_feasible(net: &Network, d: &InjectionVector, tol: f64) -> Result<DcopfFeasibility, GraphError> {
    let isf = isf_flow(net, d, 0)?;
    let violations: Vec<usize> = isf
        .flows
        .iter()
        .zip(net.lines())
        .enumerate()
        .filter(|(_, (f, l))| f.abs() > l.limit + tol)
        .map(|(k, _)| k)
        .collect();
    Ok(DcopfFeasibility { feasible: violations.is_empty(), flows: isf.flows, violations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPolytopeFeasibility {
    pub feasible: bool,
    pub flows: Option<Vec<f64>>,
}

/// LP feasibility of {N f = d, |f_k| ≤ F̄_k}.
pub fn flow_polytope_feasible(
    net: &Network,
    d: &InjectionVector,
    backend: &dyn Backend,
) -> Result<FlowPolytopeFeasibility, GraphError> {
    check_injection(net, d)?;
    let mut m = AlgebraicModel::new("flow_polytope", ObjSense::Minimize);
    let f: Vec<_> = net
        .lines()
        .iter()
        .enumerate()
        .map(|(k, l)| m.add_var(Role::Flow, k, VarKind::Continuous, -l.limit, l.limit))
        .collect();
    let inc = IncidenceMatrix::new(net);
    let mut rows = vec![Vec::new(); net.n_buses()];
    for (k, &fk) in f.iter().enumerate() {
        for b in [net.lines()[k].from, net.lines()[k].to] {
            rows[b].push((fk, inc.get(b, k) as f64));
        }
    }
    for (b, terms) in rows.into_iter().enumerate() {
        m.add_constraint(crate::model::ConRole::Balance, b, terms, Sense::Eq, d.0[b]);
    }
    let res = backend
        .solve(&m, &SolveOptions::default())
        .map_err(|e| GraphError::Solver(e.to_string()))?;
    match res.status {
        SolveStatus::Optimal => Ok(FlowPolytopeFeasibility {
            feasible: true,
            flows: Some(f.iter().map(|&v| res.value(v)).collect()),
        }),
        SolveStatus::Infeasible => Ok(FlowPolytopeFeasibility { feasible: false, flows: None }),
        other => Err(GraphError::Solver(format!("unexpected status {other:?}"))),
    }
}
