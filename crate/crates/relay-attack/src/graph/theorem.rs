use super::{block_decomposition, dcopf_feasible, flow_polytope_feasible, isf_flow, GraphError, InjectionVector};
use crate::netmodel::random::{random_network, RandomSpec};
use crate::netmodel::{total_demand, Network};
use crate::solver::Backend;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Capacity threshold above which thermal limits on non-tree edges cannot
/// make a flow-polytope feasible injection DC-infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdBound {
    pub threshold: f64,
    pub non_tree_edges: Vec<usize>,
    pub r: usize,
    pub b_ratio: f64,
}

fn susceptance_ratio(net: &Network) -> f64 {
    let (lo, hi) = net
        .lines()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l.susceptance), hi.max(l.susceptance)));
    if net.lines().is_empty() {
        1.0
    } else {
        hi / lo
    }
}

/// √(B_max/B_min) · √(r(G) − 1)/2 · ‖d‖₁.
pub fn theorem2_threshold(net: &Network, l1_of_d: f64) -> Result<ThresholdBound, GraphError> {
    let blocks = block_decomposition(net)?;
    let b_ratio = susceptance_ratio(net);
    let r = blocks.r;
    let threshold = b_ratio.sqrt() * ((r as f64 - 1.0).max(0.0)).sqrt() / 2.0 * l1_of_d;
    Ok(ThresholdBound { threshold, non_tree_edges: blocks.non_tree_edges, r, b_ratio })
}

/// The demand-based variant √(B_max/B_min) · √(r(G) − 1) · ‖D‖₁, which covers
/// every injection the defender can produce (‖d‖₁ ≤ 2‖D‖₁).
pub fn demand_threshold(net: &Network) -> Result<ThresholdBound, GraphError> {
    let mut b = theorem2_threshold(net, 2.0 * total_demand(net))?;
    b.threshold = b.b_ratio.sqrt() * ((b.r as f64 - 1.0).max(0.0)).sqrt() * total_demand(net);
    Ok(b)
}

/// Replace F̄_k by 2B_kΘ on lines where the angle bound is the tighter limit.
pub fn angle_bound_limit_replacement(net: &Network) -> Result<Network, GraphError> {
    let theta = net.angle_bound().ok_or(GraphError::NoAngleBound)?;
    let limits: Vec<f64> = net
        .lines()
        .iter()
        .map(|l| {
            let cap = 2.0 * l.susceptance * theta;
            if cap < l.limit {
                cap
            } else {
                l.limit
            }
        })
        .collect();
    net.with_limits(&limits).map_err(|e| GraphError::Solver(e.to_string()))
}

/// max over subsets S of |Σ_{i∈S} d_i|. For zero-sum d this equals ½‖d‖₁.
pub fn max_subset_imbalance(d: &InjectionVector) -> f64 {
    let pos: f64 = d.0.iter().filter(|&&x| x > 0.0).sum();
    let neg: f64 = d.0.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    pos.max(neg)
}

/// Largest eigenvalue of Aᵀ(AAᵀ)⁻¹A for a full-row-rank A.
pub fn projection_max_eigenvalue(a: &DMatrix<f64>) -> Option<f64> {
    let gram = a * a.transpose();
    let inv = gram.try_inverse()?;
    let p = a.transpose() * inv * a;
    let sym = (&p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    eig.iter().cloned().reduce(f64::max)
}

/// Outcome of testing the uncongested-network threshold on one injection.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTrial {
    pub l1: f64,
    pub threshold: f64,
    pub polytope_feasible: bool,
    pub dcopf_feasible: bool,
    /// max |f_k| / F̄_k of the ISF flow over the block edges.
    pub worst_ratio: f64,
}

impl ThresholdTrial {
    /// The implication "flow-polytope feasible ⇒ DC feasible".
    pub fn holds(&self) -> bool {
        !self.polytope_feasible || self.dcopf_feasible
    }
}

/// Rebuild the limits so block edges sit exactly at the threshold for ‖d‖₁
/// and bridges carry their (unique) flow with a hair of slack, then test
/// both feasibility notions.
pub fn threshold_trial(
    net: &Network,
    d: &InjectionVector,
    backend: &dyn Backend,
    tol: f64,
) -> Result<ThresholdTrial, GraphError> {
    let bound = theorem2_threshold(net, d.l1())?;
    let isf = isf_flow(net, d, 0)?;
    let mut limits: Vec<f64> = isf.flows.iter().map(|f| f.abs() * (1.0 + 1e-9) + tol).collect();
    for &k in &bound.non_tree_edges {
        limits[k] = bound.threshold;
    }
    let probe = net.with_limits(&limits).map_err(|e| GraphError::Solver(e.to_string()))?;
    let poly = flow_polytope_feasible(&probe, d, backend)?;
    let dc = dcopf_feasible(&probe, d, tol)?;
    let worst_ratio = bound
        .non_tree_edges
        .iter()
        .map(|&k| if limits[k] > 0.0 { isf.flows[k].abs() / limits[k] } else if isf.flows[k].abs() > tol { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(ThresholdTrial {
        l1: d.l1(),
        threshold: bound.threshold,
        polytope_feasible: poly.feasible,
        dcopf_feasible: dc.feasible,
        worst_ratio,
    })
}

/// Random zero-sum injection with entries drawn from [-1, 1].
pub fn random_balanced_injection(n: usize, rng: &mut impl Rng) -> InjectionVector {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mean = raw.iter().sum::<f64>() / n.max(1) as f64;
    InjectionVector(raw.into_iter().map(|x| x - mean).collect())
}

/// `trials` random networks (4 to 30 buses) with one random balanced
/// injection each.
pub fn threshold_trials(trials: usize, seed: u64, backend: &dyn Backend) -> Result<Vec<ThresholdTrial>, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomSpec::default();
    (0..trials)
        .map(|_| {
            let n = rng.random_range(4..=30);
            let net = random_network(&spec, n, rng.random());
            let d = random_balanced_injection(n, &mut rng);
            threshold_trial(&net, &d, backend, 1e-7)
        })
        .collect()
}
