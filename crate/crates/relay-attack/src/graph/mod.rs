//! Incidence matrices, 2-edge-connected blocks, injection shift factor
//! flows, feasibility of injections, the uncongested-network thresholds and
//! the triangle-chain family where the network-flow relaxation is not tight.

mod blocks;
mod incidence;
mod isf;
mod prop4;
mod theorem;

pub use blocks::{block_decomposition, BlockDecomposition};
pub use incidence::IncidenceMatrix;
pub use isf::{
    dcopf_feasible, flow_polytope_feasible, isf_flow, DcopfFeasibility, FlowPolytopeFeasibility, IsfFlow,
    DENSE_LIMIT,
};
pub use prop4::{gen_proposition4, saturating_angle_flow, Prop4Instance};
pub use theorem::{
    angle_bound_limit_replacement, demand_threshold, max_subset_imbalance, projection_max_eigenvalue,
    random_balanced_injection, theorem2_threshold, threshold_trial, threshold_trials, ThresholdTrial, ThresholdBound,
};

use crate::netmodel::BusId;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraphError {
    #[error("network is disconnected; components (bus ids): {components:?}")]
    Disconnected { components: Vec<Vec<BusId>> },
    #[error("injections are unbalanced: sum = {sum}")]
    Unbalanced { sum: f64 },
    #[error("expected {expected} injections, got {got}")]
    Length { expected: usize, got: usize },
    #[error("reference bus {0} is out of range")]
    RefBus(usize),
    #[error("reduced Laplacian factorization failed")]
    Singular,
    #[error("network has no angle-difference bound")]
    NoAngleBound,
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Per-bus net injections d_b (positive = injection), in per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionVector(pub Vec<f64>);

impl InjectionVector {
    pub fn zeros(n: usize) -> Self {
        InjectionVector(vec![0.0; n])
    }
    pub fn l1(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn ensure_connected(net: &crate::netmodel::Network) -> Result<(), GraphError> {
    if net.is_connected() {
        return Ok(());
    }
    let components = net
        .components()
        .into_iter()
        .map(|c| c.into_iter().map(|b| net.buses()[b].id).collect())
        .collect();
    Err(GraphError::Disconnected { components })
}
