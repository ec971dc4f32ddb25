//! Solver-independent models for the defender LPs and the interdiction MILPs.

mod algebraic;
mod attack;
mod builders;

pub use algebraic::{
    AlgebraicModel, ConKey, ConRole, Constraint, Indicator, ModelError, ObjSense, Role, Sense, VarId, VarKey, VarKind,
    Variable,
};
pub use attack::AttackVector;
pub use builders::{
    attack_from_values, attack_warm_start, build_bigM_milp, build_defender, build_defender_dcopf,
    build_defender_dcopf_reduced, build_defender_netflow, build_logical_milp, build_nf_dual_lp, build_nflb_milp,
    DefenderSolution, Physics,
};
