//! Worst-case relay attacks on transmission networks.
//!
//! An attacker switches off up to `U` relays. Every generator, line and bus
//! behind an attacked relay drops out, and the operator re-dispatches to
//! minimise load shed. This crate builds the bilevel interdiction models,
//! solves them through [`solver::Backend`], and checks several structural
//! results about the network-flow relaxation.

pub mod graph;
pub mod interdiction;
pub mod model;
pub mod netmodel;
pub mod oracle;
pub mod solver;
