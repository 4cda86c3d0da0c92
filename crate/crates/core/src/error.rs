use thiserror::Error;

use crate::topology::NodeId;

/// Problems detected while reading or validating a scenario.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("schema violation at `{key}`: {message}")]
    Schema { key: String, message: String },
    #[error("invalid topology: {0}")]
    Invariant(String),
}

/// A slot decision broke one of the physical constraints of the network.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintViolation {
    #[error("edge ({a},{b}): {used} packets scheduled but capacity is {capacity}")]
    LinkCapacity {
        a: NodeId,
        b: NodeId,
        used: u64,
        capacity: u32,
    },
    #[error("route {from}->{to} does not follow an edge")]
    NotAnEdge { from: NodeId, to: NodeId },
    #[error("computation node {node}: {combined} pairs exceed min(C, X1, X2) = {limit}")]
    ComputeCapacity {
        node: NodeId,
        combined: usize,
        limit: u64,
    },
    #[error("computation node {node}: tag {tag} is not present in both computation queues")]
    UnmatchedTag { node: NodeId, tag: u64 },
    #[error("decision shape does not match the network ({0})")]
    Shape(&'static str),
}

/// Errors surfaced by a simulation run.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("slot {slot}: {violation}")]
    Constraint {
        slot: u64,
        violation: ConstraintViolation,
    },
    #[error("slot {slot}: invariant broken: {message}")]
    Invariant { slot: u64, message: String },
    #[error("coupled scenarios differ in more than the policy: {0}")]
    ScenarioMismatch(String),
}

/// LP construction or solution failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("pivot limit of {limit} reached (objective so far {partial})")]
    Degenerate { limit: u64, partial: f64 },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("instance too large for the path oracle: {nodes} nodes, {edges} edges (cap 6/10)")]
    TooLarge { nodes: usize, edges: usize },
    #[error("{0}")]
    Invalid(String),
}
