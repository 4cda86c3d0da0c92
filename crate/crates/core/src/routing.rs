//! Backpressure routing over class pairs.
//!
//! Each edge carries at most one class in one direction per slot: the
//! `(class, direction)` with the largest strictly positive backlog
//! differential wins the whole link capacity.

use crate::queueing::{NetworkState, PacketClass, PacketKind, Route};
use crate::topology::{Sides, Topology};

/// Allocation chosen for one undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeAllocation {
    pub class: PacketClass,
    pub from: usize,
    pub to: usize,
    pub count: u64,
    pub differential: u64,
}

/// One optional allocation per edge, in edge order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingDecision {
    pub per_edge: Vec<Option<EdgeAllocation>>,
}

impl RoutingDecision {
    pub fn routes(&self) -> Vec<Route> {
        self.per_edge
            .iter()
            .enumerate()
            .filter_map(|(edge, alloc)| {
                alloc.map(|a| Route {
                    edge,
                    from: a.from,
                    to: a.to,
                    class: a.class,
                    count: a.count,
                })
            })
            .collect()
    }
}

/// Restricts which edges a packet kind may use. Used when the raw and
/// processed networks are kept apart (single site, non-overlapping case).
#[derive(Debug, Clone)]
pub struct ClassMask {
    raw_allowed: Vec<bool>,
    processed_allowed: Vec<bool>,
}

impl ClassMask {
    pub fn from_sides(topology: &Topology, sides: &Sides) -> Self {
        let edges = topology.edges();
        ClassMask {
            raw_allowed: edges.iter().map(|e| !sides.edge_is_processed(e)).collect(),
            processed_allowed: edges.iter().map(|e| !sides.edge_is_raw(e)).collect(),
        }
    }

    fn allows(&self, edge: usize, kind: PacketKind) -> bool {
        if kind.is_raw() {
            self.raw_allowed[edge]
        } else {
            self.processed_allowed[edge]
        }
    }
}

/// Backpressure decision from start-of-slot backlogs.
///
/// Candidates are enumerated as `(i, n, direction)` with `m -> l` before
/// `l -> m`; only a strictly larger differential displaces the incumbent,
/// so ties resolve to the lexicographically lowest candidate.
pub fn bp_route(state: &NetworkState, topology: &Topology, mask: Option<&ClassMask>) -> RoutingDecision {
    let ns = state.num_sites();
    let k = state.num_classes();
    let mut per_edge = Vec::with_capacity(topology.edges().len());
    let mut lens_a = vec![0u64; k];
    let mut lens_b = vec![0u64; k];
    let classes: Vec<PacketClass> = (0..k).map(|ci| PacketClass::from_index(ci, ns)).collect();
    for (idx, edge) in topology.edges().iter().enumerate() {
        if edge.capacity == 0 {
            per_edge.push(None);
            continue;
        }
        for (slot, len) in lens_a.iter_mut().zip(state.node_queue_lens(edge.a)) {
            *slot = len;
        }
        for (slot, len) in lens_b.iter_mut().zip(state.node_queue_lens(edge.b)) {
            *slot = len;
        }
        let mut best: Option<EdgeAllocation> = None;
        for (ci, &class) in classes.iter().enumerate() {
            if let Some(m) = mask {
                if !m.allows(idx, class.kind) {
                    continue;
                }
            }
            for (from, to, q_from, q_to) in [
                (edge.a, edge.b, lens_a[ci], lens_b[ci]),
                (edge.b, edge.a, lens_b[ci], lens_a[ci]),
            ] {
                if q_from <= q_to {
                    continue;
                }
                let differential = q_from - q_to;
                if best.map_or(true, |b| differential > b.differential) && may_leave(state, topology, from, class) {
                    best = Some(EdgeAllocation {
                        class,
                        from,
                        to,
                        count: edge.capacity as u64,
                        differential,
                    });
                }
            }
        }
        per_edge.push(best);
    }
    RoutingDecision { per_edge }
}

/// Raw packets never leave their own site; processed packets never leave d.
fn may_leave(state: &NetworkState, topology: &Topology, node: usize, class: PacketClass) -> bool {
    if class.kind.is_raw() {
        node != state.site_node(class.site)
    } else {
        node != topology.destination()
    }
}
