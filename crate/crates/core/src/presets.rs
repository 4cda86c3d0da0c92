//! Ready-made topologies used by the tests, the bundled scenario files and
//! the documentation.

use crate::arrivals::ArrivalSpec;
use crate::policy::PolicySpec;
use crate::scenario::Scenario;
use crate::topology::{ComputeSite, Edge, NodeId, Topology};

/// Link capacity of every grid edge.
pub const GRID_LINK_CAPACITY: u32 = 5;

/// Roles of the grid nodes. Node `(row, col)` has id `4 * row + col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPlacement {
    pub sources: [NodeId; 2],
    pub destination: NodeId,
    pub computation: [NodeId; 4],
}

pub const GRID_PLACEMENT: GridPlacement = GridPlacement {
    sources: [0, 15],
    destination: 3,
    computation: [5, 6, 9, 10],
};

/// 4x4 grid, every link of capacity 5, four computation nodes of capacity `c`.
pub fn grid4x4(c: u32) -> Topology {
    grid4x4_with(GRID_PLACEMENT, c)
}

pub fn grid4x4_with(placement: GridPlacement, c: u32) -> Topology {
    let mut edges = Vec::with_capacity(24);
    for row in 0..4 {
        for col in 0..4 {
            let v = 4 * row + col;
            if col < 3 {
                edges.push(Edge {
                    a: v,
                    b: v + 1,
                    capacity: GRID_LINK_CAPACITY,
                });
            }
            if row < 3 {
                edges.push(Edge {
                    a: v,
                    b: v + 4,
                    capacity: GRID_LINK_CAPACITY,
                });
            }
        }
    }
    let sites = placement
        .computation
        .iter()
        .map(|&node| ComputeSite { node, capacity: c })
        .collect();
    Topology::new(16, edges, placement.sources, placement.destination, sites).expect("grid preset is valid")
}

/// Two lobes of four nodes each that meet only at the computation node.
///
/// Raw lobe: `s1 = 0`, `s2 = 1`, relays 2 and 3. Computation node 4.
/// Processed lobe: relays 5, 6, 7 and `d = 8`. Every link has capacity 2 and
/// the computation node combines up to 3 pairs per slot.
pub fn two_lobe() -> Topology {
    let edges = [
        (0, 1),
        (0, 2),
        (1, 3),
        (2, 3),
        (2, 4),
        (3, 4),
        (4, 5),
        (4, 6),
        (5, 7),
        (6, 7),
        (5, 8),
        (7, 8),
    ]
    .map(|(a, b)| Edge { a, b, capacity: 2 });
    Topology::new(9, edges.to_vec(), [0, 1], 8, vec![ComputeSite { node: 4, capacity: 3 }])
        .expect("two-lobe preset is valid")
}

/// Triangle on `s1 = 0`, `s2 = 1`, `d = 2`, unit links, one computation
/// node of capacity 10 at `site`.
pub fn triangle(site: NodeId) -> Topology {
    Topology::new(
        3,
        vec![
            Edge { a: 0, b: 1, capacity: 1 },
            Edge { a: 0, b: 2, capacity: 1 },
            Edge { a: 1, b: 2, capacity: 1 },
        ],
        [0, 1],
        2,
        vec![ComputeSite { node: site, capacity: 10 }],
    )
    .expect("triangle preset is valid")
}

/// Grid scenario with Poisson arrivals.
pub fn grid_scenario(c: u32, policy: PolicySpec, rate: f64, horizon: u64, seed: u64) -> Scenario {
    Scenario::new(grid4x4(c), ArrivalSpec::poisson(rate), policy, horizon, seed).expect("grid scenario is valid")
}
