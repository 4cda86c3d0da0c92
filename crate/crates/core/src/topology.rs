//! Network graph, link capacities and computation sites.

use std::collections::VecDeque;

use crate::error::ScenarioError;

/// Dense node identifier, `0..num_nodes`.
pub type NodeId = usize;

/// Undirected link. Both transmission directions share `capacity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    /// Packets per slot, summed over both directions.
    pub capacity: u32,
}

impl Edge {
    pub fn other(&self, node: NodeId) -> NodeId {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// A node that can combine raw pairs, with its per-slot capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputeSite {
    pub node: NodeId,
    /// Processed packets produced per slot.
    pub capacity: u32,
}

/// Raw and processed halves of a topology split at a computation node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sides {
    /// Nodes reachable from the sources once the split node is removed.
    pub raw: Vec<bool>,
    /// Nodes reachable from the destination once the split node is removed.
    pub processed: Vec<bool>,
}

impl Sides {
    /// True when the edge belongs to the raw half (touches a raw-side node).
    pub fn edge_is_raw(&self, edge: &Edge) -> bool {
        self.raw[edge.a] || self.raw[edge.b]
    }

    pub fn edge_is_processed(&self, edge: &Edge) -> bool {
        self.processed[edge.a] || self.processed[edge.b]
    }
}

/// Validated, immutable network description.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    num_nodes: usize,
    edges: Vec<Edge>,
    sources: [NodeId; 2],
    destination: NodeId,
    sites: Vec<ComputeSite>,
    adjacency: Vec<Vec<(NodeId, usize)>>,
    site_index: Vec<Option<usize>>,
}

impl Topology {
    pub fn new(
        num_nodes: usize,
        edges: Vec<Edge>,
        sources: [NodeId; 2],
        destination: NodeId,
        sites: Vec<ComputeSite>,
    ) -> Result<Self, ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invariant(msg));
        if num_nodes == 0 {
            return invalid("network has no nodes".into());
        }
        for (what, node) in [
            ("source s1", sources[0]),
            ("source s2", sources[1]),
            ("destination", destination),
        ] {
            if node >= num_nodes {
                return invalid(format!("{what} {node} is not a valid node id"));
            }
        }
        if sources[0] == sources[1] {
            return invalid(format!("sources must differ (both are {})", sources[0]));
        }

        let mut adjacency = vec![Vec::new(); num_nodes];
        for (idx, edge) in edges.iter().enumerate() {
            if edge.a >= num_nodes || edge.b >= num_nodes {
                return invalid(format!(
                    "edge ({},{}) references an unknown node",
                    edge.a, edge.b
                ));
            }
            if edge.a == edge.b {
                return invalid(format!("self-loop on node {}", edge.a));
            }
            if adjacency[edge.a]
                .iter()
                .any(|&(other, _)| other == edge.b)
            {
                return invalid(format!("duplicate edge ({},{})", edge.a, edge.b));
            }
            adjacency[edge.a].push((edge.b, idx));
            adjacency[edge.b].push((edge.a, idx));
        }

        if sites.is_empty() {
            return invalid("at least one computation node is required".into());
        }
        let mut site_index = vec![None; num_nodes];
        for (idx, site) in sites.iter().enumerate() {
            if site.node >= num_nodes {
                return invalid(format!(
                    "computation node {} is not a valid node id",
                    site.node
                ));
            }
            if site_index[site.node].replace(idx).is_some() {
                return invalid(format!("computation node {} listed twice", site.node));
            }
        }

        Ok(Topology {
            num_nodes,
            edges,
            sources,
            destination,
            sites,
            adjacency,
            site_index,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sources(&self) -> [NodeId; 2] {
        self.sources
    }

    pub fn destination(&self) -> NodeId {
        self.destination
    }

    pub fn sites(&self) -> &[ComputeSite] {
        &self.sites
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// Position of `node` in the computation-site list.
    pub fn site_index(&self, node: NodeId) -> Option<usize> {
        self.site_index.get(node).copied().flatten()
    }

    /// `(neighbour, edge index)` pairs.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, usize)] {
        &self.adjacency[node]
    }

    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|&&(other, _)| other == b)
            .map(|&(_, idx)| idx)
    }

    /// Nodes reachable from `starts` in the graph with `removed` deleted.
    pub fn reachable_without(&self, starts: &[NodeId], removed: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.num_nodes];
        let mut frontier = VecDeque::new();
        for &s in starts {
            if s != removed && !seen[s] {
                seen[s] = true;
                frontier.push_back(s);
            }
        }
        while let Some(node) = frontier.pop_front() {
            for &(next, _) in &self.adjacency[node] {
                if next != removed && !seen[next] {
                    seen[next] = true;
                    frontier.push_back(next);
                }
            }
        }
        seen
    }

    /// Splits the graph at `n` into a raw half (around the sources) and a
    /// processed half (around the destination). `None` when they overlap.
    pub fn nonoverlap_sides(&self, n: NodeId) -> Option<Sides> {
        let raw = self.reachable_without(&self.sources, n);
        let processed = if self.destination == n {
            vec![false; self.num_nodes]
        } else {
            self.reachable_without(&[self.destination], n)
        };
        if raw.iter().zip(&processed).any(|(&r, &p)| r && p) {
            None
        } else {
            Some(Sides { raw, processed })
        }
    }

    /// Whether removing `n` separates the source side from the destination side.
    pub fn check_nonoverlap(&self, n: NodeId) -> bool {
        self.nonoverlap_sides(n).is_some()
    }

    /// Copy with one edge capacity replaced.
    pub fn with_edge_capacity(&self, edge: usize, capacity: u32) -> Topology {
        let mut t = self.clone();
        t.edges[edge].capacity = capacity;
        t
    }

    /// Copy with every computation capacity set to `capacity`.
    pub fn with_uniform_compute(&self, capacity: u32) -> Topology {
        let mut t = self.clone();
        for site in &mut t.sites {
            site.capacity = capacity;
        }
        t
    }

    pub fn with_site_capacity(&self, site: usize, capacity: u32) -> Topology {
        let mut t = self.clone();
        t.sites[site].capacity = capacity;
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(a: NodeId, b: NodeId, capacity: u32) -> Edge {
        Edge { a, b, capacity }
    }

    // nodes: 0 = s1, 1 = s2, 2 = d
    fn triangle(site: NodeId) -> Topology {
        Topology::new(
            3,
            vec![edge(0, 1, 1), edge(0, 2, 1), edge(1, 2, 1)],
            [0, 1],
            2,
            vec![ComputeSite {
                node: site,
                capacity: 10,
            }],
        )
        .unwrap()
    }

    #[test]
    fn rejects_duplicate_edge_either_orientation() {
        let err = Topology::new(
            3,
            vec![edge(0, 1, 1), edge(1, 0, 2)],
            [0, 1],
            2,
            vec![ComputeSite { node: 2, capacity: 1 }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate edge"), "{err}");
    }

    #[test]
    fn rejects_self_loop_and_equal_sources() {
        assert!(Topology::new(
            2,
            vec![edge(1, 1, 1)],
            [0, 1],
            1,
            vec![ComputeSite { node: 1, capacity: 1 }]
        )
        .is_err());
        assert!(Topology::new(
            2,
            vec![edge(0, 1, 1)],
            [0, 0],
            1,
            vec![ComputeSite { node: 1, capacity: 1 }]
        )
        .is_err());
    }

    #[test]
    fn rejects_unknown_site() {
        let err = Topology::new(
            2,
            vec![],
            [0, 1],
            1,
            vec![ComputeSite { node: 7, capacity: 1 }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("computation node 7"));
    }

    #[test]
    fn empty_edge_list_is_structurally_valid() {
        assert!(Topology::new(
            3,
            vec![],
            [0, 1],
            2,
            vec![ComputeSite { node: 2, capacity: 1 }]
        )
        .is_ok());
    }

    #[test]
    fn nonoverlap_on_triangle() {
        // n = d: processed side is empty.
        assert!(triangle(2).check_nonoverlap(2));
        // n = s2: d is reachable from s1 and is the processed side itself.
        assert!(!triangle(1).check_nonoverlap(1));
    }

    #[test]
    fn nonoverlap_on_two_lobes() {
        // 0,1 raw lobe; 2 = n; 3,4 processed lobe with 4 = d
        let t = Topology::new(
            5,
            vec![edge(0, 1, 1), edge(0, 2, 1), edge(1, 2, 1), edge(2, 3, 1), edge(3, 4, 1)],
            [0, 1],
            4,
            vec![ComputeSite { node: 2, capacity: 1 }],
        )
        .unwrap();
        let sides = t.nonoverlap_sides(2).unwrap();
        assert_eq!(sides.raw, vec![true, true, false, false, false]);
        assert_eq!(sides.processed, vec![false, false, false, true, true]);
        assert!(sides.edge_is_raw(&t.edges()[1]));
        assert!(sides.edge_is_processed(&t.edges()[3]));
        // Adding a shortcut 1-3 merges the halves.
        let merged = Topology::new(
            5,
            vec![edge(0, 1, 1), edge(0, 2, 1), edge(1, 2, 1), edge(2, 3, 1), edge(3, 4, 1), edge(1, 3, 1)],
            [0, 1],
            4,
            vec![ComputeSite { node: 2, capacity: 1 }],
        )
        .unwrap();
        assert!(!merged.check_nonoverlap(2));
    }
}
