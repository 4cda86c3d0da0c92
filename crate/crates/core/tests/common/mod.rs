//! Random small instances shared by the property and acceptance suites.

#![allow(dead_code)]

use netcomp::arrivals::ArrivalSpec;
use netcomp::policy::{PolicyName, PolicySpec};
use netcomp::{ComputeSite, Edge, Scenario, Topology};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random graph on 3..=max_nodes nodes with at most `max_edges` edges.
pub fn random_topology<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize, max_sites: usize) -> Topology {
    loop {
        let n = rng.gen_range(3..=max_nodes);
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        pairs.shuffle(rng);
        let m = rng.gen_range(1..=pairs.len().min(max_edges));
        let edges = pairs[..m]
            .iter()
            .map(|&(a, b)| Edge {
                a,
                b,
                capacity: rng.gen_range(0..=4),
            })
            .collect();
        let mut nodes: Vec<usize> = (0..n).collect();
        nodes.shuffle(rng);
        let sources = [nodes[0], nodes[1]];
        let destination = rng.gen_range(0..n);
        nodes.shuffle(rng);
        let k = rng.gen_range(1..=max_sites.min(n));
        let sites = nodes[..k]
            .iter()
            .map(|&node| ComputeSite {
                node,
                capacity: rng.gen_range(0..=3),
            })
            .collect();
        if let Ok(t) = Topology::new(n, edges, sources, destination, sites) {
            return t;
        }
    }
}

/// Graph in which the computation node separates the sources from the
/// destination: raw side, node `n`, processed side.
pub fn random_nonoverlap<R: Rng>(rng: &mut R) -> Topology {
    loop {
        // 0, 1 = sources; 2 = optional raw relay; 3 = n; 4 = d; 5 = optional processed relay.
        let raw_relay = rng.gen_bool(0.5);
        let proc_relay = rng.gen_bool(0.5);
        let mut raw_nodes = vec![0, 1];
        if raw_relay {
            raw_nodes.push(2);
        }
        let mut proc_nodes = vec![4];
        if proc_relay {
            proc_nodes.push(5);
        }
        let mut edges = Vec::new();
        let cap = |rng: &mut R| rng.gen_range(1..=4);
        for side in [&raw_nodes, &proc_nodes] {
            for (i, &a) in side.iter().enumerate() {
                for &b in &side[i + 1..] {
                    if rng.gen_bool(0.6) {
                        edges.push(Edge { a, b, capacity: cap(rng) });
                    }
                }
                if rng.gen_bool(0.7) {
                    edges.push(Edge { a, b: 3, capacity: cap(rng) });
                }
            }
        }
        let destination = if rng.gen_bool(0.2) { 3 } else { 4 };
        let t = Topology::new(
            6,
            edges,
            [0, 1],
            destination,
            vec![ComputeSite {
                node: 3,
                capacity: rng.gen_range(1..=3),
            }],
        );
        if let Ok(t) = t {
            if t.check_nonoverlap(3) {
                return t;
            }
        }
    }
}

/// Policy spec with whatever parameters `name` requires.
pub fn policy_for<R: Rng>(rng: &mut R, name: PolicyName) -> PolicySpec {
    let mut spec = PolicySpec::new(name);
    if name.regulated() || (name == PolicyName::Pi3bar && rng.gen_bool(0.5)) {
        spec.eps_b = Some(rng.gen_range(0.01..0.5));
    }
    if matches!(name, PolicyName::Pi1p | PolicyName::Pi2p) {
        spec.threshold = Some(rng.gen_range(0..=20));
    }
    if name == PolicyName::Pi3 && rng.gen_bool(0.25) {
        spec.threshold = Some(rng.gen_range(0..=10));
        spec.test_mode = true;
    }
    spec
}

/// A valid scenario for `name` on a random small graph.
pub fn random_scenario<R: Rng>(rng: &mut R, name: PolicyName, horizon: u64) -> Scenario {
    let topology = match name {
        PolicyName::Pi1 | PolicyName::Pi1p => random_nonoverlap(rng),
        PolicyName::Pi2 | PolicyName::Pi2p => random_topology(rng, 6, 10, 1),
        PolicyName::Pi3 | PolicyName::Pi3bar => random_topology(rng, 6, 10, 3),
    };
    let rate = rng.gen_range(0.0..4.0);
    let arrival = match rng.gen_range(0..3) {
        0 => ArrivalSpec::poisson(rate),
        1 => ArrivalSpec::BernoulliBatch { rate, batch: 4 },
        _ => ArrivalSpec::Deterministic { rate },
    };
    let policy = policy_for(rng, name);
    Scenario::new(topology, arrival, policy, horizon, rng.gen()).expect("generated scenario is valid")
}
