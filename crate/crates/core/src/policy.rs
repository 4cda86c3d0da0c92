//! Computation, push and load-balancing rules of the control policies.
//!
//! | name     | sites  | computation          | push to Q_n^(0,n)          |
//! |----------|--------|----------------------|----------------------------|
//! | `pi1`    | one    | min(P_n, C_n) pairs  | direct                     |
//! | `pi1p`   | one    | thresholded          | direct                     |
//! | `pi2`    | one    | min(P_n, C_n) pairs  | (1+B)A through Y, dummies  |
//! | `pi2p`   | one    | thresholded          | (1+B)A through Y, dummies  |
//! | `pi3`    | many   | min(P_n, C_n) pairs  | (1+B)Ã^(n) through Y       |
//! | `pi3bar` | many   | min(P_n, C_n) pairs  | direct                     |
//!
//! Every policy routes with backpressure. `pi3` and `pi3bar` assign all of
//! a slot's queries to the site minimising the load-balancing score.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::queueing::{Admission, NetworkState, PacketClass, PacketKind, PushPlan, SlotDecision, Tag};
use crate::routing::{bp_route, ClassMask};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    Pi1,
    Pi1p,
    Pi2,
    Pi2p,
    Pi3,
    Pi3bar,
}

impl PolicyName {
    pub const ALL: [PolicyName; 6] = [
        PolicyName::Pi1,
        PolicyName::Pi1p,
        PolicyName::Pi2,
        PolicyName::Pi2p,
        PolicyName::Pi3,
        PolicyName::Pi3bar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Pi1 => "pi1",
            PolicyName::Pi1p => "pi1p",
            PolicyName::Pi2 => "pi2",
            PolicyName::Pi2p => "pi2p",
            PolicyName::Pi3 => "pi3",
            PolicyName::Pi3bar => "pi3bar",
        }
    }

    /// Policies bound to a single, fixed computation site.
    pub fn single_site(self) -> bool {
        matches!(self, PolicyName::Pi1 | PolicyName::Pi1p | PolicyName::Pi2 | PolicyName::Pi2p)
    }

    /// Policies that push through Y with the Bernoulli-randomised count.
    pub fn regulated(self) -> bool {
        matches!(self, PolicyName::Pi2 | PolicyName::Pi2p | PolicyName::Pi3)
    }
}

impl std::fmt::Display for PolicyName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Policy section of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: PolicyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u64>,
    /// Enables the thresholded computation rule for `pi3` (proof variant).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub test_mode: bool,
}

impl PolicySpec {
    pub fn new(name: PolicyName) -> Self {
        PolicySpec {
            name,
            eps_b: None,
            threshold: None,
            test_mode: false,
        }
    }

    pub fn with_eps(mut self, eps_b: f64) -> Self {
        self.eps_b = Some(eps_b);
        self
    }

    pub fn with_threshold(mut self, threshold: u64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Invariant(msg));
        let name = self.name;
        match self.eps_b {
            Some(e) if !(e > 0.0 && e < 1.0) => {
                return fail(format!("policy {name}: eps_b must lie in (0,1), got {e}"));
            }
            None if name.regulated() => return fail(format!("policy {name} requires eps_b")),
            _ => {}
        }
        if matches!(name, PolicyName::Pi1p | PolicyName::Pi2p) && self.threshold.is_none() {
            return fail(format!("policy {name} requires threshold"));
        }
        if self.test_mode && !(name == PolicyName::Pi3 && self.threshold.is_some()) {
            return fail("test_mode is only meaningful for pi3 with a threshold".into());
        }
        if name.single_site() && topology.num_sites() != 1 {
            return fail(format!(
                "policy {name} needs exactly one computation node, found {}",
                topology.num_sites()
            ));
        }
        if matches!(name, PolicyName::Pi1 | PolicyName::Pi1p) {
            let n = topology.sites()[0].node;
            if !topology.check_nonoverlap(n) {
                return fail(format!(
                    "policy {name} needs raw and processed networks that only share node {n}"
                ));
            }
        }
        Ok(())
    }
}

/// π1 computation: the min(P_n, C_n) oldest matched pairs.
pub fn compute_pi1(state: &NetworkState, site: usize, capacity: u64) -> Vec<Tag> {
    state.stage(site).oldest_matched(capacity as usize)
}

/// Result of the thresholded rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdedComputation {
    pub tags: Vec<Tag>,
    /// Pairs missing when the threshold fired with fewer than C_n matches.
    pub shortfall: u64,
}

/// π1′ computation: C_n pairs once X^(1) + X^(2) >= 2 C_n + threshold, else none.
pub fn compute_pi1_primed(
    state: &NetworkState,
    site: usize,
    capacity: u64,
    threshold: u64,
) -> ThresholdedComputation {
    let stage = state.stage(site);
    let waiting = stage.raw_len(0) + stage.raw_len(1);
    if waiting < 2 * capacity + threshold {
        return ThresholdedComputation {
            tags: Vec::new(),
            shortfall: 0,
        };
    }
    let tags = stage.oldest_matched(capacity as usize);
    ThresholdedComputation {
        shortfall: capacity - tags.len() as u64,
        tags,
    }
}

/// The Bernoulli(eps_b) draw B^(n)(t).
pub fn draw_push_bit<R: Rng + ?Sized>(eps_b: f64, rng: &mut R) -> bool {
    rng.gen_bool(eps_b)
}

/// F = (1 + B) A.
pub fn push_count(assigned: u64, bit: bool) -> u64 {
    if bit {
        2 * assigned
    } else {
        assigned
    }
}

pub fn draw_push<R: Rng + ?Sized>(assigned: u64, eps_b: f64, rng: &mut R) -> u64 {
    push_count(assigned, draw_push_bit(eps_b, rng))
}

/// Load-balancing score of one site:
/// (1+eps) Q_n^(0,n) + Q_s1^(1,n) + Q_s2^(2,n) + H_n.
pub fn balance_score(state: &NetworkState, topology: &Topology, site: usize, eps_b: f64) -> f64 {
    let [s1, s2] = topology.sources();
    let n = state.site_node(site);
    let processed = state.queue_len(n, PacketClass::new(PacketKind::Processed, site));
    let raw1 = state.queue_len(s1, PacketClass::new(PacketKind::Raw1, site));
    let raw2 = state.queue_len(s2, PacketClass::new(PacketKind::Raw2, site));
    (1.0 + eps_b) * processed as f64 + (raw1 + raw2) as f64 + state.stage(site).virtual_load() as f64
}

/// Site with the smallest score; ties go to the lowest site index.
pub fn load_balance_pi3(state: &NetworkState, topology: &Topology, eps_b: f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for site in 0..topology.num_sites() {
        let score = balance_score(state, topology, site, eps_b);
        if score < best_score {
            best = site;
            best_score = score;
        }
    }
    best
}

/// A policy bound to a topology, ready to produce slot decisions.
#[derive(Debug, Clone)]
pub struct Policy {
    spec: PolicySpec,
    mask: Option<ClassMask>,
    capacities: Vec<u64>,
    shortfalls: u64,
}

impl Policy {
    pub fn new(spec: PolicySpec, topology: &Topology) -> Result<Self, ScenarioError> {
        spec.validate(topology)?;
        let mask = match spec.name {
            PolicyName::Pi1 | PolicyName::Pi1p => topology
                .nonoverlap_sides(topology.sites()[0].node)
                .map(|sides| ClassMask::from_sides(topology, &sides)),
            _ => None,
        };
        Ok(Policy {
            spec,
            mask,
            capacities: topology.sites().iter().map(|s| s.capacity as u64).collect(),
            shortfalls: 0,
        })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    /// Whether this policy consumes the per-site B streams.
    pub fn regulated(&self) -> bool {
        self.spec.name.regulated()
    }

    /// Threshold-rule firings that found fewer than C_n matched pairs.
    pub fn shortfalls(&self) -> u64 {
        self.shortfalls
    }

    fn thresholded(&self) -> Option<u64> {
        match self.spec.name {
            PolicyName::Pi1p | PolicyName::Pi2p => self.spec.threshold,
            PolicyName::Pi3 if self.spec.test_mode => self.spec.threshold,
            _ => None,
        }
    }

    /// Full decision for the slot. `push_bits[n]` is B^(n)(t); ignored by
    /// policies that push directly.
    pub fn step(
        &mut self,
        state: &NetworkState,
        topology: &Topology,
        arrivals: u64,
        push_bits: &[bool],
    ) -> SlotDecision {
        let ns = topology.num_sites();
        let site = match self.spec.name {
            PolicyName::Pi3 | PolicyName::Pi3bar => {
                load_balance_pi3(state, topology, self.spec.eps_b.unwrap_or(0.0))
            }
            _ => 0,
        };
        let routes = bp_route(state, topology, self.mask.as_ref()).routes();

        let threshold = self.thresholded();
        let combine = (0..ns)
            .map(|n| match threshold {
                Some(x) => {
                    let c = compute_pi1_primed(state, n, self.capacities[n], x);
                    self.shortfalls += c.shortfall;
                    c.tags
                }
                None => compute_pi1(state, n, self.capacities[n]),
            })
            .collect();

        let admission = Admission { site, count: arrivals };
        let push = if self.regulated() {
            PushPlan::Regulated(
                (0..ns)
                    .map(|n| {
                        let assigned = if n == site { arrivals } else { 0 };
                        push_count(assigned, push_bits[n])
                    })
                    .collect(),
            )
        } else {
            PushPlan::Direct
        };
        SlotDecision {
            routes,
            combine,
            push,
            admission,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{ComputeSite, Edge};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // 0 = s1, 1 = s2, 2 = n, 3 = d
    fn star(capacity: u32) -> Topology {
        Topology::new(
            4,
            vec![
                Edge { a: 0, b: 2, capacity: 5 },
                Edge { a: 1, b: 2, capacity: 5 },
                Edge { a: 2, b: 3, capacity: 5 },
            ],
            [0, 1],
            3,
            vec![ComputeSite { node: 2, capacity }],
        )
        .unwrap()
    }

    fn with_pairs(t: &Topology, pairs: u64, extra_side1: u64) -> NetworkState {
        let mut s = NetworkState::new(t);
        for tag in 0..pairs {
            s.push_raw_for_test(0, 0, tag);
            s.push_raw_for_test(0, 1, tag);
        }
        for tag in 0..extra_side1 {
            s.push_raw_for_test(0, 0, 1000 + tag);
        }
        s
    }

    #[test]
    fn pi1_takes_min_of_pairs_and_capacity() {
        let t = star(3);
        assert!(compute_pi1(&with_pairs(&t, 0, 4), 0, 3).is_empty());
        assert_eq!(compute_pi1(&with_pairs(&t, 7, 0), 0, 3), vec![Tag(0), Tag(1), Tag(2)]);
        assert_eq!(compute_pi1(&with_pairs(&t, 2, 0), 0, 3).len(), 2);
    }

    #[test]
    fn primed_threshold_boundary() {
        let t = star(2);
        // X1 + X2 = 2*4 + 1 = 9 with threshold 5: 2C + 5 = 9 fires.
        let s = with_pairs(&t, 4, 1);
        assert_eq!(compute_pi1_primed(&s, 0, 2, 5).tags.len(), 2);
        // One short of the boundary.
        let s = with_pairs(&t, 4, 0);
        assert!(compute_pi1_primed(&s, 0, 2, 5).tags.is_empty());
    }

    #[test]
    fn primed_with_zero_threshold_single_pair() {
        let t = star(1);
        let s = with_pairs(&t, 1, 0);
        let c = compute_pi1_primed(&s, 0, 1, 0);
        assert_eq!(c.tags, vec![Tag(0)]);
        assert_eq!(c.shortfall, 0);
    }

    #[test]
    fn primed_records_shortfall() {
        let t = star(3);
        // 1 pair plus 6 unmatched on side 1: 8 >= 6 fires, but only one pair exists.
        let s = with_pairs(&t, 1, 6);
        let c = compute_pi1_primed(&s, 0, 3, 0);
        assert_eq!(c.tags.len(), 1);
        assert_eq!(c.shortfall, 2);
    }

    #[test]
    fn push_count_arithmetic() {
        assert_eq!(push_count(0, true), 0);
        assert_eq!(push_count(4, true), 8);
        assert_eq!(push_count(4, false), 4);
    }

    #[test]
    fn push_mean_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000u64;
        let total: u64 = (0..n).map(|_| draw_push(5, 0.01, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        let sigma = 5.0 * (0.01f64 * 0.99).sqrt() / 1e3;
        assert!((mean - 5.05).abs() < 3.0 * sigma, "mean {mean}");
    }

    fn two_sites() -> Topology {
        // 0 = s1, 1 = s2, 2 = a, 3 = b, 4 = d
        Topology::new(
            5,
            vec![
                Edge { a: 0, b: 2, capacity: 1 },
                Edge { a: 1, b: 3, capacity: 1 },
                Edge { a: 2, b: 4, capacity: 1 },
                Edge { a: 3, b: 4, capacity: 1 },
            ],
            [0, 1],
            4,
            vec![ComputeSite { node: 2, capacity: 1 }, ComputeSite { node: 3, capacity: 1 }],
        )
        .unwrap()
    }

    #[test]
    fn load_balance_ties_and_argmin() {
        let t = two_sites();
        let mut s = NetworkState::new(&t);
        assert_eq!(load_balance_pi3(&s, &t, 0.01), 0);
        s.set_virtual_load_for_test(0, 10);
        s.set_virtual_load_for_test(1, 7);
        assert_eq!(load_balance_pi3(&s, &t, 0.01), 1);
    }

    #[test]
    fn load_balance_weights_processed_backlog() {
        let t = two_sites();
        let mut s = NetworkState::new(&t);
        // site a: Q_a^(0,a) = 100 -> score 101
        s.push_queue_for_test(2, PacketClass::new(PacketKind::Processed, 0), 100);
        // site b: Q_s1^(1,b) = 50, Q_s2^(2,b) = 50 -> score 100
        s.push_queue_for_test(0, PacketClass::new(PacketKind::Raw1, 1), 50);
        s.push_queue_for_test(1, PacketClass::new(PacketKind::Raw2, 1), 50);
        assert!((balance_score(&s, &t, 0, 0.01) - 101.0).abs() < 1e-9);
        assert!((balance_score(&s, &t, 1, 0.01) - 100.0).abs() < 1e-9);
        assert_eq!(load_balance_pi3(&s, &t, 0.01), 1);
    }

    #[test]
    fn validation_rules() {
        let t = star(1);
        assert!(PolicySpec::new(PolicyName::Pi2).validate(&t).is_err());
        assert!(PolicySpec::new(PolicyName::Pi2).with_eps(1.0).validate(&t).is_err());
        assert!(PolicySpec::new(PolicyName::Pi2p).with_eps(0.1).validate(&t).is_err());
        assert!(PolicySpec::new(PolicyName::Pi2p).with_eps(0.1).with_threshold(3).validate(&t).is_ok());
        assert!(PolicySpec::new(PolicyName::Pi1).validate(&t).is_ok());
        assert!(PolicySpec::new(PolicyName::Pi1).validate(&two_sites()).is_err());
        assert!(PolicySpec::new(PolicyName::Pi3bar).validate(&two_sites()).is_ok());

        // s1 -- n -- d plus a chord s2 -- d: the halves overlap.
        let overlapping = Topology::new(
            4,
            vec![
                Edge { a: 0, b: 2, capacity: 1 },
                Edge { a: 1, b: 2, capacity: 1 },
                Edge { a: 2, b: 3, capacity: 1 },
                Edge { a: 1, b: 3, capacity: 1 },
            ],
            [0, 1],
            3,
            vec![ComputeSite { node: 2, capacity: 1 }],
        )
        .unwrap();
        let err = PolicySpec::new(PolicyName::Pi1).validate(&overlapping).unwrap_err();
        assert!(err.to_string().contains("only share node 2"));
    }

    #[test]
    fn idle_network_gives_idle_decision() {
        let t = star(2);
        let s = NetworkState::new(&t);
        let mut p = Policy::new(PolicySpec::new(PolicyName::Pi1), &t).unwrap();
        let d = p.step(&s, &t, 0, &[false]);
        assert!(d.routes.is_empty());
        assert_eq!(d.combine, vec![Vec::<Tag>::new()]);
        assert_eq!(d.push, PushPlan::Direct);
    }
}
