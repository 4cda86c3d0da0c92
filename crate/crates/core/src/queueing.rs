//! Packets, tags and every queue of the network, plus the per-slot update.
//!
//! Within a slot all service (transmissions, combinations, pushes) reads the
//! start-of-slot contents. Everything that arrives during the slot, whether
//! in transit, freshly combined, pushed or newly admitted, is appended at the
//! end of the slot in tag order.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::Serialize;

use crate::error::ConstraintViolation;
use crate::topology::{NodeId, Topology};

/// Query identifier shared by the two raw packets of a query and by its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u64);

impl Tag {
    /// Dummy packets draw their tags from the range with this bit set.
    pub const DUMMY_BIT: u64 = 1 << 63;

    pub fn is_dummy_range(self) -> bool {
        self.0 & Self::DUMMY_BIT != 0
    }
}

/// `i` in the class triple: processed (0) or raw from source 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    Processed = 0,
    Raw1 = 1,
    Raw2 = 2,
}

impl PacketKind {
    pub const ALL: [PacketKind; 3] = [PacketKind::Processed, PacketKind::Raw1, PacketKind::Raw2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_raw(self) -> bool {
        self != PacketKind::Processed
    }

    /// Raw kind produced at source `side` (0 or 1).
    pub fn raw(side: usize) -> PacketKind {
        if side == 0 {
            PacketKind::Raw1
        } else {
            PacketKind::Raw2
        }
    }
}

/// `(i, n)`: packet kind and the computation site (index into the site list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketClass {
    pub kind: PacketKind,
    pub site: usize,
}

impl PacketClass {
    pub fn new(kind: PacketKind, site: usize) -> Self {
        PacketClass { kind, site }
    }

    /// Dense index: `kind * num_sites + site`.
    pub fn index(self, num_sites: usize) -> usize {
        self.kind.index() * num_sites + self.site
    }

    pub fn from_index(index: usize, num_sites: usize) -> Self {
        PacketClass {
            kind: PacketKind::ALL[index / num_sites],
            site: index % num_sites,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub tag: Tag,
    pub class: PacketClass,
    pub dummy: bool,
    pub birth_slot: u64,
}

/// Per-site queues: X^(1), X^(2), the result queue Y and the virtual counter H.
#[derive(Debug, Clone, Default)]
pub struct ComputeStage {
    raw: [BTreeMap<Tag, Packet>; 2],
    matched: BTreeSet<Tag>,
    results: VecDeque<Packet>,
    virtual_load: u64,
}

impl ComputeStage {
    /// X_n^(side+1).
    pub fn raw_len(&self, side: usize) -> u64 {
        self.raw[side].len() as u64
    }

    pub fn raw_tags(&self, side: usize) -> impl Iterator<Item = Tag> + '_ {
        self.raw[side].keys().copied()
    }

    /// P_n: tags present in both computation queues.
    pub fn matched_pairs(&self) -> u64 {
        self.matched.len() as u64
    }

    pub fn is_matched(&self, tag: Tag) -> bool {
        self.matched.contains(&tag)
    }

    /// Up to `limit` matched tags, oldest query first.
    pub fn oldest_matched(&self, limit: usize) -> Vec<Tag> {
        self.matched.iter().take(limit).copied().collect()
    }

    pub fn results(&self) -> &VecDeque<Packet> {
        &self.results
    }

    pub fn virtual_load(&self) -> u64 {
        self.virtual_load
    }

    fn insert_raw(&mut self, packet: Packet) {
        let side = packet.class.kind.index() - 1;
        let tag = packet.tag;
        self.raw[side].insert(tag, packet);
        if self.raw[1 - side].contains_key(&tag) {
            self.matched.insert(tag);
        }
    }

    fn take_pair(&mut self, tag: Tag) -> bool {
        if !self.matched.remove(&tag) {
            return false;
        }
        self.raw[0].remove(&tag);
        self.raw[1].remove(&tag);
        true
    }
}

/// One edge allocation: `count` packets of `class` from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub edge: usize,
    pub from: NodeId,
    pub to: NodeId,
    pub class: PacketClass,
    pub count: u64,
}

/// How processed packets reach Q_n^(0,n).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PushPlan {
    /// Results skip Y and enter Q_n^(0,n) at the end of the slot.
    Direct,
    /// F^(n) packets per site move from Y, filled up with dummies.
    Regulated(Vec<u64>),
}

/// New queries of this slot and the site they are assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Admission {
    pub site: usize,
    pub count: u64,
}

/// Every control of one slot: routing U, combinations Z (with their tags),
/// push F and the load-balanced admission Ã.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotDecision {
    pub routes: Vec<Route>,
    pub combine: Vec<Vec<Tag>>,
    pub push: PushPlan,
    pub admission: Admission,
}

impl SlotDecision {
    /// Does nothing except advance the clock.
    pub fn idle(num_sites: usize) -> Self {
        SlotDecision {
            routes: Vec::new(),
            combine: vec![Vec::new(); num_sites],
            push: PushPlan::Direct,
            admission: Admission::default(),
        }
    }

    /// Ã^(n) for this slot.
    pub fn assigned(&self, site: usize) -> u64 {
        if self.admission.site == site {
            self.admission.count
        } else {
            0
        }
    }
}

/// What happened during one applied slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotOutcome {
    pub transmitted: u64,
    pub null_transmissions: u64,
    /// Z_n actually executed.
    pub combined: Vec<u64>,
    /// Packets entering Q_n^(0,n) (or delivered on the spot when n = d).
    pub injected: Vec<u64>,
    pub dummies_created: Vec<u64>,
    pub delivered: u64,
    pub dummies_dropped: u64,
    pub admitted_tags: Vec<Tag>,
}

/// Queue-length totals by family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Backlog {
    pub q: u64,
    pub x: u64,
    pub y: u64,
    pub h: u64,
}

impl Backlog {
    /// Packets held in the network (Q + X + Y, dummies included).
    pub fn packets(&self) -> u64 {
        self.q + self.x + self.y
    }
}

/// Complete queue state of the network at the start of a slot.
#[derive(Debug, Clone)]
pub struct NetworkState {
    num_nodes: usize,
    num_sites: usize,
    destination: NodeId,
    site_nodes: Vec<NodeId>,
    site_capacity: Vec<u64>,
    queues: Vec<VecDeque<Packet>>,
    stages: Vec<ComputeStage>,
    slot: u64,
    next_tag: u64,
    next_dummy: u64,
    admitted: u64,
    delivered: u64,
    dummies_dropped: u64,
}

impl NetworkState {
    pub fn new(topology: &Topology) -> Self {
        let num_sites = topology.num_sites();
        let num_nodes = topology.num_nodes();
        NetworkState {
            num_nodes,
            num_sites,
            destination: topology.destination(),
            site_nodes: topology.sites().iter().map(|s| s.node).collect(),
            site_capacity: topology.sites().iter().map(|s| s.capacity as u64).collect(),
            queues: vec![VecDeque::new(); num_nodes * 3 * num_sites],
            stages: vec![ComputeStage::default(); num_sites],
            slot: 0,
            next_tag: 0,
            next_dummy: Tag::DUMMY_BIT,
            admitted: 0,
            delivered: 0,
            dummies_dropped: 0,
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn num_classes(&self) -> usize {
        3 * self.num_sites
    }

    pub fn site_node(&self, site: usize) -> NodeId {
        self.site_nodes[site]
    }

    fn queue_index(&self, node: NodeId, class: PacketClass) -> usize {
        node * self.num_classes() + class.index(self.num_sites)
    }

    pub fn queue(&self, node: NodeId, class: PacketClass) -> &VecDeque<Packet> {
        &self.queues[self.queue_index(node, class)]
    }

    /// Q_node^(class).
    pub fn queue_len(&self, node: NodeId, class: PacketClass) -> u64 {
        self.queue(node, class).len() as u64
    }

    /// All class queue lengths at `node`, indexed by class index.
    pub fn node_queue_lens(&self, node: NodeId) -> impl Iterator<Item = u64> + '_ {
        let k = self.num_classes();
        self.queues[node * k..(node + 1) * k]
            .iter()
            .map(|q| q.len() as u64)
    }

    pub fn stage(&self, site: usize) -> &ComputeStage {
        &self.stages[site]
    }

    pub fn matched_pairs(&self, site: usize) -> u64 {
        self.stages[site].matched_pairs()
    }

    pub fn admitted(&self) -> u64 {
        self.admitted
    }

    /// Useful processed packets that reached the destination.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn dummies_dropped(&self) -> u64 {
        self.dummies_dropped
    }

    pub fn backlog(&self) -> Backlog {
        let mut b = Backlog {
            q: self.queues.iter().map(|q| q.len() as u64).sum(),
            ..Backlog::default()
        };
        for stage in &self.stages {
            b.x += stage.raw_len(0) + stage.raw_len(1);
            b.y += stage.results.len() as u64;
            b.h += stage.virtual_load;
        }
        b
    }

    /// Longest single queue (data, computation or result queue).
    pub fn max_queue_len(&self) -> u64 {
        let q = self.queues.iter().map(|q| q.len()).max().unwrap_or(0);
        let s = self
            .stages
            .iter()
            .map(|s| s.raw[0].len().max(s.raw[1].len()).max(s.results.len()))
            .max()
            .unwrap_or(0);
        q.max(s) as u64
    }

    /// Puts a packet that has just reached `node`, applying the two
    /// conventions Q_n^(i,n) = 0 and Q_d^(0,n) = 0.
    fn land(&mut self, node: NodeId, packet: Packet, outcome: &mut SlotOutcome) {
        let class = packet.class;
        if class.kind.is_raw() && node == self.site_nodes[class.site] {
            self.stages[class.site].insert_raw(packet);
        } else if !class.kind.is_raw() && node == self.destination {
            if packet.dummy {
                self.dummies_dropped += 1;
                outcome.dummies_dropped += 1;
            } else {
                self.delivered += 1;
                outcome.delivered += 1;
            }
        } else {
            let idx = self.queue_index(node, class);
            self.queues[idx].push_back(packet);
        }
    }

    /// Issues `count` fresh queries assigned to `site`: one raw packet at
    /// each source, sharing a tag. Appends immediately.
    pub fn admit(&mut self, topology: &Topology, count: u64, site: usize) -> Vec<Tag> {
        let mut scratch = SlotOutcome::default();
        self.admit_into(topology, count, site, &mut scratch);
        scratch.admitted_tags
    }

    fn admit_into(&mut self, topology: &Topology, count: u64, site: usize, outcome: &mut SlotOutcome) {
        let sources = topology.sources();
        for _ in 0..count {
            let tag = Tag(self.next_tag);
            self.next_tag += 1;
            self.admitted += 1;
            for (side, &src) in sources.iter().enumerate() {
                let packet = Packet {
                    tag,
                    class: PacketClass::new(PacketKind::raw(side), site),
                    dummy: false,
                    birth_slot: self.slot,
                };
                self.land(src, packet, outcome);
            }
            outcome.admitted_tags.push(tag);
        }
    }

    /// Checks Eqs. (1)-(3) of the decision against the current state.
    pub fn validate(&self, topology: &Topology, dec: &SlotDecision) -> Result<(), ConstraintViolation> {
        if dec.combine.len() != self.num_sites {
            return Err(ConstraintViolation::Shape("one combine list per site"));
        }
        if let PushPlan::Regulated(f) = &dec.push {
            if f.len() != self.num_sites {
                return Err(ConstraintViolation::Shape("one push count per site"));
            }
        }
        if dec.admission.site >= self.num_sites {
            return Err(ConstraintViolation::Shape("admission site out of range"));
        }

        let edges = topology.edges();
        let mut used = vec![0u64; edges.len()];
        for r in &dec.routes {
            let edge = edges
                .get(r.edge)
                .ok_or(ConstraintViolation::NotAnEdge { from: r.from, to: r.to })?;
            let fits = (edge.a == r.from && edge.b == r.to) || (edge.b == r.from && edge.a == r.to);
            if !fits || r.class.site >= self.num_sites {
                return Err(ConstraintViolation::NotAnEdge { from: r.from, to: r.to });
            }
            used[r.edge] += r.count;
        }
        for (edge, &u) in edges.iter().zip(&used) {
            if u > edge.capacity as u64 {
                return Err(ConstraintViolation::LinkCapacity {
                    a: edge.a,
                    b: edge.b,
                    used: u,
                    capacity: edge.capacity,
                });
            }
        }

        for (site, tags) in dec.combine.iter().enumerate() {
            let stage = &self.stages[site];
            let limit = self.site_capacity[site]
                .min(stage.raw_len(0))
                .min(stage.raw_len(1));
            if tags.len() as u64 > limit {
                return Err(ConstraintViolation::ComputeCapacity {
                    node: self.site_nodes[site],
                    combined: tags.len(),
                    limit,
                });
            }
            let mut seen = HashSet::with_capacity(tags.len());
            for &tag in tags {
                if !stage.is_matched(tag) || !seen.insert(tag) {
                    return Err(ConstraintViolation::UnmatchedTag {
                        node: self.site_nodes[site],
                        tag: tag.0,
                    });
                }
            }
        }
        Ok(())
    }

    /// Executes one slot. With `check` set the decision is validated first.
    pub fn apply_decision(
        &mut self,
        topology: &Topology,
        dec: &SlotDecision,
        check: bool,
    ) -> Result<SlotOutcome, ConstraintViolation> {
        if check {
            self.validate(topology, dec)?;
        }
        let ns = self.num_sites;
        let mut outcome = SlotOutcome {
            combined: vec![0; ns],
            injected: vec![0; ns],
            dummies_created: vec![0; ns],
            ..SlotOutcome::default()
        };
        let expected = dec.routes.iter().map(|r| r.count as usize).sum::<usize>()
            + dec.combine.iter().map(Vec::len).sum::<usize>();
        let mut landing: Vec<(NodeId, Packet)> = Vec::with_capacity(expected);

        // Transmissions over links; any shortfall is a null transmission.
        for r in &dec.routes {
            let idx = self.queue_index(r.from, r.class);
            let queue = &mut self.queues[idx];
            let moved = (r.count as usize).min(queue.len());
            landing.extend(queue.drain(..moved).map(|p| (r.to, p)));
            outcome.transmitted += moved as u64;
            outcome.null_transmissions += r.count - moved as u64;
        }

        // Combinations, from start-of-slot computation queues.
        let mut fresh: Vec<Vec<Packet>> = vec![Vec::new(); ns];
        for (site, tags) in dec.combine.iter().enumerate() {
            for &tag in tags {
                if !self.stages[site].take_pair(tag) {
                    return Err(ConstraintViolation::UnmatchedTag {
                        node: self.site_nodes[site],
                        tag: tag.0,
                    });
                }
                fresh[site].push(Packet {
                    tag,
                    class: PacketClass::new(PacketKind::Processed, site),
                    dummy: false,
                    birth_slot: self.slot,
                });
            }
            outcome.combined[site] = tags.len() as u64;
        }

        // Pushes into Q_n^(0,n).
        match &dec.push {
            PushPlan::Direct => {
                for (site, packets) in fresh.into_iter().enumerate() {
                    outcome.injected[site] = packets.len() as u64;
                    let node = self.site_nodes[site];
                    landing.extend(packets.into_iter().map(|p| (node, p)));
                }
            }
            PushPlan::Regulated(counts) => {
                for (site, packets) in fresh.into_iter().enumerate() {
                    let node = self.site_nodes[site];
                    let want = counts[site];
                    let stage = &mut self.stages[site];
                    let useful = (want as usize).min(stage.results.len());
                    landing.extend(stage.results.drain(..useful).map(|p| (node, p)));
                    for _ in useful as u64..want {
                        let tag = Tag(self.next_dummy);
                        self.next_dummy += 1;
                        landing.push((
                            node,
                            Packet {
                                tag,
                                class: PacketClass::new(PacketKind::Processed, site),
                                dummy: true,
                                birth_slot: self.slot,
                            },
                        ));
                    }
                    outcome.injected[site] = want;
                    outcome.dummies_created[site] = want - useful as u64;
                    stage.results.extend(packets);
                }
            }
        }

        // End of slot: everything in flight lands, in tag order per queue.
        // Bucket by destination queue, then order each (small) bucket by tag.
        // The position breaks ties, so this matches a stable sort.
        let queue_of: Vec<usize> = landing.iter().map(|(node, p)| self.queue_index(*node, p.class)).collect();
        let mut bounds = vec![0usize; self.queues.len() + 1];
        for &q in &queue_of {
            bounds[q + 1] += 1;
        }
        for q in 0..self.queues.len() {
            bounds[q + 1] += bounds[q];
        }
        let mut fill = bounds.clone();
        let mut order = vec![0u128; landing.len()];
        for (pos, (&q, (_, p))) in queue_of.iter().zip(&landing).enumerate() {
            order[fill[q]] = ((p.tag.0 as u128) << 32) | pos as u128;
            fill[q] += 1;
        }
        for w in bounds.windows(2) {
            order[w[0]..w[1]].sort_unstable();
        }
        for key in order {
            let (node, packet) = landing[key as u32 as usize];
            self.land(node, packet, &mut outcome);
        }
        self.admit_into(topology, dec.admission.count, dec.admission.site, &mut outcome);

        for (site, stage) in self.stages.iter_mut().enumerate() {
            let assigned = dec.assigned(site);
            stage.virtual_load = (stage.virtual_load + assigned).saturating_sub(self.site_capacity[site]);
        }
        self.slot += 1;
        Ok(outcome)
    }

    /// Raw packets account for their query one half each; processed packets
    /// (useful ones only) account for the whole query.
    pub fn check_conservation(&self) -> Result<(), String> {
        let mut raw = 0u64;
        let mut processed = 0u64;
        for q in &self.queues {
            for p in q {
                if p.class.kind.is_raw() {
                    raw += 1;
                } else if !p.dummy {
                    processed += 1;
                }
            }
        }
        for s in &self.stages {
            raw += s.raw_len(0) + s.raw_len(1);
            processed += s.results.len() as u64;
        }
        let lhs = 2 * self.admitted;
        let rhs = raw + 2 * (processed + self.delivered);
        if lhs == rhs {
            Ok(())
        } else {
            Err(format!(
                "2*admitted = {lhs} but raw {raw} + 2*(processed {processed} + delivered {})",
                self.delivered
            ))
        }
    }

    /// Every live raw tag appears at most once per source side, and no useful
    /// processed packet coexists with a raw packet of its tag.
    pub fn check_tag_safety(&self) -> Result<(), String> {
        let mut raw_seen: [HashSet<Tag>; 2] = [HashSet::new(), HashSet::new()];
        let mut record = |p: &Packet| -> Result<(), String> {
            let side = p.class.kind.index() - 1;
            if p.tag.0 >= self.next_tag || p.dummy {
                return Err(format!("raw packet with foreign tag {}", p.tag.0));
            }
            if !raw_seen[side].insert(p.tag) {
                return Err(format!("raw tag {} duplicated on side {}", p.tag.0, side + 1));
            }
            Ok(())
        };
        for q in &self.queues {
            for p in q.iter().filter(|p| p.class.kind.is_raw()) {
                record(p)?;
            }
        }
        for s in &self.stages {
            for side in 0..2 {
                for p in s.raw[side].values() {
                    record(p)?;
                }
            }
        }
        let processed = self
            .queues
            .iter()
            .flat_map(|q| q.iter())
            .filter(|p| !p.class.kind.is_raw())
            .chain(self.stages.iter().flat_map(|s| s.results.iter()));
        for p in processed {
            if p.dummy != p.tag.is_dummy_range() {
                return Err(format!("dummy flag disagrees with tag {:#x}", p.tag.0));
            }
            if !p.dummy && (raw_seen[0].contains(&p.tag) || raw_seen[1].contains(&p.tag)) {
                return Err(format!("processed tag {} still has a raw parent", p.tag.0));
            }
        }
        Ok(())
    }

    /// 64-bit FNV-1a over every queue length and counter.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.slot);
        for q in &self.queues {
            feed(q.len() as u64);
        }
        for s in &self.stages {
            feed(s.raw_len(0));
            feed(s.raw_len(1));
            feed(s.results.len() as u64);
            feed(s.virtual_load);
        }
        feed(self.admitted);
        feed(self.delivered);
        feed(self.dummies_dropped);
        h
    }

    #[cfg(test)]
    pub(crate) fn push_raw_for_test(&mut self, site: usize, side: usize, tag: u64) {
        let packet = Packet {
            tag: Tag(tag),
            class: PacketClass::new(PacketKind::raw(side), site),
            dummy: false,
            birth_slot: self.slot,
        };
        self.stages[site].insert_raw(packet);
        self.next_tag = self.next_tag.max(tag + 1);
    }

    #[cfg(test)]
    pub(crate) fn push_queue_for_test(&mut self, node: NodeId, class: PacketClass, count: u64) {
        let idx = self.queue_index(node, class);
        for _ in 0..count {
            let tag = Tag(self.next_tag);
            self.next_tag += 1;
            self.queues[idx].push_back(Packet {
                tag,
                class,
                dummy: false,
                birth_slot: self.slot,
            });
        }
    }

    #[cfg(test)]
    pub(crate) fn push_result_for_test(&mut self, site: usize, tag: u64) {
        self.stages[site].results.push_back(Packet {
            tag: Tag(tag),
            class: PacketClass::new(PacketKind::Processed, site),
            dummy: false,
            birth_slot: self.slot,
        });
    }

    #[cfg(test)]
    pub(crate) fn set_virtual_load_for_test(&mut self, site: usize, value: u64) {
        self.stages[site].virtual_load = value;
    }
}
