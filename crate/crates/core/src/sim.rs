//! The slot loop: draw arrivals and push bits, ask the policy for a
//! decision, apply it, record statistics.
//!
//! Statistics reported in the summary cover the second half of the horizon
//! only; the first half is treated as warm-up.

use std::io::Write;

use serde::Serialize;

use crate::arrivals::ArrivalProcess;
use crate::error::SimError;
use crate::policy::{draw_push_bit, Policy};
use crate::queueing::{Backlog, NetworkState, SlotDecision, SlotOutcome};
use crate::rng::{rng_streams, rng_streams_with_prefix, RngStreams};
use crate::scenario::{Scenario, ScenarioFile};
use crate::topology::{NodeId, Topology};

/// A queue longer than this halts the run.
pub const OVERFLOW_LIMIT: u64 = 1 << 32;

/// Backlog slope (packets/slot) at or below which a run counts as stable.
pub const SLOPE_STABLE: f64 = 1e-3;

/// Backlog slope at or above which a run counts as clearly unstable.
pub const SLOPE_UNSTABLE: f64 = 1e-2;

pub const DEFAULT_STRIDE: u64 = 100;

/// Label written into summaries to document the averaging window.
pub const WARMUP_RULE: &str = "second half of horizon";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Record every `stride` slots.
    pub stride: u64,
    /// Validate every decision against the physical constraints, and check
    /// conservation and tag safety at every recorded slot.
    pub assert_invariants: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            stride: DEFAULT_STRIDE,
            assert_invariants: true,
        }
    }
}

impl SimOptions {
    pub fn with_stride(mut self, stride: u64) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn with_asserts(mut self, on: bool) -> Self {
        self.assert_invariants = on;
        self
    }
}

/// State of the network after `slot` completed slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub backlog: Backlog,
    pub delivered_cum: u64,
    pub dummy_cum: u64,
    /// Cumulative Ã per computation node.
    pub assigned_cum: Vec<u64>,
    /// Cumulative Z per computation node.
    pub combined_cum: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub lambda: f64,
    pub policy: String,
    pub seed: u64,
    pub horizon: u64,
    pub slots_run: u64,
    pub halted: bool,
    /// Mean of Q + X + Y over the averaging window.
    pub mean_backlog: f64,
    pub mean_virtual_backlog: f64,
    /// Useful deliveries per slot over the averaging window.
    pub delivered_rate: f64,
    /// Least-squares slope of Q + X + Y over the averaging window.
    pub slope: f64,
    pub stable: bool,
    pub digest: String,
    pub computation_nodes: Vec<NodeId>,
    /// Mean Ã per slot, per computation node, over the averaging window.
    pub assigned_rate: Vec<f64>,
    /// Mean Z per slot, per computation node, over the averaging window.
    pub combined_rate: Vec<f64>,
    pub delivered_total: u64,
    pub dummies_total: u64,
    pub threshold_shortfalls: u64,
    pub warmup: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub scenario: ScenarioFile,
    pub summary: RunSummary,
    pub records: Vec<SlotRecord>,
    #[serde(skip)]
    pub final_digest: u64,
}

impl RunResult {
    /// CSV header for [`RunResult::write_csv`].
    pub fn csv_header(computation_nodes: &[NodeId]) -> Vec<String> {
        let mut cols: Vec<String> = [
            "slot",
            "total_backlog",
            "q_backlog",
            "x_backlog",
            "y_backlog",
            "h_backlog",
            "delivered_cum",
            "dummy_cum",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for n in computation_nodes {
            cols.push(format!("atilde_{n}"));
            cols.push(format!("z_{n}"));
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(&self.summary.computation_nodes))?;
        for r in &self.records {
            let b = r.backlog;
            let mut row = vec![r.slot, b.packets(), b.q, b.x, b.y, b.h, r.delivered_cum, r.dummy_cum];
            for (a, z) in r.assigned_cum.iter().zip(&r.combined_cum) {
                row.push(*a);
                row.push(*z);
            }
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything the observer of [`run_observed`] gets to see about one slot.
#[derive(Debug)]
pub struct SlotView<'a> {
    /// Index of the slot just executed.
    pub slot: u64,
    pub arrivals: u64,
    pub push_bits: &'a [bool],
    pub decision: &'a SlotDecision,
    pub outcome: &'a SlotOutcome,
    /// State at the end of the slot.
    pub state: &'a NetworkState,
}

/// Ordinary least-squares slope accumulated online.
#[derive(Debug, Clone, Copy, Default)]
struct SlopeFit {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
}

impl SlopeFit {
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    fn slope(&self) -> f64 {
        let den = self.n * self.sxx - self.sx * self.sx;
        if self.n < 2.0 || den == 0.0 {
            0.0
        } else {
            (self.n * self.sxy - self.sx * self.sy) / den
        }
    }

    fn mean(&self) -> f64 {
        if self.n == 0.0 {
            0.0
        } else {
            self.sy / self.n
        }
    }
}

/// One simulated network driven slot by slot. Randomness is supplied by the
/// caller so that two engines can be fed the same draws.
#[derive(Debug)]
pub struct Engine {
    topology: Topology,
    policy: Policy,
    state: NetworkState,
    options: SimOptions,
    horizon: u64,
    warmup: u64,
    assigned_cum: Vec<u64>,
    combined_cum: Vec<u64>,
    at_warmup: Option<(u64, Vec<u64>, Vec<u64>)>,
    fit: SlopeFit,
    virtual_sum: f64,
    records: Vec<SlotRecord>,
    halted: bool,
    bits: Vec<bool>,
}

impl Engine {
    pub fn new(scenario: &Scenario, options: SimOptions) -> Result<Self, SimError> {
        let policy = Policy::new(scenario.policy, &scenario.topology)
            .map_err(|e| SimError::Invariant {
                slot: 0,
                message: e.to_string(),
            })?;
        let ns = scenario.topology.num_sites();
        Ok(Engine {
            topology: scenario.topology.clone(),
            policy,
            state: NetworkState::new(&scenario.topology),
            options,
            horizon: scenario.horizon,
            warmup: scenario.horizon / 2,
            assigned_cum: vec![0; ns],
            combined_cum: vec![0; ns],
            at_warmup: (scenario.horizon < 2).then(|| (0, vec![0; ns], vec![0; ns])),
            fit: SlopeFit::default(),
            virtual_sum: 0.0,
            records: Vec::new(),
            halted: false,
            bits: vec![false; ns],
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    /// Whether the policy reads the per-site push bits.
    pub fn uses_push_bits(&self) -> bool {
        self.policy.regulated()
    }

    /// Draws this engine's own push bits for the coming slot.
    pub fn draw_bits(&self, streams: &mut RngStreams) -> Vec<bool> {
        let eps = self.policy.spec().eps_b.unwrap_or(0.0);
        if self.uses_push_bits() {
            streams.push.iter_mut().map(|r| draw_push_bit(eps, r)).collect()
        } else {
            vec![false; self.topology.num_sites()]
        }
    }

    /// Runs one slot with the given randomness.
    pub fn step(
        &mut self,
        arrivals: u64,
        push_bits: &[bool],
        mut observer: impl FnMut(&SlotView),
    ) -> Result<(), SimError> {
        let slot = self.state.slot();
        self.bits.clear();
        self.bits.extend_from_slice(push_bits);
        let decision = self.policy.step(&self.state, &self.topology, arrivals, &self.bits);
        let outcome = self
            .state
            .apply_decision(&self.topology, &decision, self.options.assert_invariants)
            .map_err(|violation| SimError::Constraint { slot, violation })?;

        for site in 0..self.assigned_cum.len() {
            self.assigned_cum[site] += decision.assigned(site);
            self.combined_cum[site] += outcome.combined[site];
        }
        let done = slot + 1;
        let backlog = self.state.backlog();
        if done == self.warmup {
            self.at_warmup = Some((self.state.delivered(), self.assigned_cum.clone(), self.combined_cum.clone()));
        }
        if done > self.warmup {
            self.fit.add((done - self.warmup) as f64, backlog.packets() as f64);
            self.virtual_sum += backlog.h as f64;
        }
        if done % self.options.stride == 0 || done == self.horizon {
            if self.options.assert_invariants {
                self.state
                    .check_conservation()
                    .and_then(|_| self.state.check_tag_safety())
                    .map_err(|message| SimError::Invariant { slot: done, message })?;
            }
            self.records.push(self.record(backlog));
        }
        if self.state.max_queue_len() > OVERFLOW_LIMIT {
            self.halted = true;
            if self.records.last().map(|r| r.slot) != Some(done) {
                self.records.push(self.record(backlog));
            }
        }
        observer(&SlotView {
            slot,
            arrivals,
            push_bits,
            decision: &decision,
            outcome: &outcome,
            state: &self.state,
        });
        Ok(())
    }

    fn record(&self, backlog: Backlog) -> SlotRecord {
        SlotRecord {
            slot: self.state.slot(),
            backlog,
            delivered_cum: self.state.delivered(),
            dummy_cum: self.state.dummies_dropped(),
            assigned_cum: self.assigned_cum.clone(),
            combined_cum: self.combined_cum.clone(),
        }
    }

    pub fn finish(self, scenario: &Scenario) -> RunResult {
        let slots_run = self.state.slot();
        let window = slots_run.saturating_sub(self.warmup);
        let per_slot = |now: u64, then: u64| {
            if window == 0 {
                0.0
            } else {
                (now - then) as f64 / window as f64
            }
        };
        let (d0, a0, z0) = self
            .at_warmup
            .clone()
            .unwrap_or((self.state.delivered(), self.assigned_cum.clone(), self.combined_cum.clone()));
        let slope = self.fit.slope();
        let digest = self.state.digest();
        let summary = RunSummary {
            lambda: scenario.arrival.rate(),
            policy: scenario.policy.name.to_string(),
            seed: scenario.seed,
            horizon: scenario.horizon,
            slots_run,
            halted: self.halted,
            mean_backlog: if self.fit.n > 0.0 {
                self.fit.mean()
            } else {
                self.state.backlog().packets() as f64
            },
            mean_virtual_backlog: if self.fit.n > 0.0 { self.virtual_sum / self.fit.n } else { 0.0 },
            delivered_rate: per_slot(self.state.delivered(), d0),
            slope,
            stable: !self.halted && slope <= SLOPE_STABLE,
            digest: format!("{digest:016x}"),
            computation_nodes: self.topology.sites().iter().map(|s| s.node).collect(),
            assigned_rate: self.assigned_cum.iter().zip(&a0).map(|(&a, &b)| per_slot(a, b)).collect(),
            combined_rate: self.combined_cum.iter().zip(&z0).map(|(&a, &b)| per_slot(a, b)).collect(),
            delivered_total: self.state.delivered(),
            dummies_total: self.state.dummies_dropped(),
            threshold_shortfalls: self.policy.shortfalls(),
            warmup: WARMUP_RULE,
        };
        RunResult {
            scenario: scenario.to_file(),
            summary,
            records: self.records,
            final_digest: digest,
        }
    }
}

/// Simulates `scenario.horizon` slots.
pub fn run(scenario: &Scenario, options: SimOptions) -> Result<RunResult, SimError> {
    run_observed(scenario, options, |_| {})
}

/// Like [`run`], calling `observer` after every slot.
pub fn run_observed(
    scenario: &Scenario,
    options: SimOptions,
    mut observer: impl FnMut(&SlotView),
) -> Result<RunResult, SimError> {
    let mut engine = Engine::new(scenario, options)?;
    let mut streams = rng_streams(scenario.seed, &scenario.topology);
    let mut arrivals = ArrivalProcess::new(scenario.arrival);
    while engine.state.slot() < scenario.horizon && !engine.halted {
        let a = arrivals.draw(&mut streams.arrivals);
        let bits = engine.draw_bits(&mut streams);
        engine.step(a, &bits, &mut observer)?;
    }
    Ok(engine.finish(scenario))
}

/// Random streams two coupled runs draw once and share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SharedStreams {
    pub arrivals: bool,
    pub push: bool,
}

impl SharedStreams {
    pub const ARRIVALS: SharedStreams = SharedStreams {
        arrivals: true,
        push: false,
    };
    pub const ALL: SharedStreams = SharedStreams {
        arrivals: true,
        push: true,
    };

    /// Parses a comma-separated list drawn from `arrivals` and `B`.
    pub fn parse(list: &str) -> Result<Self, String> {
        let mut s = SharedStreams::default();
        for name in list.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "arrivals" => s.arrivals = true,
                "B" | "b" => s.push = true,
                other => return Err(format!("unknown stream `{other}` (expected arrivals or B)")),
            }
        }
        Ok(s)
    }
}

/// Per-slot comparison of computation queues of two coupled runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub slots: u64,
    /// Slots at which some X_n^(i) of the first run exceeded the second's.
    pub violations: u64,
    pub first_violation: Option<u64>,
    /// Time-averaged total X of each run.
    pub mean_x: [f64; 2],
    pub digests: [String; 2],
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks that two scenarios differ in nothing but their policy.
pub fn check_coupling(a: &Scenario, b: &Scenario) -> Result<(), SimError> {
    let mismatch = |what: &str| Err(SimError::ScenarioMismatch(what.to_string()));
    if a.topology != b.topology {
        return mismatch("topology");
    }
    if a.arrival != b.arrival {
        return mismatch("arrival process");
    }
    if a.horizon != b.horizon {
        return mismatch("horizon");
    }
    if a.seed != b.seed {
        return mismatch("seed");
    }
    Ok(())
}

/// Runs two policies side by side. Streams listed in `shared` are drawn once
/// per slot and fed to both; the others come from independent families.
/// Shared push bits are only drawn when at least one policy uses them.
pub fn run_coupled(
    a: &Scenario,
    b: &Scenario,
    shared: SharedStreams,
    options: SimOptions,
) -> Result<(RunResult, RunResult, DominanceReport), SimError> {
    check_coupling(a, b)?;
    let mut ea = Engine::new(a, options)?;
    let mut eb = Engine::new(b, options)?;
    let mut sa = rng_streams(a.seed, &a.topology);
    let mut sb = rng_streams_with_prefix(b.seed, &b.topology, "coupled/");
    let mut arr_a = ArrivalProcess::new(a.arrival);
    let mut arr_b = ArrivalProcess::new(b.arrival);
    let ns = a.topology.num_sites();
    let eps = a.policy.eps_b.or(b.policy.eps_b).unwrap_or(0.0);
    let mut report = DominanceReport {
        slots: 0,
        violations: 0,
        first_violation: None,
        mean_x: [0.0; 2],
        digests: Default::default(),
    };
    let mut x_sums = [0.0f64; 2];

    while ea.state.slot() < a.horizon && !ea.halted && !eb.halted {
        let a_count = arr_a.draw(&mut sa.arrivals);
        let b_count = if shared.arrivals { a_count } else { arr_b.draw(&mut sb.arrivals) };
        let (bits_a, bits_b) = if shared.push {
            let bits: Vec<bool> = if ea.uses_push_bits() || eb.uses_push_bits() {
                sa.push.iter_mut().map(|r| draw_push_bit(eps, r)).collect()
            } else {
                vec![false; ns]
            };
            (bits.clone(), bits)
        } else {
            (ea.draw_bits(&mut sa), eb.draw_bits(&mut sb))
        };
        ea.step(a_count, &bits_a, |_| {})?;
        eb.step(b_count, &bits_b, |_| {})?;

        let slot = ea.state.slot();
        let mut violated = false;
        for site in 0..ns {
            let (xa, xb) = (ea.state.stage(site), eb.state.stage(site));
            for side in 0..2 {
                x_sums[0] += xa.raw_len(side) as f64;
                x_sums[1] += xb.raw_len(side) as f64;
                violated |= xa.raw_len(side) > xb.raw_len(side);
            }
        }
        if violated {
            report.violations += 1;
            report.first_violation.get_or_insert(slot);
        }
        report.slots += 1;
    }
    if report.slots > 0 {
        report.mean_x = x_sums.map(|s| s / report.slots as f64);
    }
    let ra = ea.finish(a);
    let rb = eb.finish(b);
    report.digests = [ra.summary.digest.clone(), rb.summary.digest.clone()];
    Ok((ra, rb, report))
}
