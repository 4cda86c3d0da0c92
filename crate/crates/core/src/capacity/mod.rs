//! Maximum sustainable query rate from the multicommodity-flow LP.
//!
//! Each computation site `n` used at rate `λ_n` needs three flows of rate
//! `λ_n`: `s1 -> n`, `s2 -> n` and `n -> d`. All flows share link capacity
//! with both directions of an edge counted together, and `λ_n <= C_n`.

pub mod lp;
pub mod oracle;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::LpError;
use crate::topology::{NodeId, Topology};
use lp::{LinearProgram, LpTableau, Sense, PIVOT_LIMIT};

pub use oracle::oracle_lambda_star;

/// Which computation sites the bound may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Only the site at this node.
    Single(NodeId),
    /// All computation sites.
    Multi,
}

/// How an undirected edge's capacity constrains its two arcs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkModel {
    /// Both directions together carry at most `R` per slot.
    #[default]
    Shared,
    /// Each direction carries at most `R` per slot.
    Directed,
}

#[derive(Debug, Clone)]
pub struct CapacityProblem {
    pub topology: Topology,
    pub mode: BoundMode,
    pub links: LinkModel,
}

impl CapacityProblem {
    pub fn single(topology: Topology, node: NodeId) -> Self {
        CapacityProblem {
            topology,
            mode: BoundMode::Single(node),
            links: LinkModel::Shared,
        }
    }

    pub fn multi(topology: Topology) -> Self {
        CapacityProblem {
            topology,
            mode: BoundMode::Multi,
            links: LinkModel::Shared,
        }
    }

    pub fn with_links(mut self, links: LinkModel) -> Self {
        self.links = links;
        self
    }

    /// Computation nodes included in the bound, with their capacities.
    pub fn sites(&self) -> Result<Vec<(NodeId, u32)>, LpError> {
        match self.mode {
            BoundMode::Multi => Ok(self.topology.sites().iter().map(|s| (s.node, s.capacity)).collect()),
            BoundMode::Single(node) => self
                .topology
                .sites()
                .iter()
                .find(|s| s.node == node)
                .map(|s| vec![(s.node, s.capacity)])
                .ok_or_else(|| LpError::Invalid(format!("node {node} is not a computation node"))),
        }
    }

    /// Source/destination pairs, three per included site, in the order
    /// `(s1, n), (s2, n), (n, d)`.
    pub fn commodities(&self) -> Result<Vec<Commodity>, LpError> {
        let [s1, s2] = self.topology.sources();
        let d = self.topology.destination();
        Ok(self
            .sites()?
            .into_iter()
            .enumerate()
            .flat_map(|(rate, (n, _))| {
                [(s1, n), (s2, n), (n, d)].map(|(source, sink)| Commodity {
                    source,
                    sink,
                    site: n,
                    rate,
                })
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Commodity {
    pub source: NodeId,
    pub sink: NodeId,
    /// Computation node this flow serves.
    pub site: NodeId,
    /// Index of the rate variable the flow is tied to.
    #[serde(skip)]
    pub rate: usize,
}

/// Directed arc of an undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: NodeId,
    pub to: NodeId,
    pub edge: usize,
}

/// The LP plus the bookkeeping needed to read a solution back.
#[derive(Debug, Clone)]
pub struct BuiltLp {
    pub lp: LinearProgram,
    pub commodities: Vec<Commodity>,
    pub arcs: Vec<Arc>,
    /// Rate variable per included site.
    pub rate_vars: Vec<usize>,
    pub sites: Vec<(NodeId, u32)>,
    /// `flow_vars[c][a]`: variable for commodity `c` on arc `a`, absent for
    /// arcs leaving the commodity's sink.
    pub flow_vars: Vec<Vec<Option<usize>>>,
    pub conservation_rows: usize,
    pub capacity_rows: usize,
    pub computation_rows: usize,
}

pub fn build_lp(problem: &CapacityProblem) -> Result<BuiltLp, LpError> {
    let topo = &problem.topology;
    let sites = problem.sites()?;
    let commodities = problem.commodities()?;
    let arcs: Vec<Arc> = topo
        .edges()
        .iter()
        .enumerate()
        .flat_map(|(edge, e)| {
            [
                Arc { from: e.a, to: e.b, edge },
                Arc { from: e.b, to: e.a, edge },
            ]
        })
        .collect();

    let mut lp = LinearProgram::new(0);
    let rate_vars: Vec<usize> = sites.iter().map(|_| lp.add_var(1.0)).collect();
    let flow_vars: Vec<Vec<Option<usize>>> = commodities
        .iter()
        .map(|c| {
            arcs.iter()
                .map(|a| (a.from != c.sink).then(|| lp.add_var(0.0)))
                .collect()
        })
        .collect();

    // Conservation: out - in = +λ at the source, -λ at the sink.
    let mut conservation_rows = 0;
    for (ci, c) in commodities.iter().enumerate() {
        for v in 0..topo.num_nodes() {
            let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
            for (ai, a) in arcs.iter().enumerate() {
                if let Some(var) = flow_vars[ci][ai] {
                    if a.from == v {
                        *coeffs.entry(var).or_default() += 1.0;
                    }
                    if a.to == v {
                        *coeffs.entry(var).or_default() -= 1.0;
                    }
                }
            }
            let rate = rate_vars[c.rate];
            if v == c.source {
                *coeffs.entry(rate).or_default() -= 1.0;
            }
            if v == c.sink {
                *coeffs.entry(rate).or_default() += 1.0;
            }
            let coeffs: Vec<(usize, f64)> = coeffs.into_iter().filter(|&(_, x)| x != 0.0).collect();
            if !coeffs.is_empty() {
                lp.add_row(coeffs, Sense::Eq, 0.0);
                conservation_rows += 1;
            }
        }
    }

    let mut capacity_rows = 0;
    match problem.links {
        LinkModel::Shared => {
            for (edge, e) in topo.edges().iter().enumerate() {
                let coeffs = arc_vars(&flow_vars, &arcs, |a| a.edge == edge);
                lp.add_row(coeffs, Sense::Le, e.capacity as f64);
                capacity_rows += 1;
            }
        }
        LinkModel::Directed => {
            for (ai, arc) in arcs.iter().enumerate() {
                let coeffs: Vec<(usize, f64)> = flow_vars.iter().filter_map(|f| f[ai]).map(|v| (v, 1.0)).collect();
                lp.add_row(coeffs, Sense::Le, topo.edges()[arc.edge].capacity as f64);
                capacity_rows += 1;
            }
        }
    }

    for (&var, &(_, cap)) in rate_vars.iter().zip(&sites) {
        lp.add_row(vec![(var, 1.0)], Sense::Le, cap as f64);
    }

    Ok(BuiltLp {
        lp,
        commodities,
        arcs,
        rate_vars,
        computation_rows: sites.len(),
        sites,
        flow_vars,
        conservation_rows,
        capacity_rows,
    })
}

fn arc_vars(flow_vars: &[Vec<Option<usize>>], arcs: &[Arc], pick: impl Fn(&Arc) -> bool) -> Vec<(usize, f64)> {
    flow_vars
        .iter()
        .flat_map(|f| {
            arcs.iter()
                .zip(f)
                .filter(|(a, _)| pick(a))
                .filter_map(|(_, v)| v.map(|v| (v, 1.0)))
        })
        .collect()
}

/// Flow of one commodity, nonzero arcs only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommodityFlow {
    pub source: NodeId,
    pub sink: NodeId,
    pub site: NodeId,
    pub rate: f64,
    pub arcs: Vec<(NodeId, NodeId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub lambda_star: f64,
    /// Rate assigned to each included computation node.
    pub per_site: Vec<(NodeId, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flows: Option<Vec<CommodityFlow>>,
    pub pivots: u64,
}

/// Solves the LP; with `certificate` the optimal flows are returned too.
pub fn solve_lambda_star(problem: &CapacityProblem, certificate: bool) -> Result<Bound, LpError> {
    solve_with_limit(problem, certificate, PIVOT_LIMIT)
}

pub fn solve_with_limit(problem: &CapacityProblem, certificate: bool, pivot_limit: u64) -> Result<Bound, LpError> {
    let built = build_lp(problem)?;
    let solution = LpTableau::new(&built.lp).solve(pivot_limit)?;
    let per_site: Vec<(NodeId, f64)> = built
        .sites
        .iter()
        .zip(&built.rate_vars)
        .map(|(&(n, _), &v)| (n, solution.x[v]))
        .collect();
    let flows = certificate.then(|| {
        built
            .commodities
            .iter()
            .zip(&built.flow_vars)
            .map(|(c, vars)| CommodityFlow {
                source: c.source,
                sink: c.sink,
                site: c.site,
                rate: solution.x[built.rate_vars[c.rate]],
                arcs: built
                    .arcs
                    .iter()
                    .zip(vars)
                    .filter_map(|(a, v)| v.map(|v| (a.from, a.to, solution.x[v])))
                    .filter(|&(_, _, f)| f > lp::EPS_LP)
                    .collect(),
            })
            .collect()
    });
    Ok(Bound {
        lambda_star: solution.objective,
        per_site,
        flows,
        pivots: solution.pivots,
    })
}

impl Bound {
    /// Checks the flow certificate against conservation, link and
    /// computation capacities within `tol`.
    pub fn check_certificate(&self, problem: &CapacityProblem, tol: f64) -> Result<(), String> {
        let flows = self.flows.as_ref().ok_or("no certificate")?;
        let topo = &problem.topology;
        for f in flows {
            let mut net = vec![0.0; topo.num_nodes()];
            for &(from, to, x) in &f.arcs {
                if x < -tol {
                    return Err(format!("negative flow {x} on {from}->{to}"));
                }
                if from == f.sink && f.source != f.sink {
                    return Err(format!("flow leaves sink {from}"));
                }
                topo.edge_between(from, to).ok_or(format!("{from}->{to} is not an edge"))?;
                net[from] += x;
                net[to] -= x;
            }
            for (v, &out) in net.iter().enumerate() {
                let want = if f.source == f.sink {
                    0.0
                } else if v == f.source {
                    f.rate
                } else if v == f.sink {
                    -f.rate
                } else {
                    0.0
                };
                if (out - want).abs() > tol {
                    return Err(format!("conservation fails at node {v}: {out} vs {want}"));
                }
            }
        }
        for (idx, e) in topo.edges().iter().enumerate() {
            let mut forward = 0.0;
            let mut backward = 0.0;
            for f in flows {
                for &(from, to, x) in &f.arcs {
                    if topo.edge_between(from, to) == Some(idx) {
                        if from == e.a {
                            forward += x;
                        } else {
                            backward += x;
                        }
                    }
                }
            }
            let used = match problem.links {
                LinkModel::Shared => forward + backward,
                LinkModel::Directed => f64::max(forward, backward),
            };
            if used > e.capacity as f64 + tol {
                return Err(format!("edge ({},{}) carries {used} > {}", e.a, e.b, e.capacity));
            }
        }
        let sites = problem.sites().map_err(|e| e.to_string())?;
        for (&(n, rate), &(_, cap)) in self.per_site.iter().zip(&sites) {
            if rate > cap as f64 + tol {
                return Err(format!("node {n} computes {rate} > {cap}"));
            }
        }
        let total: f64 = self.per_site.iter().map(|p| p.1).sum();
        if (total - self.lambda_star).abs() > tol {
            return Err(format!("site rates sum to {total}, not {}", self.lambda_star));
        }
        Ok(())
    }
}

/// Max-flow value between two nodes with undirected capacities, used as a
/// cut upper bound on any single commodity.
pub fn min_cut(topology: &Topology, source: NodeId, sink: NodeId) -> u64 {
    if source == sink {
        return u64::MAX;
    }
    let n = topology.num_nodes();
    let mut residual = vec![vec![0i64; n]; n];
    for e in topology.edges() {
        residual[e.a][e.b] += e.capacity as i64;
        residual[e.b][e.a] += e.capacity as i64;
    }
    let mut total = 0u64;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[source] = source;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && residual[u][v] > 0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            return total;
        }
        let mut push = i64::MAX;
        let mut v = sink;
        while v != source {
            push = push.min(residual[prev[v]][v]);
            v = prev[v];
        }
        let mut v = sink;
        while v != source {
            residual[prev[v]][v] -= push;
            residual[v][prev[v]] += push;
            v = prev[v];
        }
        total += push as u64;
    }
}
