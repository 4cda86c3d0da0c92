//! Brute-force reference for the capacity bound on small graphs.
//!
//! Works on the path formulation instead of arc flows: every simple path of
//! every commodity gets a variable, and feasibility of a given rate is
//! decided exactly with a phase-one simplex over rationals. The rate itself
//! is found by golden-section search, keeping the lower end of the bracket
//! feasible at all times.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{BoundMode, CapacityProblem, LinkModel};
use crate::error::LpError;
use crate::topology::{NodeId, Topology};

pub const MAX_NODES: usize = 6;
pub const MAX_EDGES: usize = 10;

/// Final bracket width of the search.
const BRACKET: f64 = 1e-9;

type Q = BigRational;

/// A simple path as the list of `(edge, forward)` hops.
type Path = Vec<(usize, bool)>;

pub fn oracle_lambda_star(problem: &CapacityProblem) -> Result<f64, LpError> {
    let topo = &problem.topology;
    if topo.num_nodes() > MAX_NODES || topo.edges().len() > MAX_EDGES {
        return Err(LpError::TooLarge {
            nodes: topo.num_nodes(),
            edges: topo.edges().len(),
        });
    }
    let instance = PathInstance::new(problem)?;
    let upper: f64 = instance.site_caps.iter().map(|&c| c as f64).sum();
    if upper == 0.0 {
        return Ok(0.0);
    }
    if instance.feasible(upper) {
        return Ok(upper);
    }

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let score = |lambda: f64| if instance.feasible(lambda) { lambda } else { -lambda };
    let (mut lo, mut hi) = (0.0f64, upper);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = score(x1);
    let mut f2 = score(x2);
    while hi - lo > BRACKET {
        if f1 < f2 {
            // Both feasible: the optimum lies right of x1.
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = score(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = score(x1);
        }
    }
    Ok(lo)
}

struct PathInstance {
    num_edges: usize,
    capacities: Vec<u32>,
    directed: bool,
    multi: bool,
    site_caps: Vec<u32>,
    /// `(site, paths)` for every commodity whose endpoints differ.
    commodities: Vec<(usize, Vec<Path>)>,
}

impl PathInstance {
    fn new(problem: &CapacityProblem) -> Result<Self, LpError> {
        let topo = &problem.topology;
        let sites: Vec<(NodeId, u32)> = match problem.mode {
            BoundMode::Multi => topo.sites().iter().map(|s| (s.node, s.capacity)).collect(),
            BoundMode::Single(n) => {
                let site = topo
                    .sites()
                    .iter()
                    .find(|s| s.node == n)
                    .ok_or_else(|| LpError::Invalid(format!("node {n} is not a computation node")))?;
                vec![(site.node, site.capacity)]
            }
        };
        let [s1, s2] = topo.sources();
        let d = topo.destination();
        let mut commodities = Vec::new();
        for (i, &(n, _)) in sites.iter().enumerate() {
            for (from, to) in [(s1, n), (s2, n), (n, d)] {
                if from != to {
                    commodities.push((i, simple_paths(topo, from, to)));
                }
            }
        }
        Ok(PathInstance {
            num_edges: topo.edges().len(),
            capacities: topo.edges().iter().map(|e| e.capacity).collect(),
            directed: problem.links == LinkModel::Directed,
            multi: matches!(problem.mode, BoundMode::Multi),
            site_caps: sites.iter().map(|s| s.1).collect(),
            commodities,
        })
    }

    /// Is total rate `lambda` achievable?
    fn feasible(&self, lambda: f64) -> bool {
        let lambda = Q::from_float(lambda).expect("finite rate");
        let num_paths: usize = self.commodities.iter().map(|c| c.1.len()).sum();
        let num_sites = self.site_caps.len();
        // Columns: path flows, then per-site rates (multi only), then slacks.
        let rate_col = num_paths;
        let rate_cols = if self.multi { num_sites } else { 0 };
        let mut rows: Vec<(Vec<(usize, Q)>, Q, bool)> = Vec::new();

        let mut col = 0;
        for (site, paths) in &self.commodities {
            let mut coeffs: Vec<(usize, Q)> = (col..col + paths.len()).map(|j| (j, Q::one())).collect();
            col += paths.len();
            if self.multi {
                coeffs.push((rate_col + site, -Q::one()));
                rows.push((coeffs, Q::zero(), false));
            } else {
                rows.push((coeffs, lambda.clone(), false));
            }
        }
        if self.multi {
            for (m, &cap) in self.site_caps.iter().enumerate() {
                rows.push((vec![(rate_col + m, Q::one())], Q::from_integer(cap.into()), true));
            }
            let all = (0..num_sites).map(|m| (rate_col + m, Q::one())).collect();
            rows.push((all, lambda.clone(), false));
        } else if lambda > Q::from_integer(self.site_caps[0].into()) {
            return false;
        }

        let links = if self.directed { 2 * self.num_edges } else { self.num_edges };
        let mut link_rows: Vec<Vec<(usize, Q)>> = vec![Vec::new(); links];
        let mut col = 0;
        for (_, paths) in &self.commodities {
            for path in paths {
                for &(edge, forward) in path {
                    let link = if self.directed { 2 * edge + usize::from(!forward) } else { edge };
                    link_rows[link].push((col, Q::one()));
                }
                col += 1;
            }
        }
        for (link, coeffs) in link_rows.into_iter().enumerate() {
            let edge = if self.directed { link / 2 } else { link };
            rows.push((coeffs, Q::from_integer(self.capacities[edge].into()), true));
        }

        phase_one_feasible(num_paths + rate_cols, &rows)
    }
}

fn simple_paths(topo: &Topology, from: NodeId, to: NodeId) -> Vec<Path> {
    fn walk(topo: &Topology, at: NodeId, to: NodeId, seen: &mut Vec<bool>, path: &mut Path, out: &mut Vec<Path>) {
        if at == to {
            out.push(path.clone());
            return;
        }
        for &(next, edge) in topo.neighbors(at) {
            if !seen[next] {
                seen[next] = true;
                path.push((edge, topo.edges()[edge].a == at));
                walk(topo, next, to, seen, path, out);
                path.pop();
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; topo.num_nodes()];
    seen[from] = true;
    let mut out = Vec::new();
    walk(topo, from, to, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// Decides `{x >= 0 : rows}` nonempty, where each row is `a.x = b` or, with
/// the flag set, `a.x <= b`. Exact arithmetic, Bland's rule.
fn phase_one_feasible(num_vars: usize, rows: &[(Vec<(usize, Q)>, Q, bool)]) -> bool {
    let m = rows.len();
    let num_slacks = rows.iter().filter(|r| r.2).count();
    let art0 = num_vars + num_slacks;
    let cols = art0 + m;
    let mut t: Vec<Vec<Q>> = Vec::with_capacity(m);
    let mut slack = num_vars;
    for (i, (coeffs, rhs, le)) in rows.iter().enumerate() {
        let mut row = vec![Q::zero(); cols + 1];
        for (j, a) in coeffs {
            row[*j] += a;
        }
        if *le {
            row[slack] = Q::one();
            slack += 1;
        }
        row[cols] = rhs.clone();
        if rhs.is_negative() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
        }
        row[art0 + i] = Q::one();
        t.push(row);
    }
    let mut basis: Vec<usize> = (art0..cols).collect();
    // Objective: minimize the artificial sum. `z[j]` is the reduced cost.
    let mut z = vec![Q::zero(); cols + 1];
    for row in &t {
        for (zj, a) in z.iter_mut().zip(row) {
            *zj -= a;
        }
    }
    for zj in &mut z[art0..cols] {
        *zj = Q::zero();
    }
    loop {
        let Some(q) = (0..art0).find(|&j| z[j].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..m {
            if t[i][q].is_positive() {
                let ratio = &t[i][cols] / &t[i][q];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            // Cannot happen for a bounded-below objective.
            break;
        };
        let pivot = t[r][q].clone();
        for v in t[r].iter_mut() {
            *v /= &pivot;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && !row[q].is_zero() {
                let f = row[q].clone();
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    if !p.is_zero() {
                        *v -= &f * p;
                    }
                }
            }
        }
        if !z[q].is_zero() {
            let f = z[q].clone();
            for (v, p) in z.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        }
        basis[r] = q;
    }
    (0..m).all(|i| basis[i] < art0 || t[i][cols].is_zero())
}
