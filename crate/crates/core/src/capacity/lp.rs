//! Dense two-phase primal simplex with Bland's anti-cycling rule.

use crate::error::LpError;

/// Default numerical tolerance.
pub const EPS_LP: f64 = 1e-9;

/// Default pivot budget before giving up on a degenerate instance.
pub const PIVOT_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `maximize objective . x` subject to `rows`, `x >= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, cost: f64) -> usize {
        self.num_vars += 1;
        self.objective.push(cost);
        self.num_vars - 1
    }

    /// Adds a row; rows without any coefficient are dropped when `rhs` makes
    /// them trivially true.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(LpRow { coeffs, sense, rhs });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub pivots: u64,
}

/// Tableau in row-major layout: `rows x (cols + 1)`, last column is the rhs.
#[derive(Debug, Clone)]
pub struct LpTableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    num_structural: usize,
    first_artificial: usize,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    eps: f64,
    pivots: u64,
}

impl LpTableau {
    pub fn new(lp: &LinearProgram) -> Self {
        Self::with_tolerance(lp, EPS_LP)
    }

    pub fn with_tolerance(lp: &LinearProgram, eps: f64) -> Self {
        let n = lp.num_vars;
        // Normalise to rhs >= 0 and count auxiliary columns.
        let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
        for row in &lp.rows {
            if row.coeffs.iter().all(|&(_, c)| c == 0.0) {
                let ok = match row.sense {
                    Sense::Le => row.rhs >= -eps,
                    Sense::Eq => row.rhs.abs() <= eps,
                    Sense::Ge => row.rhs <= eps,
                };
                if ok {
                    continue;
                }
            }
            let (coeffs, sense, rhs) = if row.rhs < 0.0 {
                let flipped = match row.sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
                (row.coeffs.iter().map(|&(j, c)| (j, -c)).collect(), flipped, -row.rhs)
            } else {
                (row.coeffs.clone(), row.sense, row.rhs)
            };
            rows.push((coeffs, sense, rhs));
        }
        let num_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let num_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
        let cols = n + num_slack + num_art;
        let width = cols + 1;
        let m = rows.len();
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut next_slack = n;
        let mut next_art = n + num_slack;
        for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
            let row = &mut data[i * width..(i + 1) * width];
            for &(j, c) in coeffs {
                row[j] += c;
            }
            row[cols] = *rhs;
            match sense {
                Sense::Le => {
                    row[next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Sense::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Sense::Eq => {
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&lp.objective);
        LpTableau {
            rows: m,
            cols,
            data,
            basis,
            num_structural: n,
            first_artificial: n + num_slack,
            cost,
            reduced: vec![0.0; width],
            eps,
            pivots: 0,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.entry(i, self.cols)
    }

    /// Reduced-cost row `c_j - c_B B^-1 A_j`, last slot holds `-objective`.
    fn price(&mut self, costs: &[f64]) {
        let w = self.width();
        self.reduced[..self.cols].copy_from_slice(costs);
        self.reduced[self.cols] = 0.0;
        for i in 0..self.rows {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.data[i * w..(i + 1) * w];
                for (r, &a) in self.reduced.iter_mut().zip(row) {
                    *r -= cb * a;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width();
        let (before, rest) = self.data.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        let inv = 1.0 / pivot_row[q];
        for v in pivot_row.iter_mut() {
            *v *= inv;
        }
        pivot_row[q] = 1.0;
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for (v, &p) in self.reduced.iter_mut().zip(pivot_row.iter()) {
                *v -= f * p;
            }
            self.reduced[q] = 0.0;
        }
        self.basis[r] = q;
        self.pivots += 1;
    }

    /// Bland: lowest-index improving column, then the min-ratio row with the
    /// lowest basic index among ties.
    fn iterate(&mut self, allowed_cols: usize, limit: u64) -> Result<(), LpError> {
        loop {
            let Some(q) = (0..allowed_cols).find(|&j| self.reduced[j] > self.eps) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.entry(i, q);
                if a > self.eps {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - self.eps * 1e-3
                                || ((ratio - lr).abs() <= self.eps * 1e-3 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            if self.pivots >= limit {
                return Err(LpError::Degenerate {
                    limit,
                    partial: -self.reduced[self.cols],
                });
            }
            self.pivot(r, q);
        }
    }

    /// Solves to optimality. Pivot count is bounded by `limit`.
    pub fn solve(&mut self, limit: u64) -> Result<LpSolution, LpError> {
        let art = self.first_artificial;
        let has_art = art < self.cols;
        if has_art {
            let infeasibility: f64 = (0..self.rows)
                .filter(|&i| self.basis[i] >= art)
                .map(|i| self.rhs(i))
                .sum();
            if infeasibility > self.eps {
                let phase1: Vec<f64> = (0..self.cols).map(|j| if j >= art { -1.0 } else { 0.0 }).collect();
                self.price(&phase1);
                self.iterate(art, limit)?;
                let residual: f64 = (0..self.rows)
                    .filter(|&i| self.basis[i] >= art)
                    .map(|i| self.rhs(i))
                    .sum();
                if residual > self.eps.sqrt() * 1e-2 {
                    return Err(LpError::Infeasible);
                }
            }
            self.drive_out_artificials();
        }
        let cost = self.cost.clone();
        self.price(&cost);
        self.iterate(art, limit)?;

        let mut x = vec![0.0; self.num_structural];
        for i in 0..self.rows {
            if self.basis[i] < self.num_structural {
                x[self.basis[i]] = self.rhs(i);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(v, c)| v * c).sum();
        Ok(LpSolution {
            objective,
            x,
            pivots: self.pivots,
        })
    }

    /// Pivots zero-level artificials out of the basis; rows where that is
    /// impossible are linearly dependent and get removed.
    fn drive_out_artificials(&mut self) {
        let art = self.first_artificial;
        let mut i = 0;
        while i < self.rows {
            if self.basis[i] >= art {
                let candidate = (0..art)
                    .filter(|&j| self.entry(i, j).abs() > self.eps)
                    .max_by(|&a, &b| self.entry(i, a).abs().total_cmp(&self.entry(i, b).abs()));
                match candidate {
                    Some(q) => self.pivot(i, q),
                    None => {
                        self.remove_row(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    fn remove_row(&mut self, i: usize) {
        let w = self.width();
        self.data.drain(i * w..(i + 1) * w);
        self.basis.remove(i);
        self.rows -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
        LpTableau::new(lp).solve(PIVOT_LIMIT)
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row(vec![(0, 1.0)], Sense::Le, 4.0);
        lp.add_row(vec![(1, 2.0)], Sense::Le, 12.0);
        lp.add_row(vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x + y, x + y = 3, x >= 1, y >= 1.5 -> 3
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 3.0);
        lp.add_row(vec![(0, 1.0)], Sense::Ge, 1.0);
        lp.add_row(vec![(1, 1.0)], Sense::Ge, 1.5);
        let s = solve(&lp).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert!(s.x[0] >= 1.0 - 1e-9 && s.x[1] >= 1.5 - 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_row(vec![(0, 1.0)], Sense::Le, 1.0);
        lp.add_row(vec![(0, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve(&lp).unwrap_err(), LpError::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row(vec![(0, 1.0), (1, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve(&lp).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        // x - y = 0 twice, x + y <= 4 -> max x = 2
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row(vec![(0, 1.0), (1, -1.0)], Sense::Eq, 0.0);
        lp.add_row(vec![(0, -1.0), (1, 1.0)], Sense::Eq, 0.0);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 4.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under the largest-coefficient rule.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -150.0, 0.02, -6.0];
        lp.add_row(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Sense::Le, 0.0);
        lp.add_row(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Sense::Le, 0.0);
        lp.add_row(vec![(2, 1.0)], Sense::Le, 1.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective - 0.05).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn pivot_limit_reports_partial_result() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row(vec![(0, 1.0)], Sense::Le, 4.0);
        lp.add_row(vec![(1, 2.0)], Sense::Le, 12.0);
        lp.add_row(vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0);
        let err = LpTableau::new(&lp).solve(1).unwrap_err();
        assert!(matches!(err, LpError::Degenerate { limit: 1, .. }));
    }
}
