//! Dense bounded-variable primal simplex.
//!
//! Every row `a x (sense) b` gets a logical variable `r = a x` bounded by the row's
//! right-hand side, so the tableau is `[A | -I]` with an artificial column added for
//! each row whose initial activity violates its bounds. Phase one minimizes the sum of
//! artificials; phase two fixes them at zero. Dantzig pricing switches to Bland's rule
//! after a run of degenerate pivots. The tableau is rebuilt from a fresh basis inverse
//! periodically and at the end of each phase.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::lifting::Sense;

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;
const REFRESH_EVERY: usize = 100;
/// A refresh moving basic values by more than this triggers a reinversion.
const DRIFT_TOL: f64 = 1e-9;
const INFEASIBLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min objective . x + constant` subject to rows and finite variable bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub objective: Vec<f64>,
    pub constant: f64,
    pub rows: Vec<LpRow>,
}

impl LinearProgram {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>, objective: Vec<f64>) -> Self {
        LinearProgram { lb, ub, objective, constant: 0.0, rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.lb.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(LpRow { coeffs, sense, rhs });
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest bound or row violation at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for ((v, lo), hi) in x.iter().zip(&self.lb).zip(&self.ub) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for row in &self.rows {
            let a: f64 = row.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
            let v = match row.sense {
                Sense::Eq => (a - row.rhs).abs(),
                Sense::Le => a - row.rhs,
                Sense::Ge => row.rhs - a,
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable {0} has a non-finite or inverted bound")]
    BadBounds(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum At {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    cols: usize,
    /// Row-major `m x cols` representation of `B^-1 [A | -I | art]`.
    t: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    state: Vec<At>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    d: Vec<f64>,
    /// Original sparse columns, for refreshing basic values.
    orig: Vec<Vec<(usize, f64)>>,
    structural: usize,
    iterations: usize,
}

impl Tableau {
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.cols..(i + 1) * self.cols]
    }

    fn compute_reduced_costs(&mut self) {
        self.d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.cols..(i + 1) * self.cols];
            for (dj, tij) in self.d.iter_mut().zip(row) {
                *dj -= cb * tij;
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    /// Recomputes basic values from nonbasic ones: `x_B = -B^-1 N x_N`, where the logical
    /// block of the tableau holds `-B^-1`. Returns the largest change.
    fn refresh(&mut self) -> f64 {
        let mut rhs = vec![0.0; self.m];
        let mut drift: f64 = 0.0;
        for j in 0..self.cols {
            if self.state[j] == At::Basic || self.x[j] == 0.0 {
                continue;
            }
            for &(i, a) in &self.orig[j] {
                rhs[i] += a * self.x[j];
            }
        }
        for i in 0..self.m {
            let row = self.row(i);
            let binv = &row[self.structural..self.structural + self.m];
            // x_B = -B^-1 N x_N and B^-1 = -binv
            let v: f64 = binv.iter().zip(&rhs).map(|(b, r)| b * r).sum();
            let j = self.basis[i];
            drift = drift.max((self.x[j] - v).abs() / (1.0 + v.abs()));
            self.x[j] = v;
        }
        drift
    }

    /// Refresh, reinverting when the tableau has drifted; reduced costs are recomputed.
    fn resync(&mut self) -> Result<(), LpError> {
        if self.refresh() > DRIFT_TOL {
            self.reinvert()
        } else {
            self.compute_reduced_costs();
            Ok(())
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if self.state[j] == At::Basic || self.ub[j] - self.lb[j] <= 0.0 {
                continue;
            }
            let dj = self.d[j];
            let dir = match self.state[j] {
                At::Lower if dj < -OPT_TOL => 1.0,
                At::Upper if dj > OPT_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| dj.abs() > self.d[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    /// Harris two-pass ratio test. Returns false when the LP is unbounded along the ray.
    fn step(&mut self, j: usize, dir: f64, bland: bool) -> Result<(bool, f64), LpError> {
        let range = self.ub[j] - self.lb[j];
        // pass one: largest step keeping every basic variable within its bounds plus tolerance
        let mut t_max = f64::INFINITY;
        for i in 0..self.m {
            let alpha = dir * self.t[i * self.cols + j];
            let b = self.basis[i];
            if alpha > PIVOT_TOL && self.lb[b].is_finite() {
                t_max = t_max.min((self.x[b] - self.lb[b] + FEAS_TOL) / alpha);
            } else if alpha < -PIVOT_TOL && self.ub[b].is_finite() {
                t_max = t_max.min((self.ub[b] - self.x[b] + FEAS_TOL) / -alpha);
            }
        }
        let mut leave: Option<(usize, f64, f64)> = None;
        if range > t_max {
            // pass two: among rows whose exact ratio fits, take the largest pivot
            for i in 0..self.m {
                let alpha = dir * self.t[i * self.cols + j];
                let b = self.basis[i];
                let t = if alpha > PIVOT_TOL && self.lb[b].is_finite() {
                    (self.x[b] - self.lb[b]) / alpha
                } else if alpha < -PIVOT_TOL && self.ub[b].is_finite() {
                    (self.ub[b] - self.x[b]) / -alpha
                } else {
                    continue;
                };
                if t > t_max {
                    continue;
                }
                let wins = match leave {
                    None => true,
                    Some((r, a, _)) if bland => self.basis[i] < self.basis[r] || (self.basis[i] == self.basis[r] && alpha.abs() > a.abs()),
                    Some((_, a, _)) => alpha.abs() > a.abs(),
                };
                if wins {
                    leave = Some((i, alpha, t.max(0.0)));
                }
            }
        }
        let t_step = match leave {
            Some((_, _, t)) => t,
            None if range.is_finite() => range,
            None => return Ok((false, 0.0)),
        };
        for i in 0..self.m {
            let tij = self.t[i * self.cols + j];
            if tij != 0.0 {
                let b = self.basis[i];
                self.x[b] -= dir * t_step * tij;
            }
        }
        self.x[j] += dir * t_step;
        match leave {
            None => {
                // bound flip
                self.state[j] = if dir > 0.0 { At::Upper } else { At::Lower };
                self.x[j] = if dir > 0.0 { self.ub[j] } else { self.lb[j] };
            }
            Some((r, alpha, _)) => {
                let b = self.basis[r];
                if alpha > 0.0 {
                    self.state[b] = At::Lower;
                    self.x[b] = self.lb[b];
                } else {
                    self.state[b] = At::Upper;
                    self.x[b] = self.ub[b];
                }
                self.pivot(r, j)?;
            }
        }
        self.iterations += 1;
        Ok((true, t_step))
    }

    /// Rebuilds the tableau from the original columns with a fresh inverse of the basis.
    fn reinvert(&mut self) -> Result<(), LpError> {
        let (m, cols) = (self.m, self.cols);
        let mut b = DMatrix::zeros(m, m);
        for (r, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.orig[j] {
                b[(i, r)] = a;
            }
        }
        let inv = b.try_inverse().ok_or_else(|| LpError::Numerical("singular basis".into()))?;
        self.t.fill(0.0);
        for (j, col) in self.orig.iter().enumerate() {
            if self.state[j] == At::Basic {
                continue;
            }
            for &(i, a) in col {
                for r in 0..m {
                    self.t[r * cols + j] += inv[(r, i)] * a;
                }
            }
        }
        for (r, &j) in self.basis.iter().enumerate() {
            self.t[r * cols + j] = 1.0;
        }
        self.refresh();
        self.compute_reduced_costs();
        Ok(())
    }

    fn pivot(&mut self, r: usize, j: usize) -> Result<(), LpError> {
        let cols = self.cols;
        let p = self.t[r * cols + j];
        if p.abs() < PIVOT_TOL * 1e-3 {
            return Err(LpError::Numerical(format!("pivot element {p:e} too small")));
        }
        let inv = 1.0 / p;
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        let nz: Vec<usize> = (0..cols).filter(|&k| pivot_row[k] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * cols..(i + 1) * cols];
            for &k in &nz {
                row[k] -= f * pivot_row[k];
            }
            row[j] = 0.0;
        }
        let dj = self.d[j];
        if dj != 0.0 {
            for &k in &nz {
                self.d[k] -= dj * pivot_row[k];
            }
            self.d[j] = 0.0;
        }
        self.basis[r] = j;
        self.state[j] = At::Basic;
        Ok(())
    }

    fn optimize(&mut self, max_iter: usize) -> Result<bool, LpError> {
        let mut degenerate = 0usize;
        let mut since_refresh = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::IterationLimit);
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(true);
            };
            let (bounded, t) = self.step(j, dir, bland)?;
            if !bounded {
                return Ok(false);
            }
            if t <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            since_refresh += 1;
            if since_refresh >= REFRESH_EVERY {
                since_refresh = 0;
                self.resync()?;
            }
        }
    }
}

/// Solves `lp`; `Infeasible` and `Unbounded` are statuses, numerical trouble is an error.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.num_vars();
    for j in 0..n {
        if !lp.lb[j].is_finite() || !lp.ub[j].is_finite() || lp.lb[j] > lp.ub[j] {
            return Err(LpError::BadBounds(j));
        }
    }
    let m = lp.rows.len();

    // structural columns start at their lower bound
    let mut activity = vec![0.0; m];
    for (i, row) in lp.rows.iter().enumerate() {
        activity[i] = row.coeffs.iter().map(|&(j, c)| c * lp.lb[j]).sum();
    }
    let row_bounds: Vec<(f64, f64)> = lp
        .rows
        .iter()
        .map(|r| match r.sense {
            Sense::Eq => (r.rhs, r.rhs),
            Sense::Le => (f64::NEG_INFINITY, r.rhs),
            Sense::Ge => (r.rhs, f64::INFINITY),
        })
        .collect();
    let artificial_rows: Vec<usize> = (0..m)
        .filter(|&i| activity[i] < row_bounds[i].0 - FEAS_TOL || activity[i] > row_bounds[i].1 + FEAS_TOL)
        .collect();
    let k = artificial_rows.len();
    let cols = n + m + k;

    let mut orig: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, c) in &row.coeffs {
            if c != 0.0 {
                orig[j].push((i, c));
            }
        }
        orig[n + i].push((i, -1.0));
    }

    let mut lb = lp.lb.clone();
    let mut ub = lp.ub.clone();
    let mut x = lp.lb.clone();
    let mut state = vec![At::Lower; n];
    let mut basis = vec![0usize; m];
    let mut diag = vec![-1.0; m];
    for i in 0..m {
        lb.push(row_bounds[i].0);
        ub.push(row_bounds[i].1);
        x.push(activity[i]);
        state.push(At::Basic);
        basis[i] = n + i;
    }
    for (a, &i) in artificial_rows.iter().enumerate() {
        let col = n + m + a;
        let (lo, hi) = row_bounds[i];
        let beta = if activity[i] < lo { lo } else { hi };
        let sigma = if beta - activity[i] > 0.0 { 1.0 } else { -1.0 };
        // logical leaves the basis at the violated bound
        x[n + i] = beta;
        state[n + i] = if activity[i] < lo { At::Lower } else { At::Upper };
        orig[col].push((i, sigma));
        lb.push(0.0);
        ub.push(f64::INFINITY);
        x.push((beta - activity[i]).abs());
        state.push(At::Basic);
        basis[i] = col;
        diag[i] = sigma;
    }

    let mut t = vec![0.0; m * cols];
    for (j, col) in orig.iter().enumerate() {
        for &(i, a) in col {
            t[i * cols + j] = a / diag[i];
        }
    }

    let mut cost = vec![0.0; cols];
    for c in cost.iter_mut().skip(n + m) {
        *c = 1.0;
    }
    let mut tab = Tableau { m, cols, t, lb, ub, x, state, basis, cost, d: Vec::new(), orig, structural: n, iterations: 0 };
    let max_iter = 50 * (cols + m).max(100);

    if k > 0 {
        tab.compute_reduced_costs();
        tab.optimize(max_iter)?;
        tab.resync()?;
        if tab.choose_entering(false).is_some() {
            // fresh reduced costs may reopen phase one
            tab.optimize(max_iter)?;
            tab.resync()?;
        }
        let infeasibility: f64 = (n + m..cols).map(|j| tab.x[j].abs()).sum();
        let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        // declaring a feasible LP infeasible is the costly mistake, so the threshold is loose
        if infeasibility > INFEASIBLE_TOL * scale {
            return Ok(LpSolution { status: LpStatus::Infeasible, value: f64::INFINITY, x: Vec::new(), iterations: tab.iterations });
        }
        for j in n + m..cols {
            tab.ub[j] = 0.0;
            tab.cost[j] = 0.0;
            if tab.state[j] != At::Basic {
                tab.x[j] = 0.0;
                tab.state[j] = At::Lower;
            }
        }
    }

    for j in 0..n {
        tab.cost[j] = lp.objective[j];
    }
    tab.compute_reduced_costs();
    let mut bounded = tab.optimize(max_iter)?;
    if bounded {
        tab.resync()?;
        if tab.choose_entering(false).is_some() {
            bounded = tab.optimize(max_iter)?;
            tab.refresh();
        }
    }
    if !bounded {
        return Ok(LpSolution { status: LpStatus::Unbounded, value: f64::NEG_INFINITY, x: Vec::new(), iterations: tab.iterations });
    }

    let mut xs: Vec<f64> = tab.x[..n].to_vec();
    for j in 0..n {
        xs[j] = xs[j].clamp(lp.lb[j], lp.ub[j]);
    }
    let viol = lp.violation(&xs);
    let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
    if viol > 1e-6 * scale {
        return Err(LpError::Numerical(format!("final point violates constraints by {viol:e}")));
    }
    Ok(LpSolution { status: LpStatus::Optimal, value: lp.value(&xs), x: xs, iterations: tab.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bounded_variable() {
        let lp = LinearProgram::new(vec![2.0], vec![3.0], vec![1.0]);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.value, 2.0);
        let lp = LinearProgram::new(vec![2.0], vec![3.0], vec![-1.0]);
        assert_eq!(solve_lp(&lp).unwrap().value, -3.0);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new(vec![-5.0], vec![5.0], vec![1.0]);
        lp.add_row(vec![(0, 1.0)], Sense::Ge, 1.0);
        lp.add_row(vec![(0, 1.0)], Sense::Le, 0.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn small_textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        let mut lp = LinearProgram::new(vec![0.0, 0.0], vec![100.0, 100.0], vec![-3.0, -5.0]);
        lp.add_row(vec![(0, 1.0)], Sense::Le, 4.0);
        lp.add_row(vec![(1, 2.0)], Sense::Le, 12.0);
        lp.add_row(vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_with_phase_one() {
        // x + y = 1, x - y = 0.5
        let mut lp = LinearProgram::new(vec![-2.0, -2.0], vec![2.0, 2.0], vec![1.0, 1.0]);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0);
        lp.add_row(vec![(0, 1.0), (1, -1.0)], Sense::Eq, 0.5);
        let s = solve_lp(&lp).unwrap();
        assert!((s.x[0] - 0.75).abs() < 1e-12 && (s.x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_infinite_bounds() {
        let lp = LinearProgram::new(vec![f64::NEG_INFINITY], vec![0.0], vec![1.0]);
        assert_eq!(solve_lp(&lp), Err(LpError::BadBounds(0)));
    }
}
