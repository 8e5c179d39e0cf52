//! Degree reduction of the polynomial program into a QCQP.
//!
//! Two strategies are provided:
//! * [`lift_a`] rewrites every monomial of degree > 2 by repeatedly replacing its two
//!   lowest-ordered factors with a memoized product variable.
//! * [`lift_m`] introduces a 3x4 block of variables for every partial matrix product of
//!   the split pose identity.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kinematics::{KinematicChain, Pose};
use crate::poly::{Monomial, PolyMatrix, Polynomial, Var};
use crate::pop::{dh_inverse_symbolic, dh_symbolic, PopProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarKind {
    Original,
    Lifted,
    MatrixEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QVar {
    pub id: usize,
    pub lb: f64,
    pub ub: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearObjective {
    pub linear: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearObjective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.linear.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

/// `sum quad + sum lin  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadConstraint {
    pub quad: Vec<(usize, usize, f64)>,
    pub lin: Vec<(usize, f64)>,
    pub rhs: f64,
    pub sense: Sense,
}

impl QuadConstraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        let q: f64 = self.quad.iter().map(|&(i, j, c)| c * x[i] * x[j]).sum();
        let l: f64 = self.lin.iter().map(|&(i, c)| c * x[i]).sum();
        q + l
    }

    /// Amount by which `x` violates the constraint (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Eq => (a - self.rhs).abs(),
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
        }
    }
}

/// `result = left * right`; `left == right` encodes a square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Definition(pub usize, pub usize, pub usize);

impl Definition {
    pub fn result(&self) -> usize {
        self.0
    }
    pub fn operands(&self) -> (usize, usize) {
        (self.1, self.2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qcqp {
    pub vars: Vec<QVar>,
    pub objective: LinearObjective,
    pub constraints: Vec<QuadConstraint>,
    pub definitions: Vec<Definition>,
}

/// Lifting strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LiftMethod {
    A,
    M,
}

impl LiftMethod {
    pub fn lift(self, pop: &PopProgram, chain: &KinematicChain, target: &Pose) -> Qcqp {
        match self {
            LiftMethod::A => lift_a(pop),
            LiftMethod::M => lift_m(pop, chain, target),
        }
    }
}

impl std::fmt::Display for LiftMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LiftMethod::A => "A",
            LiftMethod::M => "M",
        })
    }
}

impl std::str::FromStr for LiftMethod {
    type Err = crate::error::IkError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(LiftMethod::A),
            "M" | "m" => Ok(LiftMethod::M),
            other => Err(crate::error::IkError::InvalidOption(format!("unknown lift method `{other}`"))),
        }
    }
}

/// Unordered variable pair to lifted product variable.
pub type LiftingTable = HashMap<(usize, usize), usize>;

impl Qcqp {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_original(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Original).count()
    }

    pub fn count(&self, kind: VarKind) -> usize {
        self.vars.iter().filter(|v| v.kind == kind).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest violation over constraints and definitions.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let cons = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let defs = self.definitions.iter().map(|d| (x[d.0] - x[d.1] * x[d.2]).abs()).fold(0.0, f64::max);
        cons.max(defs)
    }

    /// Highest total degree appearing in any constraint or definition.
    pub fn max_degree(&self) -> u32 {
        let cons = self
            .constraints
            .iter()
            .map(|c| if !c.quad.is_empty() { 2 } else if !c.lin.is_empty() { 1 } else { 0 })
            .max()
            .unwrap_or(0);
        if self.definitions.is_empty() {
            cons
        } else {
            cons.max(2)
        }
    }

    /// Extends a point over the original variables to all variables by evaluating
    /// definitions and matrix-entry equations in creation order.
    pub fn extend_point(&self, original: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars()];
        x[..original.len()].copy_from_slice(original);
        let defs: HashMap<usize, Definition> = self.definitions.iter().map(|d| (d.0, *d)).collect();
        let entry_rows = self.matrix_entry_rows();
        for v in &self.vars {
            match v.kind {
                VarKind::Original => {}
                VarKind::Lifted => {
                    let d = defs[&v.id];
                    x[v.id] = x[d.1] * x[d.2];
                }
                VarKind::MatrixEntry => {
                    let con = &self.constraints[entry_rows[&v.id]];
                    let coef = con.lin.iter().find(|&&(i, _)| i == v.id).map(|&(_, c)| c).unwrap_or(1.0);
                    let rest: f64 = con.quad.iter().map(|&(i, j, c)| c * x[i] * x[j]).sum::<f64>()
                        + con.lin.iter().filter(|&&(i, _)| i != v.id).map(|&(i, c)| c * x[i]).sum::<f64>();
                    x[v.id] = (con.rhs - rest) / coef;
                }
            }
        }
        x
    }

    /// For each matrix-entry variable, the equation that defines it: the first equality in
    /// which it appears linearly and every other variable has a smaller id.
    pub fn matrix_entry_rows(&self) -> HashMap<usize, usize> {
        let mut out = HashMap::new();
        for (k, con) in self.constraints.iter().enumerate() {
            if con.sense != Sense::Eq {
                continue;
            }
            let top = con.lin.iter().map(|&(i, _)| i).chain(con.quad.iter().flat_map(|&(i, j, _)| [i, j])).max();
            let Some(top) = top else { continue };
            if self.vars[top].kind != VarKind::MatrixEntry || out.contains_key(&top) {
                continue;
            }
            let linear_only = con.lin.iter().any(|&(i, _)| i == top) && con.quad.iter().all(|&(i, j, _)| i != top && j != top);
            if linear_only {
                out.insert(top, k);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn interval_mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (p.iter().copied().fold(f64::INFINITY, f64::min), p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn interval_sqr(a: (f64, f64)) -> (f64, f64) {
    if a.0 >= 0.0 {
        (a.0 * a.0, a.1 * a.1)
    } else if a.1 <= 0.0 {
        (a.1 * a.1, a.0 * a.0)
    } else {
        (0.0, (a.0 * a.0).max(a.1 * a.1))
    }
}

struct Builder {
    vars: Vec<QVar>,
    constraints: Vec<QuadConstraint>,
    definitions: Vec<Definition>,
}

impl Builder {
    fn new(pop: &PopProgram) -> Self {
        let vars = pop
            .variables
            .iter()
            .enumerate()
            .map(|(id, v)| QVar { id, lb: v.lb, ub: v.ub, kind: VarKind::Original })
            .collect();
        Builder { vars, constraints: Vec::new(), definitions: Vec::new() }
    }

    fn bounds(&self, v: usize) -> (f64, f64) {
        (self.vars[v].lb, self.vars[v].ub)
    }

    fn add_var(&mut self, lb: f64, ub: f64, kind: VarKind) -> usize {
        let id = self.vars.len();
        self.vars.push(QVar { id, lb, ub, kind });
        id
    }

    fn product(&mut self, table: &mut LiftingTable, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&y) = table.get(&key) {
            return y;
        }
        let (lb, ub) = if a == b { interval_sqr(self.bounds(a)) } else { interval_mul(self.bounds(a), self.bounds(b)) };
        let y = self.add_var(lb, ub, VarKind::Lifted);
        self.definitions.push(Definition(y, key.0, key.1));
        table.insert(key, y);
        y
    }

    /// Pushes `p (sense) 0` for a polynomial of degree <= 2.
    fn push_poly(&mut self, p: &Polynomial, sense: Sense) {
        let mut quad = Vec::new();
        let mut lin = Vec::new();
        let mut constant = 0.0;
        for (m, c) in p.terms().collect::<Vec<_>>().into_iter().rev() {
            let f = m.factors();
            match f.len() {
                0 => constant += c,
                1 => lin.push((f[0] as usize, c)),
                2 => quad.push((f[0] as usize, f[1] as usize, c)),
                d => panic!("degree {d} monomial reached the QCQP emitter"),
            }
        }
        self.constraints.push(QuadConstraint { quad, lin, rhs: -constant, sense });
    }

    fn finish(self, objective: &Polynomial) -> Qcqp {
        let mut linear = Vec::new();
        let mut constant = 0.0;
        for (m, c) in objective.terms() {
            match m.factors().as_slice() {
                [] => constant += c,
                [v] => linear.push((*v as usize, c)),
                _ => panic!("objective must be affine"),
            }
        }
        linear.sort_by_key(|&(v, _)| v);
        Qcqp { vars: self.vars, objective: LinearObjective { linear, constant }, constraints: self.constraints, definitions: self.definitions }
    }
}

/// Pairwise lifting with a single memo table shared across all constraints.
pub fn lift_a(pop: &PopProgram) -> Qcqp {
    lift_a_with_table(pop).0
}

pub fn lift_a_with_table(pop: &PopProgram) -> (Qcqp, LiftingTable) {
    let mut b = Builder::new(pop);
    let mut table = LiftingTable::new();
    for p in pop.equalities() {
        let mut reduced = Polynomial::zero();
        // leading terms first so that creation order follows the written order of the polynomial
        for (m, c) in p.terms().collect::<Vec<_>>().into_iter().rev() {
            let mut factors: Vec<usize> = m.factors().into_iter().map(|v| v as usize).collect();
            while factors.len() > 2 {
                let y = b.product(&mut table, factors[0], factors[1]);
                factors.drain(..2);
                let pos = factors.partition_point(|&f| f < y);
                factors.insert(pos, y);
            }
            reduced.add_term(Monomial::from_powers(factors.into_iter().map(|f| (f as Var, 1)).collect()), c);
        }
        b.push_poly(&reduced, Sense::Eq);
    }
    for ineq in &pop.inequalities {
        b.push_poly(&ineq.expr, Sense::Le);
    }
    (b.finish(&pop.objective), table)
}

/// Lifts every partial product of the split pose identity into a 3x4 block of variables.
///
/// Left blocks `L_k = L_{k-1} T_k` cover `k = 2..=split`; right blocks
/// `R_k = R_{k+1} T_k^-1` cover `k = n-1 ..= split+1`, starting from `R_n = P T_n^-1`.
/// The pose constraint becomes `R_{split+1} = L_split` entrywise.
pub fn lift_m(pop: &PopProgram, chain: &KinematicChain, target: &Pose) -> Qcqp {
    let mut b = Builder::new(pop);
    let links = chain.links();
    let n = links.len();
    let split = chain.split();

    let mut reach_left = 0.0;
    let mut left = dh_symbolic(&links[0], 0);
    reach_left += links[0].r.hypot(links[0].d);
    for (k, link) in links.iter().enumerate().take(split).skip(1) {
        reach_left += link.r.hypot(link.d);
        let prod = left.mul(&dh_symbolic(link, k));
        left = lift_block(&mut b, &prod, reach_left);
    }

    let mut right = PolyMatrix::from_numeric(target.matrix());
    let mut reach_right = target.translation().norm();
    for k in (split..n).rev() {
        reach_right += links[k].r.hypot(links[k].d);
        let prod = right.mul(&dh_inverse_symbolic(&links[k], k));
        // R_n stays affine; only deeper products get variables
        right = if k == n - 1 { prod } else { lift_block(&mut b, &prod, reach_right) };
    }

    for i in 0..3 {
        for j in 0..4 {
            b.push_poly(&(right.get(i, j) - left.get(i, j)), Sense::Eq);
        }
    }
    for p in &pop.unit_circle {
        b.push_poly(p, Sense::Eq);
    }
    for ineq in &pop.inequalities {
        b.push_poly(&ineq.expr, Sense::Le);
    }
    b.finish(&pop.objective)
}

fn lift_block(b: &mut Builder, prod: &PolyMatrix, reach: f64) -> PolyMatrix {
    let mut out = PolyMatrix::identity();
    for i in 0..3 {
        for j in 0..4 {
            let bound = if j < 3 { 1.0 } else { reach };
            let (lo, hi) = interval_eval(prod.get(i, j), &b.vars);
            let v = b.add_var(lo.max(-bound), hi.min(bound), VarKind::MatrixEntry);
            b.push_poly(&(prod.get(i, j) - &Polynomial::var(v as Var)), Sense::Eq);
            out.0[i][j] = Polynomial::var(v as Var);
        }
    }
    out
}

fn interval_eval(p: &Polynomial, vars: &[QVar]) -> (f64, f64) {
    let mut acc = (0.0, 0.0);
    for (m, c) in p.terms() {
        let mut iv = (c, c);
        for f in m.factors() {
            let v = &vars[f as usize];
            iv = interval_mul(iv, (v.lb, v.ub));
        }
        acc = (acc.0 + iv.0, acc.1 + iv.1);
    }
    acc
}
