//! Variable domains, feasibility-based bound tightening and the linear relaxation
//! used as the lower-bounding problem of the branch-and-bound search.
//!
//! Every bilinear product in the QCQP (explicit definitions as well as the quadratic
//! terms of constraints) gets an envelope: the four McCormick inequalities for
//! `x * y`, tangent and secant cuts for `x^2`. Quadratic terms without a defining
//! variable are given an auxiliary column appended after the QCQP variables.

use std::collections::HashMap;

use thiserror::Error;

use crate::kinematics::{cos_range, sin_range, KinematicChain};
use crate::lifting::{interval_mul, interval_sqr, Qcqp, Sense, VarKind};
use crate::lp::LinearProgram;

/// Round limit for [`tighten_box`].
pub const TIGHTEN_ROUNDS: usize = 10;
/// Minimum total progress for another tightening round.
pub const TIGHTEN_PROGRESS: f64 = 1e-12;
/// Outward padding applied to every derived bound.
const PAD: f64 = 1e-10;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("empty box: variable {0} has no feasible value")]
pub struct EmptyBox(pub usize);

/// Interval domain for every QCQP variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VarBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl VarBox {
    pub fn from_qcqp(q: &Qcqp) -> Self {
        VarBox { lo: q.vars.iter().map(|v| v.lb).collect(), hi: q.vars.iter().map(|v| v.ub).collect() }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    pub fn is_subset_of(&self, other: &VarBox) -> bool {
        (0..self.len()).all(|i| self.lo[i] >= other.lo[i] && self.hi[i] <= other.hi[i])
    }

    /// Intersects variable `i` with `[lo, hi]`; returns the amount of shrinkage.
    fn restrict(&mut self, i: usize, lo: f64, hi: f64) -> Result<f64, EmptyBox> {
        let pad_lo = lo - PAD * (1.0 + lo.abs());
        let pad_hi = hi + PAD * (1.0 + hi.abs());
        let mut gained = 0.0;
        if pad_lo > self.lo[i] {
            gained += pad_lo - self.lo[i];
            self.lo[i] = pad_lo;
        }
        if pad_hi < self.hi[i] {
            gained += self.hi[i] - pad_hi;
            self.hi[i] = pad_hi;
        }
        if self.lo[i] > self.hi[i] {
            if self.lo[i] - self.hi[i] > 1e-9 * (1.0 + self.lo[i].abs()) {
                return Err(EmptyBox(i));
            }
            let mid = 0.5 * (self.lo[i] + self.hi[i]);
            self.lo[i] = mid;
            self.hi[i] = mid;
        }
        Ok(if gained.is_finite() { gained } else { 1.0 })
    }
}

/// Domain implied by joint limits and interval propagation through definitions.
///
/// `cos theta` and `sin theta` get the exact image of the joint range; lifted and
/// matrix-entry variables get the interval value of their defining expression,
/// intersected with the bounds recorded in the program.
pub fn initial_box(q: &Qcqp, chain: &KinematicChain) -> VarBox {
    let mut b = VarBox::from_qcqp(q);
    for (i, link) in chain.links().iter().enumerate() {
        let (clo, chi) = cos_range(link.theta_min, link.theta_max);
        let (slo, shi) = sin_range(link.theta_min, link.theta_max);
        if 2 * i + 1 < b.len() {
            b.lo[2 * i] = b.lo[2 * i].max(clo);
            b.hi[2 * i] = b.hi[2 * i].min(chi);
            b.lo[2 * i + 1] = b.lo[2 * i + 1].max(slo);
            b.hi[2 * i + 1] = b.hi[2 * i + 1].min(shi);
        }
    }
    let defs: HashMap<usize, (usize, usize)> = q.definitions.iter().map(|d| (d.0, (d.1, d.2))).collect();
    let rows = q.matrix_entry_rows();
    for v in &q.vars {
        let (lo, hi) = match v.kind {
            VarKind::Original => continue,
            VarKind::Lifted => {
                let (a, c) = defs[&v.id];
                if a == c {
                    interval_sqr(b.interval(a))
                } else {
                    interval_mul(b.interval(a), b.interval(c))
                }
            }
            VarKind::MatrixEntry => {
                let con = &q.constraints[rows[&v.id]];
                let coef = con.lin.iter().find(|&&(i, _)| i == v.id).map(|&(_, c)| c).unwrap_or(1.0);
                // coef * v = rhs - rest
                let mut rest = (0.0, 0.0);
                for &(i, j, c) in &con.quad {
                    let iv = if i == j { interval_sqr(b.interval(i)) } else { interval_mul(b.interval(i), b.interval(j)) };
                    let t = interval_mul(iv, (c, c));
                    rest = (rest.0 + t.0, rest.1 + t.1);
                }
                for &(i, c) in con.lin.iter().filter(|&&(i, _)| i != v.id) {
                    let t = interval_mul(b.interval(i), (c, c));
                    rest = (rest.0 + t.0, rest.1 + t.1);
                }
                interval_mul((con.rhs - rest.1, con.rhs - rest.0), (1.0 / coef, 1.0 / coef))
            }
        };
        b.lo[v.id] = b.lo[v.id].max(lo);
        b.hi[v.id] = b.hi[v.id].min(hi);
    }
    b
}

/// A product relation `var = a * b` in the extended (QCQP + auxiliary) variable space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Product {
    pub var: usize,
    pub a: usize,
    pub b: usize,
}

impl Product {
    pub fn is_square(&self) -> bool {
        self.a == self.b
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        (x[self.var] - x[self.a] * x[self.b]).abs()
    }
}

#[derive(Debug, Clone)]
struct LinRow {
    coeffs: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
}

/// Relaxation structure of one QCQP; [`Relaxation::relax`] instantiates it on a box.
#[derive(Debug, Clone)]
pub struct Relaxation {
    num_qcqp: usize,
    products: Vec<Product>,
    rows: Vec<LinRow>,
    objective: Vec<(usize, f64)>,
    constant: f64,
    /// Extra tangent points for squares, keyed by product index.
    tangent_hints: HashMap<usize, Vec<f64>>,
}

impl Relaxation {
    pub fn new(q: &Qcqp) -> Self {
        let n = q.num_vars();
        let mut products = Vec::new();
        let mut by_pair: HashMap<(usize, usize), usize> = HashMap::new();
        for d in &q.definitions {
            let key = (d.1.min(d.2), d.1.max(d.2));
            by_pair.entry(key).or_insert(d.0);
            products.push(Product { var: d.0, a: key.0, b: key.1 });
        }
        let mut next = n;
        let mut rows = Vec::with_capacity(q.constraints.len());
        for con in &q.constraints {
            let mut coeffs: Vec<(usize, f64)> = con.lin.clone();
            for &(i, j, c) in &con.quad {
                let key = (i.min(j), i.max(j));
                let var = *by_pair.entry(key).or_insert_with(|| {
                    products.push(Product { var: next, a: key.0, b: key.1 });
                    next += 1;
                    next - 1
                });
                coeffs.push((var, c));
            }
            rows.push(LinRow { coeffs: merge(coeffs), sense: con.sense, rhs: con.rhs });
        }

        // Tangents of c_i^2 and s_i^2 at the direction favoured by the objective: together with
        // c_i^2 + s_i^2 = 1 they give c_i cos(h) + s_i sin(h) <= 1.
        let mut tangent_hints = HashMap::new();
        let originals = q.num_original();
        let coef: HashMap<usize, f64> = q.objective.linear.iter().copied().collect();
        for joint in 0..originals / 2 {
            let (ci, si) = (2 * joint, 2 * joint + 1);
            let (a, b) = (coef.get(&ci).copied().unwrap_or(0.0), coef.get(&si).copied().unwrap_or(0.0));
            let norm = a.hypot(b);
            if norm < 1e-12 {
                continue;
            }
            for (var, p) in [(ci, -a / norm), (si, -b / norm)] {
                if let Some(k) = products.iter().position(|pr| pr.a == var && pr.b == var) {
                    tangent_hints.entry(k).or_insert_with(Vec::new).push(p);
                }
            }
        }

        Relaxation {
            num_qcqp: n,
            products,
            rows,
            objective: merge(q.objective.linear.clone()),
            constant: q.objective.constant,
            tangent_hints,
        }
    }

    pub fn num_qcqp(&self) -> usize {
        self.num_qcqp
    }

    pub fn num_extended(&self) -> usize {
        self.num_qcqp + self.products.iter().filter(|p| p.var >= self.num_qcqp).count()
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    /// Lifts a QCQP point to the extended space by evaluating auxiliary products.
    pub fn extend(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        out.resize(self.num_extended(), 0.0);
        for p in &self.products {
            if p.var >= self.num_qcqp {
                out[p.var] = x[p.a] * x[p.b];
            }
        }
        out
    }

    /// Bounds of the extended variables on `b`.
    pub fn extended_bounds(&self, b: &VarBox) -> (Vec<f64>, Vec<f64>) {
        let mut lo = b.lo.clone();
        let mut hi = b.hi.clone();
        lo.resize(self.num_extended(), 0.0);
        hi.resize(self.num_extended(), 0.0);
        for p in &self.products {
            if p.var >= self.num_qcqp {
                let (l, h) =
                    if p.is_square() { interval_sqr(b.interval(p.a)) } else { interval_mul(b.interval(p.a), b.interval(p.b)) };
                lo[p.var] = l;
                hi[p.var] = h;
            }
        }
        (lo, hi)
    }

    /// Linear relaxation on `b`. Every QCQP-feasible point of `b`, extended by
    /// [`Relaxation::extend`], is feasible for the result.
    pub fn relax(&self, b: &VarBox) -> Result<LinearProgram, EmptyBox> {
        if let Some(i) = (0..b.len()).find(|&i| b.lo[i] > b.hi[i]) {
            return Err(EmptyBox(i));
        }
        let (lo, hi) = self.extended_bounds(b);
        let mut objective = vec![0.0; lo.len()];
        for &(i, c) in &self.objective {
            objective[i] += c;
        }
        let mut lp = LinearProgram::new(lo.clone(), hi.clone(), objective);
        lp.constant = self.constant;
        for row in &self.rows {
            lp.add_row(row.coeffs.clone(), row.sense, row.rhs);
        }
        for (k, p) in self.products.iter().enumerate() {
            let y = p.var;
            let (la, ua) = (lo[p.a], hi[p.a]);
            if p.is_square() {
                let x = p.a;
                let mut points = vec![la, ua, 0.5 * (la + ua)];
                if let Some(h) = self.tangent_hints.get(&k) {
                    points.extend(h.iter().copied());
                }
                points.sort_by(f64::total_cmp);
                points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
                for t in points {
                    // y >= 2 t x - t^2
                    lp.add_row(vec![(y, 1.0), (x, -2.0 * t)], Sense::Ge, -t * t);
                }
                // secant: y <= (la + ua) x - la ua
                lp.add_row(vec![(y, 1.0), (x, -(la + ua))], Sense::Le, -la * ua);
            } else {
                let (lb, ub) = (lo[p.b], hi[p.b]);
                let (a, bb) = (p.a, p.b);
                lp.add_row(vec![(y, 1.0), (a, -lb), (bb, -la)], Sense::Ge, -la * lb);
                lp.add_row(vec![(y, 1.0), (a, -ub), (bb, -ua)], Sense::Ge, -ua * ub);
                lp.add_row(vec![(y, 1.0), (a, -ub), (bb, -la)], Sense::Le, -la * ub);
                lp.add_row(vec![(y, 1.0), (a, -lb), (bb, -ua)], Sense::Le, -ua * lb);
            }
        }
        Ok(lp)
    }
}

fn merge(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|&(i, _)| i);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (i, c) in coeffs {
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc += c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

/// McCormick / secant / tangent relaxation of `q` over `b`.
pub fn mccormick_relax(q: &Qcqp, b: &VarBox) -> Result<LinearProgram, EmptyBox> {
    Relaxation::new(q).relax(b)
}

/// Feasibility-based bound tightening; never removes a QCQP-feasible point of `b`.
pub fn tighten_box(q: &Qcqp, b: &VarBox) -> Result<VarBox, EmptyBox> {
    tighten_box_with_cutoff(q, b, None)
}

/// As [`tighten_box`], additionally imposing `objective <= cutoff`.
pub fn tighten_box_with_cutoff(q: &Qcqp, b: &VarBox, cutoff: Option<f64>) -> Result<VarBox, EmptyBox> {
    let mut out = b.clone();
    for _ in 0..TIGHTEN_ROUNDS {
        let mut progress = 0.0;
        for d in &q.definitions {
            progress += propagate_product(&mut out, d.0, d.1, d.2)?;
        }
        for con in &q.constraints {
            let (rlo, rhi) = match con.sense {
                Sense::Eq => (con.rhs, con.rhs),
                Sense::Le => (f64::NEG_INFINITY, con.rhs),
                Sense::Ge => (con.rhs, f64::INFINITY),
            };
            progress += propagate_sum(&mut out, &con.quad, &con.lin, rlo, rhi)?;
        }
        if let Some(cut) = cutoff {
            progress += propagate_sum(&mut out, &[], &q.objective.linear, f64::NEG_INFINITY, cut - q.objective.constant)?;
        }
        if progress < TIGHTEN_PROGRESS {
            break;
        }
    }
    Ok(out)
}

fn propagate_product(b: &mut VarBox, y: usize, a: usize, c: usize) -> Result<f64, EmptyBox> {
    let mut gained = 0.0;
    if a == c {
        let (lo, hi) = interval_sqr(b.interval(a));
        gained += b.restrict(y, lo, hi)?;
        gained += restrict_sqrt(b, a, b.interval(y))?;
    } else {
        let (lo, hi) = interval_mul(b.interval(a), b.interval(c));
        gained += b.restrict(y, lo, hi)?;
        gained += restrict_quotient(b, a, b.interval(y), c)?;
        gained += restrict_quotient(b, c, b.interval(y), a)?;
    }
    Ok(gained)
}

/// `x in p / X_other` when the divisor interval excludes zero.
fn restrict_quotient(b: &mut VarBox, x: usize, p: (f64, f64), other: usize) -> Result<f64, EmptyBox> {
    let (dlo, dhi) = b.interval(other);
    if dlo <= 0.0 && dhi >= 0.0 {
        return Ok(0.0);
    }
    let q = [p.0 / dlo, p.0 / dhi, p.1 / dlo, p.1 / dhi];
    if q.iter().any(|v| v.is_nan()) {
        return Ok(0.0);
    }
    let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    b.restrict(x, lo, hi)
}

/// `x^2 in y` restricted to the branch(es) of `x` compatible with its current interval.
fn restrict_sqrt(b: &mut VarBox, x: usize, y: (f64, f64)) -> Result<f64, EmptyBox> {
    if y.1 < -PAD {
        return Err(EmptyBox(x));
    }
    let r_hi = y.1.max(0.0).sqrt();
    let r_lo = y.0.max(0.0).sqrt();
    let (xlo, xhi) = b.interval(x);
    if xlo > -r_lo {
        b.restrict(x, r_lo, r_hi)
    } else if xhi < r_lo {
        b.restrict(x, -r_hi, -r_lo)
    } else {
        b.restrict(x, -r_hi, r_hi)
    }
}

fn term_interval(b: &VarBox, i: usize, j: usize, c: f64) -> (f64, f64) {
    let iv = if i == j { interval_sqr(b.interval(i)) } else { interval_mul(b.interval(i), b.interval(j)) };
    interval_mul(iv, (c, c))
}

/// Propagates `rlo <= sum quad + sum lin <= rhi` into each term.
fn propagate_sum(b: &mut VarBox, quad: &[(usize, usize, f64)], lin: &[(usize, f64)], rlo: f64, rhi: f64) -> Result<f64, EmptyBox> {
    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(quad.len() + lin.len());
    for &(i, j, c) in quad {
        terms.push(term_interval(b, i, j, c));
    }
    for &(i, c) in lin {
        terms.push(interval_mul(b.interval(i), (c, c)));
    }
    let slo: f64 = terms.iter().map(|t| t.0).sum();
    let shi: f64 = terms.iter().map(|t| t.1).sum();
    if slo > rhi + 1e-9 * (1.0 + rhi.abs()) || shi < rlo - 1e-9 * (1.0 + rlo.abs()) {
        let v = quad.first().map(|q| q.0).or(lin.first().map(|l| l.0)).unwrap_or(0);
        return Err(EmptyBox(v));
    }
    let mut gained = 0.0;
    for (k, t) in terms.iter().enumerate() {
        // t in [rlo - (others hi), rhi - (others lo)]
        let lo = rlo - (shi - t.1);
        let hi = rhi - (slo - t.0);
        if lo <= t.0 && hi >= t.1 {
            continue;
        }
        if k < quad.len() {
            let (i, j, c) = quad[k];
            let p = interval_mul((lo, hi), (1.0 / c, 1.0 / c));
            let p = if p.0.is_nan() || p.1.is_nan() { (f64::NEG_INFINITY, f64::INFINITY) } else { p };
            if i == j {
                gained += restrict_sqrt(b, i, p)?;
            } else {
                gained += restrict_quotient(b, i, p, j)?;
                gained += restrict_quotient(b, j, p, i)?;
            }
        } else {
            let (i, c) = lin[k - quad.len()];
            let (a, z) = (lo / c, hi / c);
            gained += b.restrict(i, a.min(z), a.max(z))?;
        }
    }
    Ok(gained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::DhLink;
    use crate::lifting::{lift_a, Definition, LinearObjective, QVar, QuadConstraint};
    use crate::lp::{solve_lp, LpStatus};
    use crate::pop::PopProgram;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn bilinear_qcqp(bounds: [(f64, f64); 2]) -> Qcqp {
        let vars = vec![
            QVar { id: 0, lb: bounds[0].0, ub: bounds[0].1, kind: VarKind::Original },
            QVar { id: 1, lb: bounds[1].0, ub: bounds[1].1, kind: VarKind::Original },
            QVar { id: 2, lb: -10.0, ub: 10.0, kind: VarKind::Lifted },
        ];
        Qcqp {
            vars,
            objective: LinearObjective { linear: vec![(2, 1.0)], constant: 0.0 },
            constraints: vec![],
            definitions: vec![Definition(2, 0, 1)],
        }
    }

    #[test]
    fn initial_box_from_limits() {
        let chain = KinematicChain::new(
            vec![DhLink::new(0.0, 1.0, 0.0), DhLink::new(0.0, 1.0, 0.0).with_limits(0.0, FRAC_PI_2)],
            None,
        )
        .unwrap();
        let target = crate::kinematics::forward_kinematics(&chain, &[0.1, 0.2]).unwrap();
        let q = lift_a(&PopProgram::build(&chain, &target));
        let b = initial_box(&q, &chain);
        assert_eq!((b.lo[0], b.hi[0], b.lo[1], b.hi[1]), (-1.0, 1.0, -1.0, 1.0));
        assert!(b.lo[2].abs() < 1e-16 && b.hi[2] == 1.0);
        assert_eq!((b.lo[3], b.hi[3]), (0.0, 1.0));
    }

    #[test]
    fn interval_product_bounds_lifted_variable() {
        let q = bilinear_qcqp([(-1.0, 1.0), (0.0, 1.0)]);
        let chain = KinematicChain::new(vec![DhLink::new(0.0, 1.0, 0.0)], None).unwrap();
        let b = initial_box(&q, &chain);
        assert_eq!((b.lo[2], b.hi[2]), (-1.0, 1.0));
    }

    #[test]
    fn mccormick_is_tight_at_vertices() {
        let q = bilinear_qcqp([(0.0, 1.0), (0.0, 1.0)]);
        let mut b = VarBox::from_qcqp(&q);
        b.lo[0] = 1.0;
        b.lo[1] = 1.0;
        let lp = mccormick_relax(&q, &b).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        let mut max = lp.clone();
        max.objective[2] = -1.0;
        assert!((solve_lp(&max).unwrap().value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_envelope_on_symmetric_interval() {
        // u = x^2, x in [-1, 1]: secant u <= 1, tangents u >= 2x - 1 and u >= -2x - 1
        let q = Qcqp {
            vars: vec![
                QVar { id: 0, lb: -1.0, ub: 1.0, kind: VarKind::Original },
                QVar { id: 1, lb: 0.0, ub: 1.0, kind: VarKind::Lifted },
            ],
            objective: LinearObjective { linear: vec![(1, -1.0)], constant: 0.0 },
            constraints: vec![],
            definitions: vec![Definition(1, 0, 0)],
        };
        let lp = mccormick_relax(&q, &VarBox::from_qcqp(&q)).unwrap();
        assert!(lp.violation(&[0.0, 1.0]) < 1e-15, "secant allows u = 1 at x = 0");
        assert!(lp.violation(&[1.0, 0.9]) > 0.09, "tangent at x = 1 forces u >= 1");
        assert!((solve_lp(&lp).unwrap().value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tightening_through_unit_circle() {
        let q = Qcqp {
            vars: vec![
                QVar { id: 0, lb: 1.0, ub: 1.0, kind: VarKind::Original },
                QVar { id: 1, lb: 0.0, ub: 1.0, kind: VarKind::Original },
            ],
            objective: LinearObjective::default(),
            constraints: vec![QuadConstraint { quad: vec![(0, 0, 1.0), (1, 1, 1.0)], lin: vec![], rhs: 1.0, sense: Sense::Eq }],
            definitions: vec![],
        };
        let b = tighten_box(&q, &VarBox::from_qcqp(&q)).unwrap();
        assert!(b.hi[1] < 1e-4, "{:?}", b);
        let again = tighten_box(&q, &b).unwrap();
        for i in 0..2 {
            assert!((again.lo[i] - b.lo[i]).abs() < 1e-9 && (again.hi[i] - b.hi[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn tightening_detects_empty_box() {
        let q = Qcqp {
            vars: vec![QVar { id: 0, lb: 0.0, ub: 1.0, kind: VarKind::Original }],
            objective: LinearObjective::default(),
            constraints: vec![QuadConstraint { quad: vec![], lin: vec![(0, 1.0)], rhs: 2.0, sense: Sense::Ge }],
            definitions: vec![],
        };
        assert!(tighten_box(&q, &VarBox::from_qcqp(&q)).is_err());
    }

    #[test]
    fn relaxation_of_circle_respects_preferred_direction() {
        // a single joint at theta_hat = pi/3: relaxation bound must be >= 0
        let chain = KinematicChain::new(vec![DhLink::new(0.0, 1.0, 0.0).with_preferred(PI / 3.0)], None).unwrap();
        let target = crate::kinematics::forward_kinematics(&chain, &[PI / 3.0]).unwrap();
        let q = lift_a(&PopProgram::build(&chain, &target));
        let b = initial_box(&q, &chain);
        let s = solve_lp(&mccormick_relax(&q, &b).unwrap()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.value > -1e-9, "{}", s.value);
    }
}
