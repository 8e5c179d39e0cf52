//! Sparse multivariate polynomials with real coefficients.
//!
//! Terms are kept in graded-lexicographic order with variable 0 as the
//! most significant variable. Coefficients whose magnitude drops below
//! [`DROP_TOLERANCE`] after combination are discarded.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

pub const DROP_TOLERANCE: f64 = 1e-14;

pub type Var = u32;

/// Exponent map of a monomial: `(variable, power)` pairs sorted by variable, powers >= 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_powers(mut powers: Vec<(Var, u32)>) -> Self {
        powers.retain(|&(_, e)| e > 0);
        powers.sort_unstable();
        let mut merged: Vec<(Var, u32)> = Vec::with_capacity(powers.len());
        for (v, e) in powers {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += e,
                _ => merged.push((v, e)),
            }
        }
        Monomial(merged)
    }

    pub fn powers(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    /// Variables with multiplicity, in ascending order.
    pub fn factors(&self) -> Vec<Var> {
        self.0.iter().flat_map(|&(v, e)| std::iter::repeat_n(v, e as usize)).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&(v, e)| x[v as usize].powi(e as i32)).product()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            for (a, b) in self.0.iter().zip(&other.0) {
                if a.0 != b.0 {
                    // the monomial carrying the smaller variable is larger in lex order
                    return b.0.cmp(&a.0);
                }
                if a.1 != b.1 {
                    return a.1.cmp(&b.1);
                }
            }
            self.0.len().cmp(&other.0.len())
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(v: Var) -> Self {
        Self::term(1.0, Monomial::var(v))
    }

    pub fn term(coefficient: f64, monomial: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(monomial, coefficient);
        p
    }

    /// `constant + sum coeff_i * x_i`
    pub fn affine(constant: f64, linear: &[(Var, f64)]) -> Self {
        let mut p = Self::constant(constant);
        for &(v, c) in linear {
            p.add_term(Monomial::var(v), c);
        }
        p
    }

    pub fn add_term(&mut self, monomial: Monomial, coefficient: f64) {
        if coefficient == 0.0 {
            return;
        }
        let entry = self.terms.entry(monomial);
        match entry {
            std::collections::btree_map::Entry::Vacant(e) => {
                if coefficient.abs() >= DROP_TOLERANCE {
                    e.insert(coefficient);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = *e.get() + coefficient;
                if sum.abs() < DROP_TOLERANCE {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn constant_term(&self) -> f64 {
        self.terms.get(&Monomial::one()).copied().unwrap_or(0.0)
    }

    pub fn coefficient(&self, monomial: &Monomial) -> f64 {
        self.terms.get(monomial).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * k);
        }
        out
    }

    pub fn max_var(&self) -> Option<Var> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|&(v, _)| v)).max()
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            if k > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
                write!(f, "{}", c.abs())?;
            } else {
                write!(f, "{c}")?;
            }
            for &(v, e) in &m.0 {
                if e == 1 {
                    write!(f, "*x{v}")?;
                } else {
                    write!(f, "*x{v}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// 4x4 matrix of polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix(pub [[Polynomial; 4]; 4]);

impl PolyMatrix {
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Polynomial) -> Self {
        PolyMatrix(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
    }

    pub fn from_numeric(m: &nalgebra::Matrix4<f64>) -> Self {
        Self::from_fn(|i, j| Polynomial::constant(m[(i, j)]))
    }

    pub fn identity() -> Self {
        Self::from_fn(|i, j| Polynomial::constant(if i == j { 1.0 } else { 0.0 }))
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.0[i][j]
    }

    pub fn mul(&self, rhs: &PolyMatrix) -> PolyMatrix {
        PolyMatrix::from_fn(|i, j| {
            let mut acc = Polynomial::zero();
            for k in 0..4 {
                let (a, b) = (&self.0[i][k], &rhs.0[k][j]);
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                acc = &acc + &(a * b);
            }
            acc
        })
    }

    pub fn eval(&self, x: &[f64]) -> nalgebra::Matrix4<f64> {
        nalgebra::Matrix4::from_fn(|i, j| self.0[i][j].eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn graded_lex_order() {
        let x0 = Monomial::var(0);
        let x1 = Monomial::var(1);
        let x0x1 = Monomial::from_powers(vec![(1, 1), (0, 1)]);
        let x0sq = Monomial::from_powers(vec![(0, 2)]);
        let x1sq = Monomial::from_powers(vec![(1, 2)]);
        assert!(Monomial::one() < x1);
        assert!(x1 < x0);
        assert!(x0 < x1sq);
        assert!(x1sq < x0x1);
        assert!(x0x1 < x0sq);
    }

    #[test]
    fn cancellation_drops_terms() {
        let x = Polynomial::var(0);
        let y = Polynomial::var(1);
        let p = &(&x * &y) - &(&y * &x);
        assert!(p.is_zero());
        let q = &Polynomial::affine(1.0, &[(0, 1.0)]) - &Polynomial::affine(1.0 - 1e-16, &[(0, 1.0)]);
        assert!(q.is_zero());
    }

    #[test]
    fn product_and_degree() {
        let a = Polynomial::affine(1.0, &[(0, 2.0)]);
        let b = Polynomial::affine(-1.0, &[(1, 3.0)]);
        let p = &a * &b;
        assert_eq!(p.degree(), 2);
        assert_eq!(p.len(), 4);
        assert_eq!(p.eval(&[0.5, 2.0]), 2.0 * 5.0);
        assert_eq!(p.coefficient(&Monomial::from_powers(vec![(0, 1), (1, 1)])), 6.0);
    }

    #[test]
    fn factors_with_multiplicity() {
        let m = Monomial::from_powers(vec![(3, 1), (1, 2), (3, 1)]);
        assert_eq!(m.factors(), vec![1, 1, 3, 3]);
        assert_eq!(m.degree(), 4);
    }

    fn small_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((-3.0f64..3.0, prop::collection::vec((0u32..4, 1u32..3), 0..3)), 0..5).prop_map(
            |terms| {
                let mut p = Polynomial::zero();
                for (c, powers) in terms {
                    p.add_term(Monomial::from_powers(powers), c);
                }
                p
            },
        )
    }

    proptest! {
        #[test]
        fn ring_ops_agree_with_evaluation(a in small_poly(), b in small_poly(), x in prop::array::uniform4(-1.5f64..1.5)) {
            let sum = (&a + &b).eval(&x);
            let prod = (&a * &b).eval(&x);
            prop_assert!((sum - (a.eval(&x) + b.eval(&x))).abs() < 1e-9);
            prop_assert!((prod - a.eval(&x) * b.eval(&x)).abs() < 1e-9);
        }

        #[test]
        fn multiplication_is_commutative(a in small_poly(), b in small_poly()) {
            let ab: Vec<_> = (&a * &b).terms().map(|(m, c)| (m.clone(), c)).collect();
            let ba: Vec<_> = (&b * &a).terms().map(|(m, c)| (m.clone(), c)).collect();
            prop_assert_eq!(ab.len(), ba.len());
            for ((ma, ca), (mb, cb)) in ab.iter().zip(&ba) {
                prop_assert_eq!(ma, mb);
                prop_assert!((ca - cb).abs() < 1e-12);
            }
        }
    }
}
