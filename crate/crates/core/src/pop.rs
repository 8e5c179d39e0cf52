//! Polynomial formulation of the IK problem over `c_i = cos(theta_i)`, `s_i = sin(theta_i)`.
//!
//! Variable ids interleave as `c_1, s_1, c_2, s_2, ...` (zero based: `c_i = 2i`, `s_i = 2i + 1`).

use std::f64::consts::PI;

use crate::kinematics::{DhLink, KinematicChain, Pose, FULL_RANGE_EPS};
use crate::poly::{PolyMatrix, Polynomial, Var};

pub fn cos_var(joint: usize) -> Var {
    (2 * joint) as Var
}

pub fn sin_var(joint: usize) -> Var {
    (2 * joint + 1) as Var
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopVariable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
}

/// Linear constraint `expr <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInequality {
    pub expr: Polynomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopProgram {
    pub variables: Vec<PopVariable>,
    /// Minimized; affine in the variables.
    pub objective: Polynomial,
    /// `p = 0` constraints from the split pose identity.
    pub pose_constraints: Vec<Polynomial>,
    /// `c_i^2 + s_i^2 - 1 = 0`, one per joint.
    pub unit_circle: Vec<Polynomial>,
    pub inequalities: Vec<LinearInequality>,
}

impl PopProgram {
    /// Builds the program for `chain` reaching `target`.
    pub fn build(chain: &KinematicChain, target: &Pose) -> Self {
        let variables = (0..chain.dof())
            .flat_map(|i| {
                [
                    PopVariable { name: format!("c{}", i + 1), lb: -1.0, ub: 1.0 },
                    PopVariable { name: format!("s{}", i + 1), lb: -1.0, ub: 1.0 },
                ]
            })
            .collect();
        PopProgram {
            variables,
            objective: build_objective(chain),
            pose_constraints: build_pose_constraints(chain, target),
            unit_circle: build_unit_circle(chain),
            inequalities: build_limit_inequalities(chain),
        }
    }

    /// A program over arbitrary polynomial equalities; variables get `[-1, 1]` bounds.
    pub fn from_parts(
        num_vars: usize,
        objective: Polynomial,
        equalities: Vec<Polynomial>,
        inequalities: Vec<LinearInequality>,
    ) -> Self {
        PopProgram {
            variables: (0..num_vars).map(|i| PopVariable { name: format!("x{}", i + 1), lb: -1.0, ub: 1.0 }).collect(),
            objective,
            pose_constraints: equalities,
            unit_circle: Vec::new(),
            inequalities,
        }
    }

    pub fn equalities(&self) -> impl Iterator<Item = &Polynomial> {
        self.pose_constraints.iter().chain(&self.unit_circle)
    }

    /// Largest absolute equality residual and largest inequality excess at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities().map(|p| p.eval(x).abs()).fold(0.0, f64::max);
        let ineq = self.inequalities.iter().map(|q| q.expr.eval(x).max(0.0)).fold(0.0, f64::max);
        eq.max(ineq)
    }
}

/// `sum 2 w_i (1 - c_i cos(theta_hat_i) - s_i sin(theta_hat_i))`.
pub fn build_objective(chain: &KinematicChain) -> Polynomial {
    let mut constant = 0.0;
    let mut linear = Vec::with_capacity(2 * chain.dof());
    for (i, link) in chain.links().iter().enumerate() {
        let w2 = 2.0 * link.weight;
        let (sh, ch) = link.theta_hat.sin_cos();
        constant += w2;
        linear.push((cos_var(i), -w2 * ch));
        linear.push((sin_var(i), -w2 * sh));
    }
    Polynomial::affine(constant, &linear)
}

pub fn dh_symbolic(link: &DhLink, joint: usize) -> PolyMatrix {
    let (c, s) = (cos_var(joint), sin_var(joint));
    let (sa, ca) = link.alpha.sin_cos();
    let rows = [
        [vec![(c, 1.0)], vec![(s, -ca)], vec![(s, sa)], vec![(c, link.r)]],
        [vec![(s, 1.0)], vec![(c, ca)], vec![(c, -sa)], vec![(s, link.r)]],
    ];
    let consts = [[0.0, sa, ca, link.d], [0.0, 0.0, 0.0, 1.0]];
    PolyMatrix::from_fn(|i, j| if i < 2 { Polynomial::affine(0.0, &rows[i][j]) } else { Polynomial::constant(consts[i - 2][j]) })
}

/// Inverse transform, affine in `(c, s)` thanks to `c^2 + s^2 = 1`.
pub fn dh_inverse_symbolic(link: &DhLink, joint: usize) -> PolyMatrix {
    let (c, s) = (cos_var(joint), sin_var(joint));
    let (sa, ca) = link.alpha.sin_cos();
    let entries: [[(f64, Vec<(Var, f64)>); 4]; 3] = [
        [(0.0, vec![(c, 1.0)]), (0.0, vec![(s, 1.0)]), (0.0, vec![]), (-link.r, vec![])],
        [(0.0, vec![(s, -ca)]), (0.0, vec![(c, ca)]), (sa, vec![]), (-sa * link.d, vec![])],
        [(0.0, vec![(s, sa)]), (0.0, vec![(c, -sa)]), (ca, vec![]), (-ca * link.d, vec![])],
    ];
    PolyMatrix::from_fn(|i, j| {
        if i < 3 {
            let (k, lin) = &entries[i][j];
            Polynomial::affine(*k, lin)
        } else {
            Polynomial::constant(if j == 3 { 1.0 } else { 0.0 })
        }
    })
}

/// Left product `T_1 ... T_split` and right product `P T_n^-1 ... T_{split+1}^-1`.
pub fn split_products(chain: &KinematicChain, target: &Pose) -> (PolyMatrix, PolyMatrix) {
    let links = chain.links();
    let split = chain.split();
    let mut left = dh_symbolic(&links[0], 0);
    for (i, link) in links.iter().enumerate().take(split).skip(1) {
        left = left.mul(&dh_symbolic(link, i));
    }
    let mut right = PolyMatrix::from_numeric(target.matrix());
    for i in (split..links.len()).rev() {
        right = right.mul(&dh_inverse_symbolic(&links[i], i));
    }
    (left, right)
}

/// Twelve equations `right[i][j] - left[i][j] = 0` over the top three rows, row-major.
pub fn build_pose_constraints(chain: &KinematicChain, target: &Pose) -> Vec<Polynomial> {
    let (left, right) = split_products(chain, target);
    let mut out = Vec::with_capacity(12);
    for i in 0..3 {
        for j in 0..4 {
            out.push(right.get(i, j) - left.get(i, j));
        }
    }
    out
}

/// Half-angle form of the joint limits, each as `expr <= 0`.
pub fn build_limit_inequalities(chain: &KinematicChain) -> Vec<LinearInequality> {
    let mut out = Vec::new();
    for (i, link) in chain.links().iter().enumerate() {
        let (c, s) = (cos_var(i), sin_var(i));
        if link.theta_min > -PI + FULL_RANGE_EPS {
            // (c + 1) tan(min/2) - s <= 0
            let t = (link.theta_min / 2.0).tan();
            out.push(LinearInequality { expr: Polynomial::affine(t, &[(c, t), (s, -1.0)]) });
        }
        if link.theta_max < PI - FULL_RANGE_EPS {
            // s - (c + 1) tan(max/2) <= 0
            let t = (link.theta_max / 2.0).tan();
            out.push(LinearInequality { expr: Polynomial::affine(-t, &[(c, -t), (s, 1.0)]) });
        }
    }
    out
}

pub fn build_unit_circle(chain: &KinematicChain) -> Vec<Polynomial> {
    (0..chain.dof())
        .map(|i| {
            let mut p = Polynomial::constant(-1.0);
            p.add_term(crate::poly::Monomial::from_powers(vec![(cos_var(i), 2)]), 1.0);
            p.add_term(crate::poly::Monomial::from_powers(vec![(sin_var(i), 2)]), 1.0);
            p
        })
        .collect()
}

/// `(cos theta_1, sin theta_1, cos theta_2, ...)`.
pub fn embed_angles(theta: &[f64]) -> Vec<f64> {
    theta.iter().flat_map(|t| [t.cos(), t.sin()]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;
    use std::f64::consts::FRAC_PI_2;

    fn planar(n: usize) -> KinematicChain {
        KinematicChain::new(vec![DhLink::new(0.0, 1.0, 0.0); n], None).unwrap()
    }

    #[test]
    fn objective_examples() {
        let chain = planar(1);
        let obj = build_objective(&chain);
        assert_eq!(obj, Polynomial::affine(2.0, &[(0, -2.0)]));
        assert_eq!(obj.eval(&[-1.0, 0.0]), 4.0);
        let chain = KinematicChain::new(
            vec![DhLink::new(0.1, 0.2, 0.3).with_preferred(0.7), DhLink::new(0.0, 0.5, 1.0).with_preferred(-2.0)],
            None,
        )
        .unwrap();
        let at_hat = build_objective(&chain).eval(&embed_angles(&chain.preferred()));
        assert!(at_hat.abs() < 1e-15);
    }

    #[test]
    fn pose_constraints_vanish_at_constructed_point() {
        let chain = planar(2);
        assert_eq!(chain.split(), 1);
        let target = forward_kinematics(&chain, &[0.0, 0.0]).unwrap();
        let cons = build_pose_constraints(&chain, &target);
        assert_eq!(cons.len(), 12);
        for p in &cons {
            assert!(p.eval(&[1.0, 0.0, 1.0, 0.0]).abs() < 1e-15, "{p}");
        }
    }

    #[test]
    fn single_link_has_empty_right_side() {
        let chain = planar(1);
        let target = forward_kinematics(&chain, &[0.4]).unwrap();
        let cons = build_pose_constraints(&chain, &target);
        assert_eq!(cons.len(), 12);
        assert!(cons.iter().all(|p| p.degree() <= 1));
        let x = embed_angles(&[0.4]);
        assert!(cons.iter().all(|p| p.eval(&x).abs() < 1e-15));
    }

    #[test]
    fn limit_inequality_examples() {
        let chain = KinematicChain::new(vec![DhLink::new(0.0, 1.0, 0.0).with_limits(-FRAC_PI_2, PI)], None).unwrap();
        let ineq = build_limit_inequalities(&chain);
        assert_eq!(ineq.len(), 1, "full-range upper side emits nothing");
        // -(c + 1) - s <= 0
        let expected = Polynomial::affine(-1.0, &[(0, -1.0), (1, -1.0)]);
        assert!((&ineq[0].expr - &expected).is_zero(), "{}", ineq[0].expr);
    }

    #[test]
    fn unit_circle_examples() {
        let p = &build_unit_circle(&planar(1))[0];
        assert_eq!(p.eval(&[1.0, 0.0]), 0.0);
        assert!(p.eval(&[0.6, 0.8]).abs() < 1e-15);
        assert_eq!(p.eval(&[1.0, 1.0]), 1.0);
    }

    #[test]
    fn quarter_twists_produce_no_noise_terms() {
        let chain =
            KinematicChain::new(vec![DhLink::new(0.3, 0.2, FRAC_PI_2), DhLink::new(0.1, 0.4, -FRAC_PI_2)], Some(2))
                .unwrap();
        let (left, _) = split_products(&chain, &Pose::identity());
        let max_terms = (0..3).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| left.get(i, j).len()).max();
        // a product of two links has at most four bilinear monomials plus linear and constant parts
        assert!(max_terms.unwrap() <= 9);
        assert!(left.get(2, 0).terms().all(|(_, c)| c.abs() > 1e-12));
    }
}
