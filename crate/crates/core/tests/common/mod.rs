//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use ik_core::kinematics::{dh_matrix, forward_kinematics, KinematicChain, Pose};
use ik_core::lifting::Sense;
use ik_core::local::polish;
use ik_core::lp::LinearProgram;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub angles: Vec<f64>,
    pub objective: f64,
}

/// Grid search over all joints but the last (step `step`), closed form for the last joint,
/// then polishing of every local minimum of the pose residual. Returns the best converged
/// point, or `None` when no grid cell leads to a feasible point.
pub fn grid_oracle(chain: &KinematicChain, target: &Pose, step: f64) -> Option<OracleSolution> {
    let n = chain.dof();
    assert!((1..=3).contains(&n), "grid oracle covers 1 to 3 joints");
    let links = chain.links();
    let axis = |k: usize| -> Vec<f64> {
        let l = &links[k];
        let count = ((l.theta_max - l.theta_min) / step).ceil().max(0.0) as usize;
        (0..=count).map(|i| (l.theta_min + i as f64 * step).min(l.theta_max)).collect()
    };
    let axes: Vec<Vec<f64>> = (0..n - 1).map(axis).collect();
    let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let total: usize = dims.iter().product();

    // residual and closed-form last angle at every grid point
    let mut cells = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut prefix = Vec::with_capacity(n);
        for (k, d) in dims.iter().enumerate() {
            prefix.push(axes[k][rem % d]);
            rem /= d;
        }
        let mut head = nalgebra::Matrix4::identity();
        for (k, &t) in prefix.iter().enumerate() {
            head *= dh_matrix(&links[k], t).matrix();
        }
        let rest = head.try_inverse().unwrap() * target.matrix();
        let last = rest[(1, 0)].atan2(rest[(0, 0)]);
        let l = &links[n - 1];
        let last = last.clamp(l.theta_min, l.theta_max);
        prefix.push(last);
        let fk = forward_kinematics(chain, &prefix).unwrap();
        let r = (fk.matrix() - target.matrix()).abs().max();
        cells.push((prefix, r));
    }

    let neighbours = |idx: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut stride = 1;
        for &d in &dims {
            let coord = (idx / stride) % d;
            if coord > 0 {
                out.push(idx - stride);
            }
            if coord + 1 < d {
                out.push(idx + stride);
            }
            stride *= d;
        }
        out
    };
    let mut best: Option<OracleSolution> = None;
    for idx in 0..total {
        let r = cells[idx].1;
        if r > 0.5 || neighbours(idx).iter().any(|&j| cells[j].1 < r) {
            continue;
        }
        let p = polish(chain, target, &cells[idx].0);
        if !p.converged || !chain.within_limits(&p.angles) {
            continue;
        }
        if best.as_ref().is_none_or(|b| p.objective < b.objective) {
            best = Some(OracleSolution { objective: p.objective, angles: p.angles });
        }
    }
    best
}

/// Minimum of a small LP by enumerating every vertex of its feasible region.
/// `None` when infeasible. Exponential; meant for a handful of variables.
pub fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // all constraints as a x <= b
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), lp.ub[j]));
        rows.push((e.iter().map(|v| -v).collect(), -lp.lb[j]));
    }
    for r in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, c) in &r.coeffs {
            a[j] += c;
        }
        match r.sense {
            Sense::Le => rows.push((a, r.rhs)),
            Sense::Ge => rows.push((a.iter().map(|v| -v).collect(), -r.rhs)),
            Sense::Eq => {
                rows.push((a.clone(), r.rhs));
                rows.push((a.iter().map(|v| -v).collect(), -r.rhs));
            }
        }
    }
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    enumerate(&rows, n, 0, 0, &mut pick, &mut |sel| {
        let a = DMatrix::from_fn(n, n, |i, j| rows[sel[i]].0[j]);
        let b = DVector::from_fn(n, |i, _| rows[sel[i]].1);
        let Some(x) = a.lu().solve(&b) else { return };
        let feasible =
            rows.iter().all(|(a, b)| a.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9);
        if feasible {
            let v = lp.value(x.as_slice());
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
    });
    best
}

fn enumerate(
    rows: &[(Vec<f64>, f64)],
    n: usize,
    depth: usize,
    start: usize,
    pick: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == n {
        f(pick);
        return;
    }
    for i in start..rows.len() {
        pick[depth] = i;
        enumerate(rows, n, depth + 1, i + 1, pick, f);
    }
}

/// A random chain with a target pose. `reachable` draws the pose-generating angles within
/// the limits; otherwise they are drawn on the full circle and the pose may be infeasible.
/// The preferred angles are redrawn independently of the pose-generating ones.
pub fn random_instance(
    rng: &mut rand_chacha::ChaCha8Rng,
    dof: usize,
    reachable: bool,
) -> (KinematicChain, Pose, Vec<f64>) {
    use ik_core::bench::{gen_design, DesignSet, DesignSpec};
    use rand::Rng;
    let set = DesignSet::ALL[rng.random_range(0..3)];
    let chain = gen_design(&DesignSpec { set, dof, seed: rng.random() }).unwrap();
    let theta: Vec<f64> = chain
        .links()
        .iter()
        .map(|l| if reachable { rng.random_range(l.theta_min..=l.theta_max) } else { rng.random_range(-std::f64::consts::PI..std::f64::consts::PI) })
        .collect();
    let target = forward_kinematics(&chain, &theta).unwrap();
    (chain, target, theta)
}
