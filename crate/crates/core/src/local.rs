//! Local solver over joint angles: warm starts for the global search and incumbent polishing.
//!
//! Minimizes `sum 2 w_i (1 - cos(theta_i - theta_hat_i))` subject to `FK(theta) = P`
//! with an augmented Lagrangian. Each iteration is one projected Levenberg–Marquardt
//! step on the least-squares form of the augmented merit function; joint limits are
//! enforced by projection.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use crate::kinematics::{dh_derivative, dh_raw, KinematicChain, Pose};

pub const WARM_START_CAP: usize = 200;
pub const POLISH_CAP: usize = 50;
/// `converged` threshold on the pose residual.
pub const CONVERGED_RESIDUAL: f64 = 1e-6;

const STOP_RESIDUAL: f64 = 1e-9;
const STOP_STATIONARITY: f64 = 1e-8;
const STOP_GRADIENT: f64 = 1e-10;
const MU_START: f64 = 10.0;
/// Polishing starts near a feasible point and should not be pulled away from it.
const MU_POLISH: f64 = 1e4;
const MU_MAX: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub angles: Vec<f64>,
    pub objective: f64,
    pub pose_residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Max abs entry of the rotation part of `FK P^-1 - I` plus the positional distance.
pub fn pose_residual(fk: &Pose, target: &Pose) -> f64 {
    let d = fk.rotation() * target.rotation().transpose();
    let rot = (d - nalgebra::Matrix3::identity()).abs().max();
    rot + (fk.translation() - target.translation()).norm()
}

struct Eval {
    h: [f64; 12],
    jac: DMatrix<f64>,
    fk: Matrix4<f64>,
}

fn evaluate(chain: &KinematicChain, target: &Matrix4<f64>, theta: &[f64], with_jacobian: bool) -> Eval {
    let links = chain.links();
    let n = links.len();
    let mats: Vec<Matrix4<f64>> = links
        .iter()
        .zip(theta)
        .map(|(l, &t)| {
            let (s, c) = t.sin_cos();
            dh_raw(l, c, s)
        })
        .collect();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Matrix4::identity());
    for m in &mats {
        let last = *prefix.last().unwrap();
        prefix.push(last * m);
    }
    let fk = prefix[n];
    let mut h = [0.0; 12];
    for i in 0..3 {
        for j in 0..4 {
            h[4 * i + j] = fk[(i, j)] - target[(i, j)];
        }
    }
    let mut jac = DMatrix::zeros(12, n);
    if with_jacobian {
        let mut suffix = vec![Matrix4::identity(); n + 1];
        for k in (0..n).rev() {
            suffix[k] = mats[k] * suffix[k + 1];
        }
        for k in 0..n {
            let dk = prefix[k] * dh_derivative(&links[k], theta[k]) * suffix[k + 1];
            for i in 0..3 {
                for j in 0..4 {
                    jac[(4 * i + j, k)] = dk[(i, j)];
                }
            }
        }
    }
    Eval { h, jac, fk }
}

struct State<'a> {
    chain: &'a KinematicChain,
    target: Matrix4<f64>,
    lambda: [f64; 12],
    mu: f64,
}

impl State<'_> {
    /// Augmented merit `f + lambda.h + mu/2 |h|^2`.
    fn merit(&self, theta: &[f64]) -> f64 {
        let e = evaluate(self.chain, &self.target, theta, false);
        let hh: f64 = e.h.iter().map(|v| v * v).sum();
        let lh: f64 = e.h.iter().zip(&self.lambda).map(|(a, b)| a * b).sum();
        self.chain.objective(theta) + lh + 0.5 * self.mu * hh
    }

    /// Least-squares residual `r` and Jacobian such that merit = |r|^2 - |lambda|^2 / (2 mu).
    fn least_squares(&self, theta: &[f64], e: &Eval) -> (DVector<f64>, DMatrix<f64>) {
        let n = theta.len();
        let mut r = DVector::zeros(n + 12);
        let mut j = DMatrix::zeros(n + 12, n);
        for (i, link) in self.chain.links().iter().enumerate() {
            let half = 0.5 * (theta[i] - link.theta_hat);
            let sw = link.weight.sqrt();
            r[i] = 2.0 * sw * half.sin();
            j[(i, i)] = sw * half.cos();
        }
        let s = (0.5 * self.mu).sqrt();
        for k in 0..12 {
            r[n + k] = s * (e.h[k] + self.lambda[k] / self.mu);
            for c in 0..n {
                j[(n + k, c)] = s * e.jac[(k, c)];
            }
        }
        (r, j)
    }

    /// Gradient of the Lagrangian `f + nu.h` with the given multipliers.
    fn lagrangian_gradient(&self, theta: &[f64], e: &Eval, nu: &[f64; 12]) -> Vec<f64> {
        self.chain
            .links()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let df = 2.0 * l.weight * (theta[i] - l.theta_hat).sin();
                df + (0..12).map(|k| nu[k] * e.jac[(k, i)]).sum::<f64>()
            })
            .collect()
    }
}

/// Norm of the gradient after zeroing components that push against an active bound.
fn projected_norm(chain: &KinematicChain, theta: &[f64], g: &[f64]) -> f64 {
    chain
        .links()
        .iter()
        .zip(theta.iter().zip(g))
        .map(|(l, (&t, &gi))| {
            let at_lo = t <= l.theta_min + 1e-14 && gi > 0.0;
            let at_hi = t >= l.theta_max - 1e-14 && gi < 0.0;
            if at_lo || at_hi || l.theta_max - l.theta_min <= 0.0 {
                0.0
            } else {
                gi * gi
            }
        })
        .sum::<f64>()
        .sqrt()
}

/// Runs at most `cap` iterations from `start` (clamped into the joint limits).
pub fn solve_local(chain: &KinematicChain, target: &Pose, start: &[f64], cap: usize) -> LocalResult {
    run(chain, target, start, cap, MU_START)
}

/// Evaluates `theta` (clamped into the limits) without iterating.
pub fn evaluate_point(chain: &KinematicChain, target: &Pose, theta: &[f64]) -> LocalResult {
    let mut theta = chain.clamp(theta);
    theta.resize(chain.dof(), 0.0);
    finish(chain, target, theta, 0)
}

fn finish(chain: &KinematicChain, target: &Pose, theta: Vec<f64>, iterations: usize) -> LocalResult {
    let fk = Pose::from_matrix_unchecked(crate::kinematics::fk_links(chain.links(), &theta));
    let residual = pose_residual(&fk, target);
    LocalResult {
        objective: chain.objective(&theta),
        converged: residual < CONVERGED_RESIDUAL,
        pose_residual: residual,
        angles: theta,
        iterations,
    }
}

fn run(chain: &KinematicChain, target: &Pose, start: &[f64], cap: usize, mu_start: f64) -> LocalResult {
    let n = chain.dof();
    let mut theta = chain.clamp(start);
    theta.resize(n, 0.0);
    let mut st = State { chain, target: *target.matrix(), lambda: [0.0; 12], mu: mu_start };
    let mut damping: f64 = 1e-3;
    let mut omega = 1e-2;
    let mut last_outer_h = f64::INFINITY;
    let mut iterations = 0;

    loop {
        let e = evaluate(chain, &st.target, &theta, true);
        let residual = pose_residual(&Pose::from_matrix_unchecked(e.fk), target);
        let h_norm = e.h.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut nu = st.lambda;
        for k in 0..12 {
            nu[k] += st.mu * e.h[k];
        }
        let grad_al = st.lagrangian_gradient(&theta, &e, &nu);
        let pg = projected_norm(chain, &theta, &grad_al);
        if residual < STOP_RESIDUAL && pg < STOP_STATIONARITY {
            break;
        }
        if pg < STOP_GRADIENT && st.mu >= MU_MAX {
            break;
        }
        if iterations >= cap {
            break;
        }
        iterations += 1;

        if pg <= omega || damping > 1e10 {
            // outer update of multipliers / penalty
            st.lambda = nu;
            if h_norm > 0.25 * last_outer_h {
                st.mu = (st.mu * 10.0).min(MU_MAX);
            }
            last_outer_h = h_norm;
            omega = (omega * 0.1).max(1e-12);
            damping = damping.min(1e-3);
            continue;
        }

        let (r, jac) = st.least_squares(&theta, &e);
        let g = jac.transpose() * &r;
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let l = &chain.links()[i];
                let at_lo = theta[i] <= l.theta_min + 1e-14 && g[i] > 0.0;
                let at_hi = theta[i] >= l.theta_max - 1e-14 && g[i] < 0.0;
                !(at_lo || at_hi || l.theta_max - l.theta_min <= 0.0)
            })
            .collect();
        if free.is_empty() {
            damping = f64::INFINITY;
            continue;
        }
        let a = jac.transpose() * &jac;
        let m = free.len();
        let mut sys = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (p, &i) in free.iter().enumerate() {
            rhs[p] = -g[i];
            for (q, &k) in free.iter().enumerate() {
                sys[(p, q)] = a[(i, k)];
            }
            sys[(p, p)] += damping * (a[(i, i)] + 1e-12);
        }
        let step = match sys.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                damping *= 4.0;
                continue;
            }
        };
        let mut trial = theta.clone();
        for (p, &i) in free.iter().enumerate() {
            trial[i] += step[p];
        }
        let trial = chain.clamp(&trial);
        if st.merit(&trial) < st.merit(&theta) {
            theta = trial;
            damping = (damping / 3.0).max(1e-12);
        } else {
            damping *= 4.0;
        }
    }

    finish(chain, target, theta, iterations)
}

/// Short local refinement of a candidate produced by the global search.
pub fn polish(chain: &KinematicChain, target: &Pose, candidate: &[f64]) -> LocalResult {
    run(chain, target, candidate, POLISH_CAP, MU_POLISH)
}
