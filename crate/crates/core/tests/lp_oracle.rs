mod common;

use common::vertex_oracle;
use ik_core::lifting::Sense;
use ik_core::lp::{solve_lp, LinearProgram, LpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lp(rng: &mut ChaCha8Rng, max_vars: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars);
    let lb: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..0.0)).collect();
    let ub: Vec<f64> = lb.iter().map(|l| l + rng.random_range(0.1..4.0)).collect();
    let obj = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut lp = LinearProgram::new(lb, ub, obj);
    lp.constant = rng.random_range(-1.0..1.0);
    for _ in 0..rng.random_range(0..=n + 1) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.8) {
                coeffs.push((j, rng.random_range(-2.0..2.0)));
            }
        }
        let sense = match rng.random_range(0..5) {
            0 => Sense::Eq,
            1 | 2 => Sense::Le,
            _ => Sense::Ge,
        };
        lp.add_row(coeffs, sense, rng.random_range(-2.0..2.0));
    }
    lp
}

fn check_against_oracle(seed: u64, cases: usize, max_vars: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut feasible, mut infeasible) = (0, 0);
    for case in 0..cases {
        let lp = random_lp(&mut rng, max_vars);
        let sol = solve_lp(&lp).unwrap();
        match vertex_oracle(&lp) {
            Some(v) => {
                feasible += 1;
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}: {lp:?}");
                assert!((sol.value - v).abs() <= 1e-8, "case {case}: {} vs {v}", sol.value);
                assert!(lp.violation(&sol.x) <= 1e-9, "case {case}");
                assert!((lp.value(&sol.x) - sol.value).abs() <= 1e-9 * (1.0 + v.abs()));
            }
            None => {
                infeasible += 1;
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}: {lp:?}");
            }
        }
    }
    (feasible, infeasible)
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let (feasible, infeasible) = check_against_oracle(7, 2000, 3);
    assert!(feasible > 200 && infeasible > 50, "{feasible} feasible, {infeasible} infeasible");
}

#[test]
fn simplex_matches_vertex_enumeration_on_wider_programs() {
    let (feasible, infeasible) = check_against_oracle(8, 1000, 6);
    assert!(feasible > 150 && infeasible > 30, "{feasible} feasible, {infeasible} infeasible");
}

#[test]
fn degenerate_rows_are_handled() {
    // many copies of the same active constraint
    let mut lp = LinearProgram::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![-1.0, -1.0]);
    for _ in 0..20 {
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
    }
    lp.add_row(vec![(0, 1.0), (1, -1.0)], Sense::Eq, 0.0);
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.value + 1.0).abs() < 1e-9);
    assert!((sol.x[0] - 0.5).abs() < 1e-9 && (sol.x[1] - 0.5).abs() < 1e-9);
}

#[test]
fn inverted_bounds_are_rejected() {
    let lp = LinearProgram::new(vec![1.0], vec![0.0], vec![1.0]);
    assert!(solve_lp(&lp).is_err());
}
