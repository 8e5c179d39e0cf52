use ik_core::bench::{gen_design, DesignSet, DesignSpec};
use ik_core::kinematics::forward_kinematics;
use ik_core::lifting::{LiftMethod, Qcqp};
use ik_core::pop::{embed_angles, PopProgram};
use ik_core::relaxation::{initial_box, tighten_box_with_cutoff, Relaxation, VarBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Sample {
    q: Qcqp,
    point: Vec<f64>,
    objective: f64,
    sub: VarBox,
}

fn sample(rng: &mut ChaCha8Rng) -> Sample {
    let set = DesignSet::ALL[rng.random_range(0..3)];
    let chain = gen_design(&DesignSpec { set, dof: rng.random_range(2..=5), seed: rng.random() }).unwrap();
    let theta: Vec<f64> = chain.links().iter().map(|l| rng.random_range(l.theta_min..=l.theta_max)).collect();
    let target = forward_kinematics(&chain, &theta).unwrap();
    let method = if rng.random_bool(0.5) { LiftMethod::A } else { LiftMethod::M };
    let q = method.lift(&PopProgram::build(&chain, &target), &chain, &target);
    let point = q.extend_point(&embed_angles(&theta));
    let root = initial_box(&q, &chain);
    // random sub-box of the root box around the point
    let mut sub = root.clone();
    for i in 0..sub.len() {
        let (lo, hi) = (root.lo[i].min(point[i]), root.hi[i].max(point[i]));
        sub.lo[i] = point[i] - rng.random::<f64>().powi(2) * (point[i] - lo);
        sub.hi[i] = point[i] + rng.random::<f64>().powi(2) * (hi - point[i]);
    }
    Sample { objective: chain.objective(&theta), q, point, sub }
}

#[test]
fn envelopes_contain_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..1000 {
        let s = sample(&mut rng);
        let relax = Relaxation::new(&s.q);
        let lp = relax.relax(&s.sub).unwrap();
        let ext = relax.extend(&s.point);
        let v = lp.violation(&ext);
        assert!(v <= 1e-9, "case {case}: violation {v}");
        assert!((lp.value(&ext) - s.objective).abs() <= 1e-9);
    }
}

#[test]
fn tightening_keeps_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in 0..300 {
        let s = sample(&mut rng);
        let cutoff = if case % 2 == 0 { Some(s.objective + 1e-9) } else { None };
        let tight = tighten_box_with_cutoff(&s.q, &s.sub, cutoff).unwrap();
        assert!(tight.is_subset_of(&s.sub), "case {case}");
        assert!(tight.contains(&s.point, 1e-9), "case {case}");
    }
}

#[test]
fn cutoff_below_optimum_empties_tiny_boxes() {
    let chain = gen_design(&DesignSpec { set: DesignSet::Orth, dof: 3, seed: 4 }).unwrap();
    let theta = chain.preferred();
    let target = forward_kinematics(&chain, &theta).unwrap();
    let q = LiftMethod::A.lift(&PopProgram::build(&chain, &target), &chain, &target);
    let p = q.extend_point(&embed_angles(&theta));
    let mut b = initial_box(&q, &chain);
    let away = 1e-3;
    for i in 0..q.num_original() {
        b.lo[i] = p[i] + away;
        b.hi[i] = p[i] + 2.0 * away;
    }
    // objective is zero only at the preferred angles, which lie outside this box
    assert!(tighten_box_with_cutoff(&q, &b, Some(0.0)).is_err());
}
