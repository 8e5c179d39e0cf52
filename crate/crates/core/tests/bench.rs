use ik_core::bench::{
    make_instances, quantile, read_csv, run_bench, summarize, write_csv, BenchOptions, DesignSet, InstancePlan, PoseMode,
    PreferredMode, StartMode,
};
use ik_core::bnb::{SolveOptions, SolveStatus};
use ik_core::lifting::LiftMethod;

fn plan(seed: u64) -> InstancePlan {
    InstancePlan {
        sets: DesignSet::ALL.to_vec(),
        dofs: vec![2, 3],
        designs_per_group: 2,
        poses_per_design: 2,
        pose_mode: PoseMode::Feasible,
        preferred: PreferredMode::Random,
        seed,
    }
}

fn options() -> BenchOptions {
    BenchOptions {
        methods: vec![LiftMethod::A, LiftMethod::M],
        cold: true,
        solve: SolveOptions { time_limit: 60.0, ..SolveOptions::default() },
        ..BenchOptions::default()
    }
}

#[test]
fn plans_are_seeded() {
    let a = make_instances(&plan(5)).unwrap();
    assert_eq!(a.len(), 3 * 2 * 2 * 2);
    assert_eq!(a, make_instances(&plan(5)).unwrap());
    assert_ne!(a, make_instances(&plan(6)).unwrap());
}

#[test]
fn csv_round_trip_and_summary() {
    let instances = make_instances(&plan(9)).unwrap();
    let records = run_bench(&instances, &options()).unwrap();
    assert_eq!(records.len(), instances.len() * 2 * 2);
    assert!(records.iter().all(|r| r.status == SolveStatus::Optimal));

    // warm and cold runs of one instance and method reach the same optimum
    for pair in records.chunks(2) {
        assert_eq!((pair[0].start, pair[1].start), (StartMode::Warm, StartMode::Cold));
        let (w, c) = (pair[0].objective.unwrap(), pair[1].objective.unwrap());
        assert!(w <= c + 1e-9 + 1e-6 * c.abs().max(1.0), "{w} vs {c}");
    }

    let mut buf = Vec::new();
    write_csv(&records, &mut buf).unwrap();
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, records);

    let summary = summarize(&back, PreferredMode::Random);
    assert_eq!(summary.groups.len(), 3 * 2 * 2 * 2);
    for g in &summary.groups {
        let mut times: Vec<f64> = records
            .iter()
            .filter(|r| r.set == g.set && r.dof == g.dof && r.method == g.method && r.start == g.start)
            .map(|r| r.wall_time)
            .collect();
        times.sort_by(f64::total_cmp);
        assert_eq!(g.count, times.len());
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        assert!((g.time_mean - mean).abs() <= 1e-12);
        assert!((g.time_q1 - quantile(&times, 0.25)).abs() <= 1e-12);
        assert!((g.time_median - quantile(&times, 0.5)).abs() <= 1e-12);
        assert!((g.time_q3 - quantile(&times, 0.75)).abs() <= 1e-12);
        assert_eq!(g.optimal + g.infeasible + g.limit, g.count);
    }
}

#[test]
fn concurrent_runs_match_sequential_ones() {
    let instances = make_instances(&InstancePlan { dofs: vec![2], ..plan(13) }).unwrap();
    let seq = run_bench(&instances, &BenchOptions { jobs: 1, ..options() }).unwrap();
    let par = run_bench(&instances, &BenchOptions { jobs: 3, ..options() }).unwrap();
    assert_eq!(seq.len(), par.len());
    for (a, b) in seq.iter().zip(&par) {
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.nodes, b.nodes);
    }
}
