//! Random design sets, pose sets and batch solving with CSV / JSON output.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bnb::{solve_global, SolveOptions, SolveStatus};
use crate::error::{IkError, Result};
use crate::kinematics::{forward_kinematics, DhLink, KinematicChain, Pose};
use crate::lifting::LiftMethod;
use crate::local::{solve_local, LocalResult, WARM_START_CAP};
use crate::pop::PopProgram;

/// Seed used when neither a flag nor `IK_SEED` provides one.
pub const DEFAULT_SEED: u64 = 20_190_811;

/// `IK_SEED` if set and parseable, else `fallback`.
pub fn seed_from_env(fallback: u64) -> u64 {
    std::env::var("IK_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(fallback)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignSet {
    Orth,
    Rand6,
    Rand4,
}

impl DesignSet {
    pub const ALL: [DesignSet; 3] = [DesignSet::Orth, DesignSet::Rand6, DesignSet::Rand4];

    fn limit(self) -> f64 {
        match self {
            DesignSet::Orth | DesignSet::Rand6 => 3.0,
            DesignSet::Rand4 => 2.0,
        }
    }
}

impl std::fmt::Display for DesignSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DesignSet::Orth => "orth",
            DesignSet::Rand6 => "rand6",
            DesignSet::Rand4 => "rand4",
        })
    }
}

impl FromStr for DesignSet {
    type Err = IkError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "orth" => Ok(DesignSet::Orth),
            "rand6" => Ok(DesignSet::Rand6),
            "rand4" => Ok(DesignSet::Rand4),
            _ => Err(IkError::UnknownDesignSet(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignSpec {
    pub set: DesignSet,
    pub dof: usize,
    pub seed: u64,
}

/// Random chain of the given set: link lengths and offsets in [0.1, 1.0] m, uniform weights,
/// preferred angles uniform within the limits.
pub fn gen_design(spec: &DesignSpec) -> Result<KinematicChain> {
    if spec.dof < 2 {
        return Err(IkError::InvalidOption(format!("design needs at least 2 joints, got {}", spec.dof)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lim = spec.set.limit();
    let links = (0..spec.dof)
        .map(|_| {
            let d = rng.random_range(0.1..=1.0);
            let r = rng.random_range(0.1..=1.0);
            let alpha = match spec.set {
                DesignSet::Orth => {
                    if rng.random_bool(0.5) {
                        FRAC_PI_2
                    } else {
                        -FRAC_PI_2
                    }
                }
                DesignSet::Rand6 | DesignSet::Rand4 => rng.random_range(-3.0..=3.0),
            };
            let preferred = rng.random_range(-lim..=lim);
            DhLink::new(d, r, alpha).with_limits(-lim, lim).with_preferred(preferred)
        })
        .collect();
    KinematicChain::new(links, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseMode {
    Feasible,
    Unrestricted,
}

impl FromStr for PoseMode {
    type Err = IkError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feasible" => Ok(PoseMode::Feasible),
            "unrestricted" => Ok(PoseMode::Unrestricted),
            _ => Err(IkError::InvalidOption(format!("unknown pose mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub pose: Pose,
    /// Generating angles; withheld for unrestricted samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
}

pub fn gen_poses(chain: &KinematicChain, count: usize, mode: PoseMode, seed: u64) -> Result<Vec<PoseSample>> {
    if count == 0 {
        return Err(IkError::InvalidOption("pose count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let theta: Vec<f64> = chain
                .links()
                .iter()
                .map(|l| match mode {
                    PoseMode::Feasible if l.theta_max > l.theta_min => rng.random_range(l.theta_min..=l.theta_max),
                    PoseMode::Feasible => l.theta_min,
                    PoseMode::Unrestricted => rng.random_range(-PI..=PI),
                })
                .collect();
            let pose = forward_kinematics(chain, &theta)?;
            let angles = (mode == PoseMode::Feasible).then_some(theta);
            Ok(PoseSample { pose, angles })
        })
        .collect()
}

/// How the preferred angles of a benchmark instance are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferredMode {
    /// As drawn by the design generator.
    Random,
    /// The pose's generating angles (feasible poses only).
    Truth,
}

impl FromStr for PreferredMode {
    type Err = IkError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PreferredMode::Random),
            "truth" => Ok(PreferredMode::Truth),
            _ => Err(IkError::InvalidOption(format!("unknown preferred mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchInstance {
    pub id: usize,
    pub design: DesignSpec,
    pub pose_seed: u64,
    pub chain: KinematicChain,
    pub target: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePlan {
    pub sets: Vec<DesignSet>,
    pub dofs: Vec<usize>,
    pub designs_per_group: usize,
    pub poses_per_design: usize,
    pub pose_mode: PoseMode,
    pub preferred: PreferredMode,
    pub seed: u64,
}

/// Instances in a fixed order: set, dof, design, pose. Every seed is derived from `plan.seed`.
pub fn make_instances(plan: &InstancePlan) -> Result<Vec<BenchInstance>> {
    if plan.preferred == PreferredMode::Truth && plan.pose_mode != PoseMode::Feasible {
        return Err(IkError::InvalidOption("preferred = truth needs feasible poses".into()));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Vec::new();
    for &set in &plan.sets {
        for &dof in &plan.dofs {
            for _ in 0..plan.designs_per_group {
                let design = DesignSpec { set, dof, seed: seeds.random() };
                let chain = gen_design(&design)?;
                for _ in 0..plan.poses_per_design {
                    let pose_seed: u64 = seeds.random();
                    let sample = gen_poses(&chain, 1, plan.pose_mode, pose_seed)?.remove(0);
                    let chain = match (plan.preferred, &sample.angles) {
                        (PreferredMode::Truth, Some(a)) => chain.with_preferred(a)?,
                        _ => chain.clone(),
                    };
                    out.push(BenchInstance { id: out.len(), design, pose_seed, chain, target: sample.pose });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub methods: Vec<LiftMethod>,
    /// Solve each instance with the local warm start.
    pub warm: bool,
    /// Solve each instance without it.
    pub cold: bool,
    /// Random restarts of the local solver on top of the preferred-angle start.
    pub extra_starts: usize,
    pub solve: SolveOptions,
    /// Instances solved concurrently.
    pub jobs: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            methods: vec![LiftMethod::A],
            warm: true,
            cold: false,
            extra_starts: 4,
            solve: SolveOptions::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    Warm,
    Cold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: usize,
    pub set: DesignSet,
    pub dof: usize,
    pub design_seed: u64,
    pub pose_seed: u64,
    pub method: String,
    pub start: StartMode,
    pub status: SolveStatus,
    pub wall_time: f64,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub position_error_um: Option<f64>,
    pub rotation_error_urad: Option<f64>,
    pub nodes: u64,
    /// The local solution converged and seeded the incumbent.
    pub warm_start_used: bool,
    pub warm_start_objective: Option<f64>,
    pub warm_start_iterations: Option<usize>,
    /// `(local - global) / max(1, global)` when both exist.
    pub suboptimality: Option<f64>,
    /// Space separated preferred angles.
    pub preferred: String,
}

/// Best converged local solution over the preferred start and `extra` seeded random starts.
pub fn warm_start(chain: &KinematicChain, target: &Pose, extra: usize, seed: u64) -> LocalResult {
    let mut best = solve_local(chain, target, &chain.preferred(), WARM_START_CAP);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra {
        let start: Vec<f64> = chain
            .links()
            .iter()
            .map(|l| if l.theta_max > l.theta_min { rng.random_range(l.theta_min..=l.theta_max) } else { l.theta_min })
            .collect();
        let cand = solve_local(chain, target, &start, WARM_START_CAP);
        let better = match (cand.converged, best.converged) {
            (true, false) => true,
            (true, true) => cand.objective < best.objective,
            (false, false) => cand.pose_residual < best.pose_residual,
            (false, true) => false,
        };
        if better {
            best = cand;
        }
    }
    log::debug!("warm start: converged {} after {} iterations (cap {WARM_START_CAP})", best.converged, best.iterations);
    best
}

fn solve_instance(inst: &BenchInstance, opts: &BenchOptions) -> Result<Vec<BenchRecord>> {
    let pop = PopProgram::build(&inst.chain, &inst.target);
    let local = warm_start(&inst.chain, &inst.target, opts.extra_starts, inst.pose_seed ^ 0x5eed);
    let preferred = inst.chain.preferred().iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = Vec::new();
    for &method in &opts.methods {
        let q = method.lift(&pop, &inst.chain, &inst.target);
        let modes = [(StartMode::Warm, opts.warm), (StartMode::Cold, opts.cold)];
        for (start, _) in modes.into_iter().filter(|m| m.1) {
            let mut so = opts.solve.clone();
            so.threads = 1;
            so.warm_start = (start == StartMode::Warm).then(|| local.clone());
            let res = solve_global(&q, &inst.chain, &inst.target, &so)?;
            let suboptimality = match (local.converged, res.objective) {
                (true, Some(g)) => Some((local.objective - g) / g.abs().max(1.0)),
                _ => None,
            };
            out.push(BenchRecord {
                instance: inst.id,
                set: inst.design.set,
                dof: inst.design.dof,
                design_seed: inst.design.seed,
                pose_seed: inst.pose_seed,
                method: method.to_string(),
                start,
                status: res.status,
                wall_time: res.wall_time,
                objective: res.objective,
                best_bound: res.best_bound,
                gap: res.gap,
                position_error_um: res.position_error_um,
                rotation_error_urad: res.rotation_error_urad,
                nodes: res.nodes_explored,
                warm_start_used: start == StartMode::Warm && res.warm_start_objective.is_some(),
                warm_start_objective: local.converged.then_some(local.objective),
                warm_start_iterations: Some(local.iterations),
                suboptimality,
                preferred: preferred.clone(),
            });
        }
    }
    Ok(out)
}

/// Solves every instance; records are sorted by (instance, method, start mode).
pub fn run_bench(instances: &[BenchInstance], opts: &BenchOptions) -> Result<Vec<BenchRecord>> {
    let jobs = opts.jobs.max(1).min(instances.len().max(1));
    let mut records = if jobs == 1 {
        let mut all = Vec::new();
        for inst in instances {
            all.extend(solve_instance(inst, opts)?);
        }
        all
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results = std::sync::Mutex::new(Vec::new());
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(|| loop {
                    let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let Some(inst) = instances.get(k) else { break };
                    let r = solve_instance(inst, opts);
                    results.lock().unwrap().push(r);
                });
            }
        });
        let mut all = Vec::new();
        for r in results.into_inner().unwrap() {
            all.extend(r?);
        }
        all
    };
    records.sort_by(|a, b| (a.instance, &a.method, a.start).cmp(&(b.instance, &b.method, b.start)));
    Ok(records)
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(IkError::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub set: DesignSet,
    pub dof: usize,
    pub method: String,
    pub start: StartMode,
    pub count: usize,
    pub optimal: usize,
    pub infeasible: usize,
    pub limit: usize,
    pub time_mean: f64,
    pub time_q1: f64,
    pub time_median: f64,
    pub time_q3: f64,
    pub position_error_mean_um: Option<f64>,
    pub rotation_error_mean_urad: Option<f64>,
    pub warm_start_used: usize,
    /// Ascending, for cumulative-distribution and density plots.
    pub sorted_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub weights: String,
    pub preferred_angles: String,
    pub groups: Vec<GroupSummary>,
}

/// Linear-interpolation quantile of ascending `sorted`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(records: &[BenchRecord], preferred: PreferredMode) -> BenchSummary {
    let mut keys: Vec<(DesignSet, usize, String, StartMode)> =
        records.iter().map(|r| (r.set, r.dof, r.method.clone(), r.start)).collect();
    keys.sort();
    keys.dedup();
    let groups = keys
        .into_iter()
        .map(|(set, dof, method, start)| {
            let rs: Vec<&BenchRecord> =
                records.iter().filter(|r| r.set == set && r.dof == dof && r.method == method && r.start == start).collect();
            let mut times: Vec<f64> = rs.iter().map(|r| r.wall_time).collect();
            times.sort_by(f64::total_cmp);
            let is_limit = |s: SolveStatus| matches!(s, SolveStatus::TimeLimit | SolveStatus::NodeLimit | SolveStatus::GapLimit);
            GroupSummary {
                set,
                dof,
                method,
                start,
                count: rs.len(),
                optimal: rs.iter().filter(|r| r.status == SolveStatus::Optimal).count(),
                infeasible: rs.iter().filter(|r| r.status == SolveStatus::Infeasible).count(),
                limit: rs.iter().filter(|r| is_limit(r.status)).count(),
                time_mean: mean(times.iter().copied()).unwrap_or(f64::NAN),
                time_q1: quantile(&times, 0.25),
                time_median: quantile(&times, 0.5),
                time_q3: quantile(&times, 0.75),
                position_error_mean_um: mean(rs.iter().filter_map(|r| r.position_error_um)),
                rotation_error_mean_urad: mean(rs.iter().filter_map(|r| r.rotation_error_urad)),
                warm_start_used: rs.iter().filter(|r| r.warm_start_used).count(),
                sorted_times: times,
            }
        })
        .collect();
    let preferred_angles = match preferred {
        PreferredMode::Random => "uniform within limits, independent of the pose",
        PreferredMode::Truth => "generating angles of the pose",
    };
    BenchSummary { weights: "uniform 1/n".into(), preferred_angles: preferred_angles.into(), groups }
}
