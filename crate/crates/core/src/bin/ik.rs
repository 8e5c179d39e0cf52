use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use ik_core::bench::{
    gen_design, gen_poses, make_instances, run_bench, summarize, write_csv, BenchOptions, DesignSet, DesignSpec,
    InstancePlan, PoseMode, PoseSample, PreferredMode, DEFAULT_SEED,
};
use ik_core::bnb::{certify, solve_global, SolveOptions, SolveStatus};
use ik_core::kinematics::{forward_kinematics, KinematicChain, Pose};
use ik_core::lifting::LiftMethod;
use ik_core::local::{solve_local, WARM_START_CAP};
use ik_core::pop::PopProgram;
use ik_core::{IkError, Result};

#[derive(Parser)]
#[command(name = "ik", version, about = "Globally optimal inverse kinematics for revolute chains")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random chain from one of the design sets.
    GenDesign {
        /// orth, rand6 or rand4.
        #[arg(long)]
        set: DesignSet,
        #[arg(long)]
        dof: usize,
        #[arg(long, env = "IK_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample target poses for a chain.
    GenPoses {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// feasible (within limits, angles included) or unrestricted.
        #[arg(long, default_value = "feasible")]
        mode: PoseMode,
        #[arg(long, env = "IK_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward kinematics of a chain at the given angles.
    Fk {
        #[arg(long)]
        chain: PathBuf,
        /// Comma separated joint angles in radians.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        angles: Vec<f64>,
    },
    /// Run the local solver alone.
    Local {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        pose: PathBuf,
        /// Comma separated start angles (preferred angles when omitted).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        start: Option<Vec<f64>>,
        #[arg(long, default_value_t = WARM_START_CAP)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the lifted QCQP as JSON.
    Lift {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        pose: PathBuf,
        #[arg(long, default_value = "A")]
        lift: LiftMethod,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve to certified global optimality. Exit code 0 optimal, 2 infeasible, 3 limit reached.
    Solve(SolveArgs),
    /// Batch benchmark over random designs and poses; writes a CSV and a JSON summary.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    pose: PathBuf,
    #[arg(long, default_value = "A")]
    lift: LiftMethod,
    /// Relative optimality gap.
    #[arg(long, default_value_t = 1e-6)]
    gap: f64,
    /// Seconds.
    #[arg(long, default_value_t = 300.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1_000_000)]
    node_limit: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Skip the local warm start.
    #[arg(long)]
    no_warm_start: bool,
    /// Record the bound / incumbent trace in the result.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma separated design sets.
    #[arg(long, value_delimiter = ',', default_value = "orth,rand6,rand4")]
    sets: Vec<DesignSet>,
    /// Comma separated joint counts.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    dof: Vec<usize>,
    /// Designs per (set, dof) group.
    #[arg(long, default_value_t = 5)]
    designs: usize,
    /// Poses per design.
    #[arg(long, default_value_t = 2)]
    poses: usize,
    /// feasible or unrestricted.
    #[arg(long, default_value = "feasible")]
    mode: PoseMode,
    /// random (uniform within limits) or truth (the pose's generating angles).
    #[arg(long, default_value = "random")]
    preferred: PreferredMode,
    /// Comma separated lifting methods.
    #[arg(long, value_delimiter = ',', default_value = "A")]
    lift: Vec<LiftMethod>,
    /// Also solve every instance without the warm start.
    #[arg(long)]
    cold: bool,
    /// Only solve without the warm start.
    #[arg(long, conflicts_with = "cold")]
    cold_only: bool,
    /// Random restarts of the local solver besides the preferred start.
    #[arg(long, default_value_t = 4)]
    extra_starts: usize,
    #[arg(long, default_value_t = 1e-6)]
    gap: f64,
    #[arg(long, default_value_t = 300.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1_000_000)]
    node_limit: u64,
    /// Instances solved concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, env = "IK_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "bench.csv")]
    csv: PathBuf,
    #[arg(long, default_value = "bench_summary.json")]
    summary: PathBuf,
}

/// A bare 4x4 pose or a generated sample.
#[derive(Deserialize)]
#[serde(untagged)]
enum PoseInput {
    Bare(Pose),
    Sample(PoseSample),
    List(Vec<PoseSample>),
}

fn read_chain(path: &Path) -> Result<KinematicChain> {
    KinematicChain::from_json(&fs::read_to_string(path)?)
}

fn read_pose(path: &Path) -> Result<Pose> {
    match serde_json::from_str::<PoseInput>(&fs::read_to_string(path)?) {
        Ok(PoseInput::Bare(p)) | Ok(PoseInput::Sample(PoseSample { pose: p, .. })) => Ok(p),
        Ok(PoseInput::List(list)) => {
            list.into_iter().next().map(|s| s.pose).ok_or_else(|| IkError::InvalidPose("empty pose list".into()))
        }
        // report the 4x4 parse error, which carries the validation message
        Err(_) => Pose::from_json(&fs::read_to_string(path)?),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n"))?,
        None => print_stdout(text)?,
    }
    Ok(())
}

/// Like `println!`, but a closed pipe is not an error.
fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenDesign { set, dof, seed, out } => {
            let chain = gen_design(&DesignSpec { set, dof, seed })?;
            emit(out.as_deref(), &chain.to_json()?)?;
        }
        Command::GenPoses { chain, count, mode, seed, out } => {
            let chain = read_chain(&chain)?;
            let poses = gen_poses(&chain, count, mode, seed)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&poses)?)?;
        }
        Command::Fk { chain, angles } => {
            let chain = read_chain(&chain)?;
            let pose = forward_kinematics(&chain, &angles)?;
            print_stdout(&serde_json::to_string_pretty(&pose)?)?;
        }
        Command::Local { chain, pose, start, max_iter, out } => {
            let chain = read_chain(&chain)?;
            let target = read_pose(&pose)?;
            let start = start.unwrap_or_else(|| chain.preferred());
            chain.check_len(start.len())?;
            let res = solve_local(&chain, &target, &start, max_iter);
            log::info!("local solver: {} iterations (cap {max_iter}), converged {}", res.iterations, res.converged);
            emit(out.as_deref(), &serde_json::to_string_pretty(&res)?)?;
        }
        Command::Lift { chain, pose, lift, out } => {
            let chain = read_chain(&chain)?;
            let target = read_pose(&pose)?;
            let q = lift.lift(&PopProgram::build(&chain, &target), &chain, &target);
            emit(out.as_deref(), &q.to_json()?)?;
        }
        Command::Solve(args) => return solve(args),
        Command::Bench(args) => bench(args)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let chain = read_chain(&args.chain)?;
    let target = read_pose(&args.pose)?;
    let q = args.lift.lift(&PopProgram::build(&chain, &target), &chain, &target);
    let warm = (!args.no_warm_start).then(|| {
        let w = solve_local(&chain, &target, &chain.preferred(), WARM_START_CAP);
        log::info!(
            "warm start: {} iterations (cap {WARM_START_CAP}), converged {}, objective {:e}",
            w.iterations,
            w.converged,
            w.objective
        );
        w
    });
    let opts = SolveOptions {
        gap_rel: args.gap,
        time_limit: args.time_limit,
        node_limit: args.node_limit,
        threads: args.threads,
        warm_start: warm,
        record_trace: args.trace,
        ..SolveOptions::default()
    };
    let res = solve_global(&q, &chain, &target, &opts)?;
    let report = certify(&res, &chain, &target);
    for c in report.checks.iter().filter(|c| !c.passed) {
        log::warn!("certificate check {} failed: {}", c.name, c.detail);
    }
    log::info!("{} after {} nodes in {:.3}s", res.status, res.nodes_explored, res.wall_time);
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&res)?)?;
    Ok(match res.status {
        SolveStatus::Optimal => ExitCode::SUCCESS,
        SolveStatus::Infeasible => ExitCode::from(2),
        SolveStatus::GapLimit | SolveStatus::TimeLimit | SolveStatus::NodeLimit => ExitCode::from(3),
    })
}

fn bench(args: BenchArgs) -> Result<()> {
    let plan = InstancePlan {
        sets: args.sets,
        dofs: args.dof,
        designs_per_group: args.designs,
        poses_per_design: args.poses,
        pose_mode: args.mode,
        preferred: args.preferred,
        seed: args.seed,
    };
    let instances = make_instances(&plan)?;
    let opts = BenchOptions {
        methods: args.lift,
        warm: !args.cold_only,
        cold: args.cold || args.cold_only,
        extra_starts: args.extra_starts,
        solve: SolveOptions {
            gap_rel: args.gap,
            time_limit: args.time_limit,
            node_limit: args.node_limit,
            ..SolveOptions::default()
        },
        jobs: args.jobs,
    };
    log::info!("solving {} instances", instances.len());
    let records = run_bench(&instances, &opts)?;
    write_csv(&records, fs::File::create(&args.csv)?)?;
    let summary = summarize(&records, plan.preferred);
    fs::write(&args.summary, format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
    for g in &summary.groups {
        println!(
            "{} dof {} lift {} {:?}: {} solved, {} optimal, {} infeasible, {} limit, time mean {:.4}s q1 {:.4}s median {:.4}s q3 {:.4}s",
            g.set, g.dof, g.method, g.start, g.count, g.optimal, g.infeasible, g.limit, g.time_mean, g.time_q1, g.time_median, g.time_q3
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
