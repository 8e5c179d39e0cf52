//! Spatial branch-and-bound over a lifted QCQP.
//!
//! Nodes are boxes over the QCQP variables. Each node is tightened by interval
//! propagation, bounded by the LP relaxation, and split on an operand of the most
//! violated product. Incumbents come from the warm start and from polishing angles
//! recovered out of relaxation solutions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{IkError, Result};
use crate::kinematics::{forward_kinematics, pose_error, KinematicChain, Pose};
use crate::lifting::{LiftMethod, Qcqp};
use crate::local::{evaluate_point, polish, solve_local, LocalResult, WARM_START_CAP};
use crate::lp::{solve_lp, LpStatus};
use crate::pop::PopProgram;
use crate::relaxation::{initial_box, tighten_box_with_cutoff, Relaxation, VarBox};

/// Products violated by less than this are treated as satisfied when branching.
const PRODUCT_TOL: f64 = 1e-9;
/// Operands narrower than this are never split.
const MIN_SPLIT_WIDTH: f64 = 1e-10;
/// Split points stay this fraction of the width away from either end.
const SPLIT_MARGIN: f64 = 0.2;
/// Accepted pose error for an incumbent, metres and radians.
const INCUMBENT_POSE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub gap_rel: f64,
    pub gap_abs: f64,
    /// Seconds.
    pub time_limit: f64,
    pub node_limit: u64,
    /// Seeds the incumbent when it converged.
    #[serde(skip)]
    pub warm_start: Option<LocalResult>,
    pub threads: usize,
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_rel: 1e-6,
            gap_abs: 1e-9,
            time_limit: 300.0,
            node_limit: 1_000_000,
            warm_start: None,
            threads: 1,
            record_trace: false,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.gap_rel >= 0.0 && self.gap_abs >= 0.0) {
            return Err(IkError::InvalidOption("gap tolerances must be non-negative".into()));
        }
        if !(self.time_limit > 0.0) {
            return Err(IkError::InvalidOption("time limit must be positive".into()));
        }
        if self.node_limit == 0 {
            return Err(IkError::InvalidOption("node limit must be positive".into()));
        }
        Ok(())
    }

    /// Pruning slack at incumbent value `inc`.
    pub fn prune_slack(&self, inc: f64) -> f64 {
        self.gap_abs.max(self.gap_rel * inc.abs().max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    GapLimit,
    TimeLimit,
    NodeLimit,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NodeLimit => "node_limit",
        })
    }
}

/// Global lower bound and incumbent after a node was processed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub nodes: u64,
    pub lower_bound: f64,
    pub incumbent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub angles: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub gap_tolerance: f64,
    pub nodes_explored: u64,
    /// Seconds.
    pub wall_time: f64,
    pub position_error_um: Option<f64>,
    pub rotation_error_urad: Option<f64>,
    pub queue_exhausted: bool,
    /// Objective of the local solution, when it was accepted as the first incumbent.
    pub warm_start_objective: Option<f64>,
    pub warm_start_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone)]
pub struct BnbNode {
    pub bounds: VarBox,
    pub lower_bound: f64,
    pub depth: u32,
    id: u64,
}

impl PartialEq for BnbNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BnbNode {}

impl PartialOrd for BnbNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BnbNode {
    /// Max-heap order: lowest bound first, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower_bound
            .total_cmp(&self.lower_bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

#[derive(Debug, Clone)]
struct Incumbent {
    angles: Vec<f64>,
    objective: f64,
}

enum Outcome {
    Pruned,
    Fathomed(f64),
    Unresolved(f64),
    Branched(f64, VarBox, VarBox),
}

struct Context<'a> {
    q: &'a Qcqp,
    chain: &'a KinematicChain,
    target: &'a Pose,
    relax: Relaxation,
    root: VarBox,
    opts: &'a SolveOptions,
}

/// Picks `(variable, split point)` from the most violated product at the relaxation point
/// `x` (extended space). Of the two operands, the one wider relative to the root box is split.
pub fn branch(relax: &Relaxation, node: &VarBox, root: &VarBox, x: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize)> = None;
    for p in relax.products() {
        let v = p.violation(x);
        if v <= PRODUCT_TOL || best.is_some_and(|(bv, _)| bv >= v) {
            continue;
        }
        let operands: &[usize] = if p.is_square() { &[p.a] } else { &[p.a, p.b] };
        let mut pick: Option<(f64, usize)> = None;
        for &o in operands {
            let w = node.width(o);
            if w < MIN_SPLIT_WIDTH {
                continue;
            }
            let rel = w / root.width(o).max(MIN_SPLIT_WIDTH);
            if pick.is_none_or(|(r, _)| rel > r) {
                pick = Some((rel, o));
            }
        }
        if let Some((_, o)) = pick {
            best = Some((v, o));
        }
    }
    let (_, var) = best?;
    Some((var, split_point(node, var, x[var])))
}

fn split_point(node: &VarBox, var: usize, at: f64) -> f64 {
    let (lo, hi) = node.interval(var);
    let w = hi - lo;
    at.clamp(lo + SPLIT_MARGIN * w, hi - SPLIT_MARGIN * w)
}

/// Midpoint split of the widest product operand, for nodes without a usable relaxation point.
fn branch_widest(relax: &Relaxation, node: &VarBox, root: &VarBox) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize)> = None;
    for p in relax.products() {
        for o in [p.a, p.b] {
            let w = node.width(o);
            if w < MIN_SPLIT_WIDTH {
                continue;
            }
            let rel = w / root.width(o).max(MIN_SPLIT_WIDTH);
            if best.is_none_or(|(r, _)| rel > r) {
                best = Some((rel, o));
            }
        }
    }
    let (_, var) = best?;
    let (lo, hi) = node.interval(var);
    Some((var, 0.5 * (lo + hi)))
}

fn split(node: &VarBox, var: usize, at: f64) -> (VarBox, VarBox) {
    let mut left = node.clone();
    let mut right = node.clone();
    left.hi[var] = at;
    right.lo[var] = at;
    (left, right)
}

impl Context<'_> {
    fn accept(&self, cand: &LocalResult) -> Option<Incumbent> {
        if !cand.converged || !self.chain.within_limits(&cand.angles) {
            return None;
        }
        let fk = forward_kinematics(self.chain, &cand.angles).ok()?;
        let (pos, rot) = pose_error(&fk, self.target);
        if pos > INCUMBENT_POSE_TOL || rot > INCUMBENT_POSE_TOL {
            return None;
        }
        Some(Incumbent { angles: cand.angles.clone(), objective: self.chain.objective(&cand.angles) })
    }

    /// Angles read off a relaxation point; joints at the origin of the (c, s) plane take
    /// their preferred value.
    fn angles_from_point(&self, x: &[f64]) -> Vec<f64> {
        self.chain
            .links()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (c, s) = (x[2 * i], x[2 * i + 1]);
                if c.hypot(s) < 1e-12 {
                    l.theta_hat
                } else {
                    s.atan2(c)
                }
            })
            .collect()
    }

    fn process(&self, node: &BnbNode, incumbent: Option<f64>) -> (Outcome, Option<Incumbent>) {
        let slack = incumbent.map(|v| self.opts.prune_slack(v));
        if let (Some(inc), Some(sl)) = (incumbent, slack) {
            if node.lower_bound >= inc - sl {
                return (Outcome::Fathomed(node.lower_bound), None);
            }
        }
        let Ok(bounds) = tighten_box_with_cutoff(self.q, &node.bounds, incumbent) else {
            return (Outcome::Pruned, None);
        };
        let Ok(lp) = self.relax.relax(&bounds) else {
            return (Outcome::Pruned, None);
        };
        let (lb, point) = match solve_lp(&lp) {
            Ok(sol) if sol.status == LpStatus::Infeasible => return (Outcome::Pruned, None),
            Ok(sol) if sol.status == LpStatus::Optimal => (node.lower_bound.max(sol.value), Some(sol.x)),
            Ok(_) | Err(_) => {
                log::debug!("relaxation failed at depth {}; splitting without a bound", node.depth);
                (node.lower_bound, None)
            }
        };
        let fathom = |lb: f64, inc: Option<f64>| inc.is_some_and(|v| lb >= v - self.opts.prune_slack(v));
        if fathom(lb, incumbent) {
            return (Outcome::Fathomed(lb), None);
        }

        let mut found = None;
        if let Some(x) = &point {
            let start = self.angles_from_point(x);
            let tries = [evaluate_point(self.chain, self.target, &start), polish(self.chain, self.target, &start)];
            for cand in tries.iter().filter_map(|t| self.accept(t)) {
                let bar = found.as_ref().map(|f: &Incumbent| f.objective).or(incumbent);
                if bar.is_none_or(|v| cand.objective < v) {
                    found = Some(cand);
                }
            }
        }
        let best = match (&found, incumbent) {
            (Some(c), _) => Some(c.objective),
            (None, v) => v,
        };
        if fathom(lb, best) {
            return (Outcome::Fathomed(lb), found);
        }

        let choice = match &point {
            Some(x) => branch(&self.relax, &bounds, &self.root, x),
            None => branch_widest(&self.relax, &bounds, &self.root),
        };
        match choice {
            Some((var, at)) => {
                let (l, r) = split(&bounds, var, at);
                (Outcome::Branched(lb, l, r), found)
            }
            None => (Outcome::Unresolved(lb), found),
        }
    }
}

struct Shared {
    heap: BinaryHeap<BnbNode>,
    in_flight: Vec<(u64, f64)>,
    incumbent: Option<Incumbent>,
    fathomed_min: f64,
    unresolved_min: f64,
    nodes: u64,
    next_id: u64,
    stop: Option<SolveStatus>,
    trace: Vec<TracePoint>,
}

impl Shared {
    /// Lower bound over every region not yet discarded, ignoring the incumbent.
    fn open_bound(&self) -> f64 {
        let heap = self.heap.peek().map_or(f64::INFINITY, |n| n.lower_bound);
        let flight = self.in_flight.iter().map(|&(_, b)| b).fold(f64::INFINITY, f64::min);
        heap.min(flight).min(self.fathomed_min).min(self.unresolved_min)
    }
}

/// Global minimization of `q` (a lifting of the IK program for `chain` and `target`).
pub fn solve_global(q: &Qcqp, chain: &KinematicChain, target: &Pose, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    if q.num_original() != 2 * chain.dof() {
        return Err(IkError::Inconsistent(format!(
            "QCQP has {} original variables, chain needs {}",
            q.num_original(),
            2 * chain.dof()
        )));
    }
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(opts.time_limit.min(1e9));
    let root = initial_box(q, chain);
    let ctx = Context { q, chain, target, relax: Relaxation::new(q), root: root.clone(), opts };

    let warm = opts.warm_start.as_ref();
    let warm_incumbent = warm.and_then(|w| ctx.accept(w));
    let warm_start_objective = warm_incumbent.as_ref().map(|i| i.objective);
    let mut shared = Shared {
        heap: BinaryHeap::new(),
        in_flight: Vec::new(),
        incumbent: warm_incumbent,
        fathomed_min: f64::INFINITY,
        unresolved_min: f64::INFINITY,
        nodes: 0,
        next_id: 1,
        stop: None,
        trace: Vec::new(),
    };
    shared.heap.push(BnbNode { bounds: root, lower_bound: f64::NEG_INFINITY, depth: 0, id: 0 });

    let state = Mutex::new(shared);
    let wake = Condvar::new();
    let threads = opts.threads.max(1);
    if threads == 1 {
        worker(&ctx, &state, &wake, deadline);
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| worker(&ctx, &state, &wake, deadline));
            }
        });
    }

    let shared = state.into_inner().expect("worker panicked");
    let exhausted = shared.heap.is_empty() && shared.stop.is_none();
    let open = shared.open_bound();
    let inc = shared.incumbent.clone();
    let status = match (shared.stop, &inc) {
        (Some(s), _) => s,
        (None, Some(i)) => {
            let g = (i.objective - open.min(i.objective)) / i.objective.abs().max(1.0);
            if g <= gap_allowance(opts, i.objective) {
                SolveStatus::Optimal
            } else {
                SolveStatus::GapLimit
            }
        }
        (None, None) if shared.unresolved_min.is_finite() => SolveStatus::GapLimit,
        (None, None) => SolveStatus::Infeasible,
    };
    let best_bound = match &inc {
        Some(i) => Some(open.min(i.objective)),
        None if open.is_finite() => Some(open),
        None => None,
    };
    let gap = match (&inc, best_bound) {
        (Some(i), Some(b)) => Some((i.objective - b) / i.objective.abs().max(1.0)),
        _ => None,
    };
    let errors = inc.as_ref().map(|i| {
        let fk = forward_kinematics(chain, &i.angles).expect("incumbent length matches chain");
        pose_error(&fk, target)
    });
    Ok(SolveResult {
        status,
        objective: inc.as_ref().map(|i| i.objective),
        angles: inc.map(|i| i.angles),
        best_bound,
        gap,
        gap_tolerance: opts.gap_rel,
        nodes_explored: shared.nodes,
        wall_time: start.elapsed().as_secs_f64(),
        position_error_um: errors.map(|e| e.0 * 1e6),
        rotation_error_urad: errors.map(|e| e.1 * 1e6),
        queue_exhausted: exhausted,
        warm_start_objective,
        warm_start_iterations: warm.map(|w| w.iterations),
        trace: shared.trace,
    })
}

/// Largest relative gap that still counts as optimal at objective `obj`.
fn gap_allowance(opts: &SolveOptions, obj: f64) -> f64 {
    opts.prune_slack(obj) / obj.abs().max(1.0) + 1e-15
}

fn worker(ctx: &Context<'_>, state: &Mutex<Shared>, wake: &Condvar, deadline: Instant) {
    let mut guard = state.lock().unwrap();
    loop {
        if guard.stop.is_some() {
            break;
        }
        let Some(node) = guard.heap.pop() else {
            if guard.in_flight.is_empty() {
                break;
            }
            guard = wake.wait(guard).unwrap();
            continue;
        };
        if Instant::now() >= deadline {
            guard.heap.push(node);
            guard.stop = Some(SolveStatus::TimeLimit);
            break;
        }
        if guard.nodes >= ctx.opts.node_limit {
            guard.heap.push(node);
            guard.stop = Some(SolveStatus::NodeLimit);
            break;
        }
        guard.nodes += 1;
        guard.in_flight.push((node.id, node.lower_bound));
        let inc = guard.incumbent.as_ref().map(|i| i.objective);
        drop(guard);

        let (outcome, found) = ctx.process(&node, inc);

        guard = state.lock().unwrap();
        guard.in_flight.retain(|&(id, _)| id != node.id);
        if let Some(f) = found {
            if guard.incumbent.as_ref().is_none_or(|i| f.objective < i.objective) {
                log::debug!("incumbent {:.3e} at node {}", f.objective, guard.nodes);
                guard.incumbent = Some(f);
            }
        }
        match outcome {
            Outcome::Pruned => {}
            Outcome::Fathomed(lb) => guard.fathomed_min = guard.fathomed_min.min(lb),
            Outcome::Unresolved(lb) => guard.unresolved_min = guard.unresolved_min.min(lb),
            Outcome::Branched(lb, l, r) => {
                for bounds in [l, r] {
                    let id = guard.next_id;
                    guard.next_id += 1;
                    guard.heap.push(BnbNode { bounds, lower_bound: lb, depth: node.depth + 1, id });
                }
            }
        }
        if ctx.opts.record_trace {
            let point = TracePoint {
                nodes: guard.nodes,
                lower_bound: guard.open_bound(),
                incumbent: guard.incumbent.as_ref().map(|i| i.objective),
            };
            guard.trace.push(point);
        }
        wake.notify_all();
    }
    wake.notify_all();
}

/// Builds the program, lifts it, warm-starts from the preferred angles and solves.
pub fn solve_ik(chain: &KinematicChain, target: &Pose, method: LiftMethod, opts: &SolveOptions) -> Result<SolveResult> {
    let pop = PopProgram::build(chain, target);
    let q = method.lift(&pop, chain, target);
    let mut opts = opts.clone();
    if opts.warm_start.is_none() {
        opts.warm_start = Some(solve_local(chain, target, &chain.preferred(), WARM_START_CAP));
    }
    solve_global(&q, chain, target, &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub checks: Vec<CertificateCheck>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Independent check of a result: pose error, limits, objective and gap arithmetic.
pub fn certify(result: &SolveResult, chain: &KinematicChain, target: &Pose) -> CertificateReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(CertificateCheck { name: name.to_string(), passed, detail });
    };
    match result.status {
        SolveStatus::Infeasible => {
            push("no_solution", result.angles.is_none(), format!("angles present: {}", result.angles.is_some()));
            push("queue_exhausted", result.queue_exhausted, String::new());
        }
        _ => {
            let Some(angles) = &result.angles else {
                push("solution_present", false, "no angles reported".into());
                return CertificateReport { checks };
            };
            match forward_kinematics(chain, angles) {
                Ok(fk) => {
                    let (pos, rot) = pose_error(&fk, target);
                    push("pose_position", pos * 1e6 <= 10.0, format!("{:.3} um", pos * 1e6));
                    push("pose_rotation", rot * 1e6 <= 10.0, format!("{:.3} urad", rot * 1e6));
                }
                Err(e) => push("pose_position", false, e.to_string()),
            }
            push("joint_limits", chain.within_limits(angles), String::new());
            let obj = chain.objective(angles);
            let reported = result.objective.unwrap_or(f64::NAN);
            push("objective_match", (obj - reported).abs() <= 1e-9 * obj.abs().max(1.0), format!("{obj} vs {reported}"));
            if let (Some(b), Some(g)) = (result.best_bound, result.gap) {
                let expect = (reported - b) / reported.abs().max(1.0);
                push("gap_arithmetic", (expect - g).abs() <= 1e-12 && b <= reported + 1e-12, format!("gap {g:e}"));
                if result.status == SolveStatus::Optimal {
                    let allowed = result.gap_tolerance + 1e-9 / reported.abs().max(1.0) + 1e-15;
                    push("gap_within_tolerance", g <= allowed, format!("{g:e} <= {allowed:e}"));
                }
            } else {
                push("gap_arithmetic", false, "missing bound".into());
            }
        }
    }
    CertificateReport { checks }
}
