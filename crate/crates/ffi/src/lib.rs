//! C interface to the global inverse kinematics solver.
//!
//! Chains and results are opaque handles created and released by this library. Every
//! fallible function returns an [`IkStatus`]; on failure a message is available from
//! [`ik_last_error_message`] on the calling thread. Poses are 16 doubles, row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ik_core::bnb::{solve_ik, SolveOptions, SolveResult, SolveStatus};
use ik_core::kinematics::{forward_kinematics, KinematicChain, Pose};
use ik_core::lifting::LiftMethod;

/// Return code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Solver = 4,
    NoSolution = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Solver outcome stored in a result handle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkOutcome {
    Optimal = 0,
    Infeasible = 1,
    GapLimit = 2,
    TimeLimit = 3,
    NodeLimit = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkLift {
    A = 0,
    M = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolveOptions {
    pub gap_rel: f64,
    pub gap_abs: f64,
    /// Seconds.
    pub time_limit: f64,
    pub node_limit: u64,
    pub threads: u32,
    /// An [`IkLift`] value; anything else is rejected.
    pub lift: u32,
    /// Non-zero to seed the search with a local solution.
    pub warm_start: u8,
}

/// Opaque chain handle.
pub struct IkChain(KinematicChain);

/// Opaque result handle.
pub struct IkSolveResult(SolveResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), (IkStatus, String)>) -> IkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IkStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, (IkStatus, String)> {
    // SAFETY: callers pass either null or a pointer obtained from this library / a live object.
    unsafe { p.as_ref() }.ok_or((IkStatus::NullPointer, format!("{what} is null")))
}

fn read_pose(pose: *const f64) -> Result<Pose, (IkStatus, String)> {
    non_null(pose, "pose")?;
    // SAFETY: the caller guarantees 16 readable doubles.
    let v = unsafe { std::slice::from_raw_parts(pose, 16) };
    let rows = std::array::from_fn(|i| std::array::from_fn(|j| v[4 * i + j]));
    Pose::from_rows(rows).map_err(|e| (IkStatus::InvalidArgument, e.to_string()))
}

/// Message for the last failed call on this thread; empty when none. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ik_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a chain from its JSON description (`{"links": [...], "split": k}`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ik_chain_from_json(json: *const c_char, out: *mut *mut IkChain) -> IkStatus {
    guard(|| {
        non_null(json, "json")?;
        if out.is_null() {
            return Err((IkStatus::NullPointer, "out is null".into()));
        }
        let text = unsafe { CStr::from_ptr(json) }.to_str().map_err(|e| (IkStatus::Parse, e.to_string()))?;
        let chain = KinematicChain::from_json(text).map_err(|e| (IkStatus::Parse, e.to_string()))?;
        unsafe { *out = Box::into_raw(Box::new(IkChain(chain))) };
        Ok(())
    })
}

/// # Safety
/// `chain` must be null or a handle from [`ik_chain_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ik_chain_free(chain: *mut IkChain) {
    if !chain.is_null() {
        drop(unsafe { Box::from_raw(chain) });
    }
}

/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_chain_dof(chain: *const IkChain, out: *mut usize) -> IkStatus {
    guard(|| {
        let chain = non_null(chain, "chain")?;
        if out.is_null() {
            return Err((IkStatus::NullPointer, "out is null".into()));
        }
        unsafe { *out = chain.0.dof() };
        Ok(())
    })
}

/// Writes the end-effector pose for `angles` (length `len`) into `out_pose` (16 doubles).
///
/// # Safety
/// `angles` must hold `len` doubles and `out_pose` 16 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ik_forward_kinematics(
    chain: *const IkChain,
    angles: *const f64,
    len: usize,
    out_pose: *mut f64,
) -> IkStatus {
    guard(|| {
        let chain = non_null(chain, "chain")?;
        non_null(angles, "angles")?;
        if out_pose.is_null() {
            return Err((IkStatus::NullPointer, "out_pose is null".into()));
        }
        let theta = unsafe { std::slice::from_raw_parts(angles, len) };
        let pose = forward_kinematics(&chain.0, theta).map_err(|e| (IkStatus::InvalidArgument, e.to_string()))?;
        let out = unsafe { std::slice::from_raw_parts_mut(out_pose, 16) };
        for (i, row) in pose.rows().iter().enumerate() {
            out[4 * i..4 * i + 4].copy_from_slice(row);
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn ik_solve_options_default() -> IkSolveOptions {
    let d = SolveOptions::default();
    IkSolveOptions {
        gap_rel: d.gap_rel,
        gap_abs: d.gap_abs,
        time_limit: d.time_limit,
        node_limit: d.node_limit,
        threads: 1,
        lift: IkLift::A as u32,
        warm_start: 1,
    }
}

/// Solves for `pose` (16 doubles, row-major). `options` may be null for defaults.
/// The result handle is produced for every solver outcome, including infeasible.
///
/// # Safety
/// Pointers must be valid as documented; `out` receives a handle to free with [`ik_result_free`].
#[no_mangle]
pub unsafe extern "C" fn ik_solve(
    chain: *const IkChain,
    pose: *const f64,
    options: *const IkSolveOptions,
    out: *mut *mut IkSolveResult,
) -> IkStatus {
    guard(|| {
        let chain = non_null(chain, "chain")?;
        let target = read_pose(pose)?;
        if out.is_null() {
            return Err((IkStatus::NullPointer, "out is null".into()));
        }
        let o = unsafe { options.as_ref() }.copied().unwrap_or_else(|| ik_solve_options_default());
        let opts = SolveOptions {
            gap_rel: o.gap_rel,
            gap_abs: o.gap_abs,
            time_limit: o.time_limit,
            node_limit: o.node_limit,
            threads: o.threads.max(1) as usize,
            ..SolveOptions::default()
        };
        let method = match o.lift {
            x if x == IkLift::A as u32 => LiftMethod::A,
            x if x == IkLift::M as u32 => LiftMethod::M,
            other => return Err((IkStatus::InvalidArgument, format!("unknown lift method {other}"))),
        };
        let res = if o.warm_start != 0 {
            solve_ik(&chain.0, &target, method, &opts)
        } else {
            let pop = ik_core::pop::PopProgram::build(&chain.0, &target);
            let q = method.lift(&pop, &chain.0, &target);
            ik_core::bnb::solve_global(&q, &chain.0, &target, &opts)
        }
        .map_err(|e| (IkStatus::Solver, e.to_string()))?;
        unsafe { *out = Box::into_raw(Box::new(IkSolveResult(res))) };
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a live handle from [`ik_solve`].
#[no_mangle]
pub unsafe extern "C" fn ik_result_free(result: *mut IkSolveResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_result_outcome(result: *const IkSolveResult, out: *mut IkOutcome) -> IkStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        if out.is_null() {
            return Err((IkStatus::NullPointer, "out is null".into()));
        }
        let v = match r.0.status {
            SolveStatus::Optimal => IkOutcome::Optimal,
            SolveStatus::Infeasible => IkOutcome::Infeasible,
            SolveStatus::GapLimit => IkOutcome::GapLimit,
            SolveStatus::TimeLimit => IkOutcome::TimeLimit,
            SolveStatus::NodeLimit => IkOutcome::NodeLimit,
        };
        unsafe { *out = v };
        Ok(())
    })
}

/// Copies the joint angles into `out` (capacity `cap`); `written` receives the count.
/// Returns `NoSolution` when the result carries no angles.
///
/// # Safety
/// `out` must hold `cap` writable doubles; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn ik_result_angles(
    result: *const IkSolveResult,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> IkStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        let angles = r.0.angles.as_ref().ok_or((IkStatus::NoSolution, "no solution".to_string()))?;
        if !written.is_null() {
            unsafe { *written = angles.len() };
        }
        if cap < angles.len() {
            return Err((IkStatus::BufferTooSmall, format!("need {} doubles, got {cap}", angles.len())));
        }
        if out.is_null() {
            return Err((IkStatus::NullPointer, "out is null".into()));
        }
        unsafe { ptr::copy_nonoverlapping(angles.as_ptr(), out, angles.len()) };
        Ok(())
    })
}

fn scalar(result: *const IkSolveResult, out: *mut f64, pick: impl FnOnce(&SolveResult) -> Option<f64>) -> IkStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        if out.is_null() {
            return Err((IkStatus::NullPointer, "out is null".into()));
        }
        let v = pick(&r.0).ok_or((IkStatus::NoSolution, "value not available".to_string()))?;
        unsafe { *out = v };
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_result_objective(result: *const IkSolveResult, out: *mut f64) -> IkStatus {
    scalar(result, out, |r| r.objective)
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_result_best_bound(result: *const IkSolveResult, out: *mut f64) -> IkStatus {
    scalar(result, out, |r| r.best_bound)
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_result_gap(result: *const IkSolveResult, out: *mut f64) -> IkStatus {
    scalar(result, out, |r| r.gap)
}

/// Seconds spent in the global search.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_result_wall_time(result: *const IkSolveResult, out: *mut f64) -> IkStatus {
    scalar(result, out, |r| Some(r.wall_time))
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_result_nodes(result: *const IkSolveResult, out: *mut u64) -> IkStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        if out.is_null() {
            return Err((IkStatus::NullPointer, "out is null".into()));
        }
        unsafe { *out = r.0.nodes_explored };
        Ok(())
    })
}

/// Full result as JSON; release the string with [`ik_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_result_to_json(result: *const IkSolveResult, out: *mut *mut c_char) -> IkStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        if out.is_null() {
            return Err((IkStatus::NullPointer, "out is null".into()));
        }
        let text = serde_json::to_string(&r.0).map_err(|e| (IkStatus::Solver, e.to_string()))?;
        let c = CString::new(text).map_err(|e| (IkStatus::Solver, e.to_string()))?;
        unsafe { *out = c.into_raw() };
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ik_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status_codes() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, IkStatus::Panic);
        let msg = unsafe { CStr::from_ptr(ik_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }

    #[test]
    fn interior_nul_in_messages_is_replaced() {
        set_error("a\0b");
        let msg = unsafe { CStr::from_ptr(ik_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "a b");
    }
}
