use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ik_ffi::*;

const PLANAR: &str = r#"{"links":[{"d":0,"r":1,"alpha":0},{"d":0,"r":1,"alpha":0}]}"#;

fn chain(json: &str) -> *mut IkChain {
    let text = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ik_chain_from_json(text.as_ptr(), &mut out) }, IkStatus::Ok);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ik_last_error_message()) }.to_string_lossy().into_owned()
}

fn translation(x: f64, y: f64, z: f64) -> [f64; 16] {
    [1.0, 0.0, 0.0, x, 0.0, 1.0, 0.0, y, 0.0, 0.0, 1.0, z, 0.0, 0.0, 0.0, 1.0]
}

#[test]
fn chain_round_trip_and_fk() {
    let c = chain(PLANAR);
    let mut dof = 0;
    assert_eq!(unsafe { ik_chain_dof(c, &mut dof) }, IkStatus::Ok);
    assert_eq!(dof, 2);
    let mut pose = [0.0; 16];
    assert_eq!(unsafe { ik_forward_kinematics(c, [0.0, 0.0].as_ptr(), 2, pose.as_mut_ptr()) }, IkStatus::Ok);
    assert_eq!(pose, translation(2.0, 0.0, 0.0));
    let status = unsafe { ik_forward_kinematics(c, [0.0].as_ptr(), 1, pose.as_mut_ptr()) };
    assert_eq!(status, IkStatus::InvalidArgument);
    assert!(last_error().contains("2"), "{}", last_error());
    unsafe { ik_chain_free(c) };
}

#[test]
fn bad_inputs_report_errors() {
    let text = CString::new("{not json").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ik_chain_from_json(text.as_ptr(), &mut out) }, IkStatus::Parse);
    assert!(out.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { ik_chain_from_json(ptr::null(), &mut out) }, IkStatus::NullPointer);
    let mut dof = 0;
    assert_eq!(unsafe { ik_chain_dof(ptr::null(), &mut dof) }, IkStatus::NullPointer);
    unsafe {
        ik_chain_free(ptr::null_mut());
        ik_result_free(ptr::null_mut());
        ik_string_free(ptr::null_mut());
    }

    let c = chain(PLANAR);
    let mut skewed = translation(1.0, 1.0, 0.0);
    skewed[0] = 2.0;
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { ik_solve(c, skewed.as_ptr(), ptr::null(), &mut res) }, IkStatus::InvalidArgument);
    let mut opts = ik_solve_options_default();
    opts.lift = 9;
    let ok = translation(1.0, 1.0, 0.0);
    assert_eq!(unsafe { ik_solve(c, ok.as_ptr(), &opts, &mut res) }, IkStatus::InvalidArgument);
    opts.lift = IkLift::A as u32;
    opts.time_limit = 0.0;
    assert_eq!(unsafe { ik_solve(c, ok.as_ptr(), &opts, &mut res) }, IkStatus::Solver);
    unsafe { ik_chain_free(c) };
}

#[test]
fn solve_reachable_and_unreachable() {
    let c = chain(PLANAR);
    let mut pose = [0.0; 16];
    unsafe { ik_forward_kinematics(c, [0.3, -0.5].as_ptr(), 2, pose.as_mut_ptr()) };
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { ik_solve(c, pose.as_ptr(), ptr::null(), &mut res) }, IkStatus::Ok);
    let mut outcome = IkOutcome::NodeLimit;
    assert_eq!(unsafe { ik_result_outcome(res, &mut outcome) }, IkStatus::Ok);
    assert_eq!(outcome, IkOutcome::Optimal);
    let mut angles = [0.0; 2];
    let mut written = 0;
    assert_eq!(unsafe { ik_result_angles(res, angles.as_mut_ptr(), 2, &mut written) }, IkStatus::Ok);
    assert_eq!(written, 2);
    assert!((angles[0] - 0.3).abs() < 1e-6 && (angles[1] + 0.5).abs() < 1e-6, "{angles:?}");
    assert_eq!(unsafe { ik_result_angles(res, angles.as_mut_ptr(), 1, &mut written) }, IkStatus::BufferTooSmall);
    let (mut obj, mut bound, mut gap, mut time) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    unsafe {
        assert_eq!(ik_result_objective(res, &mut obj), IkStatus::Ok);
        assert_eq!(ik_result_best_bound(res, &mut bound), IkStatus::Ok);
        assert_eq!(ik_result_gap(res, &mut gap), IkStatus::Ok);
        assert_eq!(ik_result_wall_time(res, &mut time), IkStatus::Ok);
    }
    assert!(bound <= obj && gap <= 1e-6 && time >= 0.0);
    let mut nodes = 0;
    assert_eq!(unsafe { ik_result_nodes(res, &mut nodes) }, IkStatus::Ok);
    assert!(nodes >= 1);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ik_result_to_json(res, &mut json) }, IkStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"status\":\"optimal\""), "{text}");
    unsafe {
        ik_string_free(json);
        ik_result_free(res);
    }

    let far = translation(3.0, 0.0, 0.0);
    let mut opts = ik_solve_options_default();
    opts.lift = IkLift::M as u32;
    opts.warm_start = 0;
    assert_eq!(unsafe { ik_solve(c, far.as_ptr(), &opts, &mut res) }, IkStatus::Ok);
    assert_eq!(unsafe { ik_result_outcome(res, &mut outcome) }, IkStatus::Ok);
    assert_eq!(outcome, IkOutcome::Infeasible);
    assert_eq!(unsafe { ik_result_objective(res, &mut obj) }, IkStatus::NoSolution);
    assert_eq!(unsafe { ik_result_angles(res, angles.as_mut_ptr(), 2, ptr::null_mut()) }, IkStatus::NoSolution);
    unsafe {
        ik_result_free(res);
        ik_chain_free(c);
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(crate_dir().join("include/ik_ffi.h")).unwrap();
    for name in [
        "typedef struct IkChain IkChain",
        "typedef struct IkSolveResult IkSolveResult",
        "IK_STATUS_OK = 0",
        "ik_chain_from_json",
        "ik_chain_free",
        "ik_forward_kinematics",
        "ik_solve(",
        "ik_result_angles",
        "ik_last_error_message",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// Compiles and runs a C program against the static library when a C compiler is present.
#[test]
fn c_program_links_and_solves() {
    let Ok(exe) = std::env::current_exe() else { return };
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libik_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let dir = tempfile_dir();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <math.h>
#include "ik_ffi.h"
int main(void) {
    IkChain *chain = NULL;
    const char *json = "{\"links\":[{\"d\":0,\"r\":1,\"alpha\":0},{\"d\":0,\"r\":1,\"alpha\":0}]}";
    if (ik_chain_from_json(json, &chain) != IK_STATUS_OK) return 1;
    double angles[2] = {0.3, -0.5}, pose[16];
    if (ik_forward_kinematics(chain, angles, 2, pose) != IK_STATUS_OK) return 2;
    IkSolveResult *res = NULL;
    IkSolveOptions opts = ik_solve_options_default();
    if (ik_solve(chain, pose, &opts, &res) != IK_STATUS_OK) return 3;
    IkOutcome outcome;
    ik_result_outcome(res, &outcome);
    double out[2];
    size_t n = 0;
    if (outcome != IK_OUTCOME_OPTIMAL || ik_result_angles(res, out, 2, &n) != IK_STATUS_OK) return 4;
    if (fabs(out[0] - 0.3) > 1e-6 || fabs(out[1] + 0.5) > 1e-6) return 5;
    ik_result_free(res);
    ik_chain_free(chain);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

fn tempfile_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_program");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
