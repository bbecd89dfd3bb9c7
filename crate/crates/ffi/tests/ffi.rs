use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use trunk_ffi::*;

fn defaults() -> TrunkParams {
    let mut p = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { trunk_params_default(p.as_mut_ptr()) }, TrunkStatus::Ok);
    unsafe { p.assume_init() }
}

fn last_error() -> String {
    let p = trunk_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn closed_forms() {
    let p = defaults();
    let mut len = 0.0;
    assert_eq!(unsafe { trunk_linear_extension_length(&p, 0.2e6, &mut len) }, TrunkStatus::Ok);
    assert!((len * 1e3 - 352.6196).abs() < 1e-3);
    let mut tip = [0.0; 3];
    assert_eq!(unsafe { trunk_c_bend_tip(&p, 0.1e6, 200.6, tip.as_mut_ptr()) }, TrunkStatus::Ok);
    assert!((tip[1] * 1e3 - 130.875).abs() < 1e-2);
    assert!((tip[2] * 1e3 - 251.623).abs() < 1e-2);
}

#[test]
fn errors_are_reported() {
    let p = defaults();
    let mut tip = [0.0; 3];
    assert_eq!(unsafe { trunk_c_bend_tip(&p, 0.1e6, 0.0, tip.as_mut_ptr()) }, TrunkStatus::InvalidArgument);
    assert!(last_error().contains('k'));
    assert_eq!(unsafe { trunk_c_bend_tip(ptr::null(), 0.1e6, 1.0, tip.as_mut_ptr()) }, TrunkStatus::NullPointer);
    assert!(last_error().contains("params"));
    assert_eq!(unsafe { trunk_c_bend_tip(&p, 0.1e6, 1.0, ptr::null_mut()) }, TrunkStatus::NullPointer);
    let mut k = 0.0;
    assert_eq!(
        unsafe { trunk_fit_spring_constant(&p, ptr::null(), 0, 50.0, 500.0, &mut k, ptr::null_mut()) },
        TrunkStatus::NullPointer
    );
}

#[test]
fn classify_and_fit() {
    let p = defaults();
    let c = TrunkControl {
        theta_left_deg: -90.0,
        theta_right_deg: 90.0,
        pressure_left: 0.2e6,
        pressure_right: 0.2e6,
        thread_length_left: p.rest_length,
        thread_length_right: p.rest_length,
    };
    let mut pattern = TrunkPattern::Unclassified;
    assert_eq!(unsafe { trunk_classify_pattern(&p, &c, 5.0, &mut pattern) }, TrunkStatus::Ok);
    assert_eq!(pattern, TrunkPattern::JShaped);

    let obs: Vec<TrunkObservation> = trunk_core::fitting::MEASURED_TIPS
        .iter()
        .map(|&(pm, x, y, z)| TrunkObservation {
            pressure: pm * 1e6,
            tip: [x * 1e-3, y * 1e-3, z * 1e-3],
        })
        .collect();
    let (mut k, mut r) = (0.0, 0.0);
    assert_eq!(
        unsafe { trunk_fit_spring_constant(&p, obs.as_ptr(), obs.len(), 50.0, 500.0, &mut k, &mut r) },
        TrunkStatus::Ok
    );
    assert!((k - 199.14).abs() < 0.05, "{k}");
    assert!((r - 0.00278).abs() < 1e-4, "{r}");
}

#[test]
fn simulation_handle() {
    let p = defaults();
    let mut sim: *mut TrunkSim = ptr::null_mut();
    assert_eq!(unsafe { trunk_sim_new(&p, 10, 0, &mut sim) }, TrunkStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { trunk_sim_node_count(sim, &mut n) }, TrunkStatus::Ok);
    assert_eq!(n, 11);
    let bad = TrunkControl {
        theta_left_deg: 0.0,
        theta_right_deg: 0.0,
        pressure_left: -1.0,
        pressure_right: 0.0,
        thread_length_left: p.rest_length,
        thread_length_right: p.rest_length,
    };
    assert_eq!(unsafe { trunk_sim_apply_control(sim, &bad) }, TrunkStatus::InvalidArgument);
    let good = TrunkControl {
        pressure_left: 0.05e6,
        pressure_right: 0.05e6,
        ..bad
    };
    assert_eq!(unsafe { trunk_sim_apply_control(sim, &good) }, TrunkStatus::Ok);
    let mut tip = [0.0; 3];
    assert_eq!(unsafe { trunk_sim_tip(sim, tip.as_mut_ptr()) }, TrunkStatus::Ok);
    assert!(tip[1] > 0.0 && tip[0].abs() < 1e-9);
    let mut line = vec![0.0; 3 * n];
    assert_eq!(unsafe { trunk_sim_centerline(sim, line.as_mut_ptr(), n - 1) }, TrunkStatus::BufferTooSmall);
    assert_eq!(unsafe { trunk_sim_centerline(sim, line.as_mut_ptr(), n) }, TrunkStatus::Ok);
    assert_eq!(&line[0..3], &[0.0, 0.0, 0.0]);
    unsafe { trunk_sim_free(sim) };
    unsafe { trunk_sim_free(ptr::null_mut()) };
}

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(crate_dir().join("include/trunk.h")).unwrap();
    for name in [
        "trunk_params_default",
        "trunk_linear_extension_length",
        "trunk_c_bend_tip",
        "trunk_classify_pattern",
        "trunk_fit_spring_constant",
        "trunk_sim_new",
        "trunk_sim_free",
        "trunk_sim_apply_control",
        "trunk_sim_tip",
        "trunk_sim_node_count",
        "trunk_sim_centerline",
        "trunk_last_error_message",
        "typedef struct TrunkSim TrunkSim",
        "TRUNK_STATUS_NOT_CONVERGED",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compile and run a C program against the static library.
#[test]
fn c_program_links_and_runs() {
    let deps: PathBuf = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.join("libtrunk_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
