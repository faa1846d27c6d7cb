use std::ffi::{c_char, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use erm_ffi::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let n = unsafe { erm_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; n + 1];
    unsafe { erm_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    String::from_utf8(buf[..n].to_vec()).unwrap()
}

/// Simulated first-order MPCs for the L-room fixture.
fn l_room_mpcs(dir: &Path) -> PathBuf {
    let out = dir.join("mpcs.csv");
    let scenario = data("l_room.json");
    let args = [
        "erm",
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(erm_core::cli::run(args), 0);
    out
}

#[test]
fn solve_matches_worked_example() {
    let mut s = ErmSolution::default();
    let st = unsafe { erm_solve_rp(10.0, 5.0, 14.0362f64.to_radians(), 20.61553, true, &mut s) };
    assert_eq!(st, ErmStatus::Ok);
    assert!((s.x - 15.0).abs() < 1e-3 && (s.y - 3.75).abs() < 1e-3);
    assert!(s.theta_rad.abs() < 1e-4);
}

#[test]
fn solve_reports_degenerate_ellipse() {
    let mut s = ErmSolution::default();
    let st = unsafe { erm_solve_rp(10.0, 0.0, std::f64::consts::PI, 10.0, false, &mut s) };
    assert_eq!(st, ErmStatus::Solve);
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { erm_solve_rp(10.0, 0.0, 1.0, 20.0, false, ptr::null_mut()) },
        ErmStatus::NullPointer
    );
}

#[test]
fn deviation_and_stats() {
    assert!((erm_point_line_deviation(42.66, 89.26, -10.56, 540.72) - 0.0915).abs() < 1e-3);
    let devs = [1.0, 2.0, 3.0];
    let mut st = ErmStats::default();
    assert_eq!(unsafe { erm_error_stats(devs.as_ptr(), 3, &mut st) }, ErmStatus::Ok);
    assert_eq!(st.mean, 2.0);
    assert!((st.true_rmse.powi(2) - st.mean.powi(2) - st.paper_rmse.powi(2)).abs() < 1e-12);
    assert_eq!(
        unsafe { erm_error_stats(devs.as_ptr(), 0, &mut st) },
        ErmStatus::InvalidArgument
    );
}

#[test]
fn scenario_and_cloud_handles() {
    let dir = tempfile::tempdir().unwrap();
    let mpcs = cstr(&l_room_mpcs(dir.path()));
    let mut sc = ptr::null_mut();
    assert_eq!(
        unsafe { erm_scenario_load(cstr(&data("l_room.json")).as_ptr(), &mut sc) },
        ErmStatus::Ok
    );
    assert_eq!(unsafe { erm_scenario_ue_count(sc) }, 35);

    let mut cloud = ptr::null_mut();
    let opts = erm_reconstruct_options_default();
    assert_eq!(
        unsafe { erm_reconstruct(sc, mpcs.as_ptr(), &opts, &mut cloud) },
        ErmStatus::Ok
    );
    let n = unsafe { erm_cloud_len(cloud) };
    assert!(n > 100);
    let mut p = ErmCloudPoint::default();
    for i in 0..n {
        assert_eq!(unsafe { erm_cloud_point(cloud, i, &mut p) }, ErmStatus::Ok);
        assert!(p.r_m > 0.0);
        assert!(p.duplicate_of < i as i64);
    }
    let mut id = [0 as c_char; 3];
    // truncated copy still reports the full length
    assert_eq!(unsafe { erm_cloud_ue_id(cloud, 0, id.as_mut_ptr(), id.len()) }, 4);
    assert_eq!(id[2], 0);

    let saved = dir.path().join("cloud.csv");
    assert_eq!(unsafe { erm_cloud_save(cloud, cstr(&saved).as_ptr()) }, ErmStatus::Ok);
    assert_eq!(std::fs::read_to_string(&saved).unwrap().lines().count(), n + 1);
    unsafe {
        erm_cloud_free(cloud);
        erm_scenario_free(sc);
    }
}

#[test]
fn load_errors_map_to_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = ptr::null_mut();
    let missing = dir.path().join("missing.json");
    assert_eq!(
        unsafe { erm_scenario_load(cstr(&missing).as_ptr(), &mut sc) },
        ErmStatus::Io
    );
    assert!(sc.is_null());
    assert!(last_error().contains("missing.json"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        unsafe { erm_scenario_load(cstr(&bad).as_ptr(), &mut sc) },
        ErmStatus::Parse
    );
    assert_eq!(
        unsafe { erm_scenario_load(ptr::null(), &mut sc) },
        ErmStatus::NullPointer
    );

    assert_eq!(
        unsafe { erm_scenario_load(cstr(&data("l_room.json")).as_ptr(), &mut sc) },
        ErmStatus::Ok
    );
    let mut cloud = ptr::null_mut();
    let absent = cstr(&dir.path().join("none.csv"));
    assert_eq!(
        unsafe { erm_reconstruct(sc, absent.as_ptr(), ptr::null(), &mut cloud) },
        ErmStatus::Io
    );
    assert!(cloud.is_null());
    unsafe { erm_scenario_free(sc) };
}

#[test]
fn header_is_current() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/erm.h")).unwrap();
    for sym in [
        "erm_solve_rp",
        "erm_reconstruct",
        "erm_cloud_point",
        "erm_error_stats",
        "ERM_STATUS_OK",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(Path::parent).unwrap();
    let lib = target.join("liberm_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let mpcs = l_room_mpcs(dir.path());
    let out = Command::new(&bin).arg(data("l_room.json")).arg(&mpcs).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
