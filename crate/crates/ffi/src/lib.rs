//! C ABI over `erm-core`.
//!
//! Every fallible call returns an [`ErmStatus`]; on failure the message is
//! kept per thread and read back with [`erm_last_error_message`]. Objects
//! cross the boundary as opaque handles that the caller releases with the
//! matching `*_free` function. Strings are UTF-8 and NUL-terminated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use erm_core::metrics::{error_stats, point_line_deviation, ReferenceLine};
use erm_core::model::io::{attach_mpcs, read_mpcs, read_scenario, save_point_cloud, LoadOptions};
use erm_core::model::{Point2, Scenario, SPEED_OF_LIGHT};
use erm_core::pipeline::{
    reconstruct_scenario, FreeSpace, PointCloud, ReconstructParams, SolverKind, DEFAULT_DEDUPE_EPS_M,
};
use erm_core::solver::{solve_rp_closed_form_with, solve_rp_root_find, SolveInput, SolverConfig};
use erm_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidData = 5,
    TooFewClusters = 6,
    Solve = 7,
    OutOfRange = 8,
    Panic = 9,
}

impl From<&Error> for ErmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => ErmStatus::Io,
            Error::Parse { .. } => ErmStatus::Parse,
            Error::TooFewClusters { .. } => ErmStatus::TooFewClusters,
            Error::Solve(_) => ErmStatus::Solve,
            Error::Domain(_) | Error::VerticalLine { .. } | Error::EmptyInput => ErmStatus::InvalidArgument,
            _ => ErmStatus::InvalidData,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: ErmStatus, msg: impl Into<String>) -> ErmStatus {
    set_error(msg);
    status
}

fn from_core(e: Error) -> ErmStatus {
    fail(ErmStatus::from(&e), e.to_string())
}

/// Runs `f`, turning a panic into `ErmStatus::Panic`.
fn guard(f: impl FnOnce() -> ErmStatus) -> ErmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ErmStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, ErmStatus> {
    if p.is_null() {
        return Err(fail(ErmStatus::NullPointer, format!("{what} is null")));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(ErmStatus::InvalidArgument, format!("{what} is not UTF-8"))),
    }
}

/// Copies `s` into `buf` (truncating, always NUL-terminated when `len > 0`)
/// and returns the full length without the terminator.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize) -> usize {
    if !buf.is_null() && len > 0 {
        let n = s.len().min(len - 1);
        ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
    }
    s.len()
}

/// Copies the calling thread's last error message into `buf` and returns
/// its length in bytes. Pass a null buffer to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn erm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_out(&e.borrow(), buf, len))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn erm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErmSolution {
    pub x: f64,
    pub y: f64,
    /// Distance from the UE to the reflection point.
    pub r_m: f64,
    /// Inclination of the reflecting face, radians in (-π/2, π/2].
    pub theta_rad: f64,
}

/// Solves one reflection point with the BS at the origin.
///
/// # Safety
/// `out` must be null or point to writable memory for one `ErmSolution`.
#[no_mangle]
pub unsafe extern "C" fn erm_solve_rp(
    ue_x: f64,
    ue_y: f64,
    aoa_rad: f64,
    path_len_m: f64,
    root_find: bool,
    out: *mut ErmSolution,
) -> ErmStatus {
    guard(|| {
        if out.is_null() {
            return fail(ErmStatus::NullPointer, "out is null");
        }
        let input = SolveInput::new(Point2::new(ue_x, ue_y), aoa_rad, path_len_m);
        let cfg = SolverConfig::default();
        let solved = if root_find {
            solve_rp_root_find(&input, &cfg)
        } else {
            solve_rp_closed_form_with(&input, &cfg)
        };
        match solved {
            Ok(s) => {
                *out = ErmSolution {
                    x: s.o.x,
                    y: s.o.y,
                    r_m: s.r_m,
                    theta_rad: s.theta_rad,
                };
                ErmStatus::Ok
            }
            Err(e) => from_core(e.into()),
        }
    })
}

/// Perpendicular distance from `(x, y)` to the line `y = a_l x + b_l`.
#[no_mangle]
pub extern "C" fn erm_point_line_deviation(x: f64, y: f64, a_l: f64, b_l: f64) -> f64 {
    point_line_deviation(Point2::new(x, y), &ReferenceLine::new(a_l, b_l, ""))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErmStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub paper_rmse: f64,
    /// Root mean square.
    pub true_rmse: f64,
}

/// Summary statistics of `n` deviations.
///
/// # Safety
/// `devs` must be valid for `n` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn erm_error_stats(devs: *const f64, n: usize, out: *mut ErmStats) -> ErmStatus {
    guard(|| {
        if devs.is_null() || out.is_null() {
            return fail(ErmStatus::NullPointer, "devs or out is null");
        }
        match error_stats(std::slice::from_raw_parts(devs, n)) {
            Ok(s) => {
                *out = ErmStats {
                    min: s.min,
                    max: s.max,
                    mean: s.mean,
                    paper_rmse: s.paper_rmse,
                    true_rmse: s.true_rmse,
                };
                ErmStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// A loaded scenario file.
pub struct ErmScenario {
    inner: Scenario,
}

/// Loads a scenario JSON file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn erm_scenario_load(path: *const c_char, out: *mut *mut ErmScenario) -> ErmStatus {
    guard(|| {
        if out.is_null() {
            return fail(ErmStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match read_scenario(&path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(ErmScenario { inner }));
                ErmStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `s` must be null or a handle from `erm_scenario_load`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn erm_scenario_free(s: *mut ErmScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of UEs declared in the scenario; 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn erm_scenario_ue_count(s: *const ErmScenario) -> usize {
    s.as_ref().map_or(0, |s| s.inner.ues.len())
}

/// Number of walls in the scenario; 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn erm_scenario_wall_count(s: *const ErmScenario) -> usize {
    s.as_ref().map_or(0, |s| s.inner.env.walls.len())
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmReconstructOptions {
    /// Speed of light, m/s.
    pub c: f64,
    /// Subtract the scenario's antenna gains from MPC powers.
    pub compensate_gains: bool,
    pub delay_gap_s: f64,
    pub angle_gap_rad: f64,
    /// Delay resolution of the measurement, seconds.
    pub delay_quantum_s: f64,
    pub dedupe_eps_m: f64,
    pub root_find: bool,
}

/// Defaults matching the `erm reconstruct` command.
#[no_mangle]
pub extern "C" fn erm_reconstruct_options_default() -> ErmReconstructOptions {
    let p = ReconstructParams::default();
    ErmReconstructOptions {
        c: SPEED_OF_LIGHT,
        compensate_gains: true,
        delay_gap_s: p.cluster.delay_gap_s,
        angle_gap_rad: p.cluster.angle_gap_rad,
        delay_quantum_s: p.delay_quantum_s,
        dedupe_eps_m: DEFAULT_DEDUPE_EPS_M,
        root_find: false,
    }
}

/// A merged reflection-point cloud in the scenario frame.
pub struct ErmCloud {
    inner: PointCloud,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErmCloudPoint {
    pub x: f64,
    pub y: f64,
    pub r_m: f64,
    pub theta_rad: f64,
    pub power_db: f64,
    pub cluster_id: usize,
    /// Index of an earlier point within the dedupe radius, or -1.
    pub duplicate_of: i64,
}

/// Reads MPCs for `scenario`, reconstructs every UE and merges the result.
/// `options` may be null for the defaults.
///
/// # Safety
/// `scenario` must be a live handle, `mpcs_path` NUL-terminated, `options`
/// null or readable, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn erm_reconstruct(
    scenario: *const ErmScenario,
    mpcs_path: *const c_char,
    options: *const ErmReconstructOptions,
    out: *mut *mut ErmCloud,
) -> ErmStatus {
    guard(|| {
        if out.is_null() {
            return fail(ErmStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(scenario) = scenario.as_ref() else {
            return fail(ErmStatus::NullPointer, "scenario is null");
        };
        let path = match path_arg(mpcs_path, "mpcs_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| erm_reconstruct_options_default());
        let sc = &scenario.inner;
        let load = LoadOptions {
            compensate_gains: o.compensate_gains,
            c: o.c,
            delay_slack_s: o.delay_quantum_s,
        };
        let mut params = ReconstructParams {
            path_loss: FreeSpace::with_c(o.c),
            delay_quantum_s: o.delay_quantum_s,
            solver_kind: if o.root_find {
                SolverKind::RootFind
            } else {
                SolverKind::ClosedForm
            },
            ..Default::default()
        };
        params.cluster.delay_gap_s = o.delay_gap_s;
        params.cluster.angle_gap_rad = o.angle_gap_rad;
        let gain = if o.compensate_gains {
            sc.config.total_gain_db()
        } else {
            0.0
        };
        let run = || -> erm_core::Result<PointCloud> {
            let mut mpcs = read_mpcs(&path, gain)?;
            let obs = attach_mpcs(sc, &mut mpcs, &load)?;
            Ok(reconstruct_scenario(sc, &obs, &params, o.dedupe_eps_m)?.0)
        };
        match run() {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(ErmCloud { inner }));
                ErmStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `c` must be null or a handle from `erm_reconstruct`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_free(c: *mut ErmCloud) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live cloud handle.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_len(c: *const ErmCloud) -> usize {
    c.as_ref().map_or(0, |c| c.inner.len())
}

/// # Safety
/// `c` must be a live cloud handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_point(c: *const ErmCloud, index: usize, out: *mut ErmCloudPoint) -> ErmStatus {
    guard(|| {
        let (Some(c), false) = (c.as_ref(), out.is_null()) else {
            return fail(ErmStatus::NullPointer, "cloud or out is null");
        };
        let Some(p) = c.inner.points.get(index) else {
            return fail(ErmStatus::OutOfRange, format!("index {index} >= {}", c.inner.len()));
        };
        let e = &p.estimate;
        *out = ErmCloudPoint {
            x: e.o.x,
            y: e.o.y,
            r_m: e.r_m,
            theta_rad: e.theta_rad,
            power_db: e.source_power_db,
            cluster_id: e.cluster_id,
            duplicate_of: p.duplicate_of.map_or(-1, |j| j as i64),
        };
        ErmStatus::Ok
    })
}

/// Copies the UE id of point `index` into `buf` and returns its length,
/// or 0 with the last error set when the index is out of range.
///
/// # Safety
/// `c` must be a live cloud handle; `buf` null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_ue_id(c: *const ErmCloud, index: usize, buf: *mut c_char, len: usize) -> usize {
    let Some(p) = c.as_ref().and_then(|c| c.inner.points.get(index)) else {
        set_error(format!("no point {index}"));
        return 0;
    };
    copy_out(&p.estimate.ue_id, buf, len)
}

/// Writes the cloud as CSV.
///
/// # Safety
/// `c` must be a live cloud handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_save(c: *const ErmCloud, path: *const c_char) -> ErmStatus {
    guard(|| {
        let Some(c) = c.as_ref() else {
            return fail(ErmStatus::NullPointer, "cloud is null");
        };
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_point_cloud(c.inner.estimates(), &path) {
            Ok(()) => ErmStatus::Ok,
            Err(e) => from_core(e),
        }
    })
}
