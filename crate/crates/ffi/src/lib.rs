//! C interface to the driftlab toolkit.
//!
//! Every entry point returns a [`DlStatus`]. On failure a message is kept per
//! thread and can be read with [`dl_last_error`]. Handles are opaque and owned
//! by the caller, who releases them with the matching `*_free` function.
//! Strings are copied into caller buffers: pass `cap = 0` to learn the size
//! (including the NUL) through `needed`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use driftlab::cli::{run_check, Overrides, RunConfig};
use driftlab::stokes::{run, SolutionTrajectory};
use driftlab::verify::VerificationReport;
use driftlab::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Precondition = 4,
    StepTooLarge = 5,
    Io = 6,
    BufferTooSmall = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Parsed and validated run configuration.
pub struct DlConfig(RunConfig);

/// Solver output.
pub struct DlTrajectory(SolutionTrajectory);

/// One or more verification reports from a single check.
pub struct DlReport(Vec<VerificationReport>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::UnknownKind(_) => DlStatus::Config,
            Error::StepTooLarge { .. } => DlStatus::StepTooLarge,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Format(_) => DlStatus::Io,
            _ => DlStatus::Precondition,
        };
        Failure(code, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DlStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            DlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(DlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn copy_out(s: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> Result<(), Failure> {
    let bytes = s.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if cap == 0 && needed.is_null() {
        return Err(null("needed"));
    }
    if cap < bytes.len() + 1 {
        if cap == 0 {
            return Ok(());
        }
        return Err(Failure(DlStatus::BufferTooSmall, format!("need {} bytes, have {cap}", bytes.len() + 1)));
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Message of the last failure on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// The default configuration.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dl_config_default(out: *mut *mut DlConfig) -> DlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(DlConfig(RunConfig::default())));
        Ok(())
    })
}

/// Parses and validates `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dl_config_parse(text: *const c_char, out: *mut *mut DlConfig) -> DlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mut cfg = RunConfig::parse(str_arg(text, "text")?)?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(DlConfig(cfg)));
        Ok(())
    })
}

/// Releases a configuration; null is ignored.
///
/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_config_free(cfg: *mut DlConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the solver at `refine`-fold resolution (1 for the configured grid).
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dl_solve(cfg: *const DlConfig, refine: usize, out: *mut *mut DlTrajectory) -> DlStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let out = out_ptr(out, "out")?;
        if refine == 0 {
            return Err(Failure(DlStatus::OutOfRange, "refine must be >= 1".into()));
        }
        let t = run(&cfg.0.solver_config(refine, false)?)?;
        *out = Box::into_raw(Box::new(DlTrajectory(t)));
        Ok(())
    })
}

/// Releases a trajectory; null is ignored.
///
/// # Safety
/// `t` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_trajectory_free(t: *mut DlTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of stored time levels (`steps + 1`).
///
/// # Safety
/// `t` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dl_trajectory_levels(t: *const DlTrajectory, out: *mut usize) -> DlStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(t, "t")?.0.levels();
        Ok(())
    })
}

/// Time and kinetic energy `1/2 ||v||^2` at a level.
///
/// # Safety
/// `t` must be a live handle; `time` and `kinetic` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dl_trajectory_energy(
    t: *const DlTrajectory,
    level: usize,
    time: *mut f64,
    kinetic: *mut f64,
) -> DlStatus {
    guard(|| {
        let t = &handle(t, "t")?.0;
        let (time, kinetic) = (out_ptr(time, "time")?, out_ptr(kinetic, "kinetic")?);
        if level >= t.levels() {
            return Err(Failure(DlStatus::OutOfRange, format!("level {level} of {}", t.levels())));
        }
        *time = t.level_time(level);
        *kinetic = t.energy.kinetic[level];
        Ok(())
    })
}

/// SHA-256 configuration hash of the run, as hex.
///
/// # Safety
/// `t` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn dl_trajectory_config_hash(
    t: *const DlTrajectory,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> DlStatus {
    guard(|| copy_out(handle(t, "t")?.0.config_hash(), buf, cap, needed))
}

/// Writes velocity, pressure and manifest files under `dir`.
///
/// # Safety
/// `t` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn dl_trajectory_save(t: *const DlTrajectory, dir: *const c_char) -> DlStatus {
    guard(|| {
        let t = handle(t, "t")?;
        t.0.save(&PathBuf::from(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// Runs one named check (`rh`, `llogl`, `stein`, `cz`, `mazver`, `energy`,
/// `caccioppoli`, `iteration`, `identity`, `pressure`).
///
/// # Safety
/// `cfg` must be a live handle, `which` NUL-terminated, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dl_verify(cfg: *const DlConfig, which: *const c_char, out: *mut *mut DlReport) -> DlStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let which = str_arg(which, "which")?;
        let out = out_ptr(out, "out")?;
        let reports = run_check(&cfg.0, which, &Overrides::default())?;
        *out = Box::into_raw(Box::new(DlReport(reports)));
        Ok(())
    })
}

/// Releases a report set; null is ignored.
///
/// # Safety
/// `r` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_report_free(r: *mut DlReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of reports in the set (one per exponent for sweeps).
///
/// # Safety
/// `r` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dl_report_count(r: *const DlReport, out: *mut usize) -> DlStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(r, "r")?.0.len();
        Ok(())
    })
}

/// Whether every report in the set passes.
///
/// # Safety
/// `r` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dl_report_pass(r: *const DlReport, out: *mut bool) -> DlStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(r, "r")?.0.iter().all(|x| x.summary.pass);
        Ok(())
    })
}

/// Report `index` serialized as JSON.
///
/// # Safety
/// `r` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn dl_report_json(
    r: *const DlReport,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> DlStatus {
    guard(|| {
        let r = &handle(r, "r")?.0;
        let rep = r
            .get(index)
            .ok_or_else(|| Failure(DlStatus::OutOfRange, format!("report {index} of {}", r.len())))?;
        copy_out(&rep.to_json()?, buf, cap, needed)
    })
}
