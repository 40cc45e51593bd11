use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use driftlab_ffi::*;

fn cfg(text: &str) -> *mut DlConfig {
    let t = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dl_config_parse(t.as_ptr(), &mut out) }, DlStatus::Ok);
    out
}

fn last_error() -> String {
    let p = dl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn hash(t: *const DlTrajectory) -> String {
    let mut needed = 0;
    assert_eq!(unsafe { dl_trajectory_config_hash(t, ptr::null_mut(), 0, &mut needed) }, DlStatus::Ok);
    let mut buf = vec![0 as std::ffi::c_char; needed];
    assert_eq!(unsafe { dl_trajectory_config_hash(t, buf.as_mut_ptr(), needed, ptr::null_mut()) }, DlStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

const SMALL: &str = "grid.points = 8\ngrid.steps = 16\ngrid.t_end = 0.05\n";

#[test]
fn solve_round_trip_and_determinism() {
    let c = cfg(SMALL);
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(dl_solve(c, 1, &mut a), DlStatus::Ok);
        assert_eq!(dl_solve(c, 1, &mut b), DlStatus::Ok);
        let mut levels = 0;
        assert_eq!(dl_trajectory_levels(a, &mut levels), DlStatus::Ok);
        assert_eq!(levels, 17);
        let (mut t0, mut e0, mut t1, mut e1) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(dl_trajectory_energy(a, 0, &mut t0, &mut e0), DlStatus::Ok);
        assert_eq!(dl_trajectory_energy(a, levels - 1, &mut t1, &mut e1), DlStatus::Ok);
        assert!(t1 > t0 && e1 < e0 && e0 > 0.0);
        assert_eq!(dl_trajectory_energy(a, levels, &mut t1, &mut e1), DlStatus::OutOfRange);
        assert!(last_error().contains("level"));
        assert_eq!(hash(a), hash(b));
        assert_eq!(hash(a).len(), 64);
        dl_trajectory_free(a);
        dl_trajectory_free(b);
        dl_config_free(c);
    }
}

#[test]
fn buffers_that_are_too_small_are_reported() {
    let c = cfg(SMALL);
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(dl_solve(c, 1, &mut t), DlStatus::Ok);
        let mut buf = [0 as std::ffi::c_char; 8];
        let mut needed = 0;
        assert_eq!(dl_trajectory_config_hash(t, buf.as_mut_ptr(), buf.len(), &mut needed), DlStatus::BufferTooSmall);
        assert_eq!(needed, 65);
        dl_trajectory_free(t);
        dl_config_free(c);
    }
}

#[test]
fn errors_map_to_codes_with_messages() {
    let mut out = ptr::null_mut();
    let bad = CString::new("no.such.key = 1").unwrap();
    assert_eq!(unsafe { dl_config_parse(bad.as_ptr(), &mut out) }, DlStatus::Config);
    assert!(last_error().contains("no.such.key"));
    assert!(out.is_null());

    assert_eq!(unsafe { dl_config_parse(ptr::null(), &mut out) }, DlStatus::NullPointer);
    let utf = [0xffu8, 0];
    assert_eq!(unsafe { dl_config_parse(utf.as_ptr() as *const _, &mut out) }, DlStatus::InvalidUtf8);

    let steep = CString::new("grid.steps = 1").unwrap();
    assert_eq!(unsafe { dl_config_parse(steep.as_ptr(), &mut out) }, DlStatus::StepTooLarge);
    assert!(last_error().contains("tau"));

    let c = cfg(SMALL);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { dl_solve(c, 0, &mut t) }, DlStatus::OutOfRange);
    let name = CString::new("nope").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dl_verify(c, name.as_ptr(), &mut r) }, DlStatus::Config);
    assert!(last_error().contains("unknown check"));
    unsafe { dl_config_free(c) };

    // success clears the message
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { dl_config_default(&mut d) }, DlStatus::Ok);
    assert!(dl_last_error().is_null());
    unsafe { dl_config_free(d) };
    unsafe { dl_config_free(ptr::null_mut()) };
}

#[test]
fn verify_returns_schema_valid_json() {
    let c = cfg(SMALL);
    let which = CString::new("iteration").unwrap();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(dl_verify(c, which.as_ptr(), &mut r), DlStatus::Ok);
        let (mut n, mut pass) = (0, false);
        assert_eq!(dl_report_count(r, &mut n), DlStatus::Ok);
        assert_eq!(n, 1);
        assert_eq!(dl_report_pass(r, &mut pass), DlStatus::Ok);
        assert!(pass);
        let mut needed = 0;
        assert_eq!(dl_report_json(r, 0, ptr::null_mut(), 0, &mut needed), DlStatus::Ok);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(dl_report_json(r, 0, buf.as_mut_ptr(), needed, ptr::null_mut()), DlStatus::Ok);
        let json = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        let parsed = driftlab::verify::VerificationReport::from_json(json).unwrap();
        assert_eq!(parsed.meta.check, "iteration");
        assert_eq!(dl_report_json(r, 1, buf.as_mut_ptr(), needed, ptr::null_mut()), DlStatus::OutOfRange);
        dl_report_free(r);
        dl_config_free(c);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(dl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/driftlab.h")).unwrap();
    for name in ["dl_last_error", "dl_config_parse", "dl_solve", "dl_verify", "dl_report_json", "DL_STATUS_PANIC"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let src = std::env::temp_dir().join("driftlab_header_check.c");
    std::fs::write(&src, "#include \"driftlab.h\"\nint main(void) { DlStatus s = DL_STATUS_OK; return (int)s; }\n").unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(dir.join("include")).arg(&src).status() {
        Ok(st) => assert!(st.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler; skipped compiling the header"),
    }
}

#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(|d| d.parent()).unwrap().join("libdriftlab_ffi.a");
    if !lib.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no static library or C compiler; skipped");
        return;
    }
    let dir = tempfile_dir();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "driftlab.h"
int main(void) {
    DlConfig *cfg;
    DlTrajectory *traj;
    size_t levels = 0;
    double t, e;
    if (dl_config_parse("grid.points = 8\ngrid.steps = 16\ngrid.t_end = 0.05\n", &cfg) != DL_STATUS_OK) {
        fprintf(stderr, "%s\n", dl_last_error());
        return 1;
    }
    if (dl_solve(cfg, 1, &traj) != DL_STATUS_OK) return 2;
    if (dl_trajectory_levels(traj, &levels) != DL_STATUS_OK || levels != 17) return 3;
    if (dl_trajectory_energy(traj, levels - 1, &t, &e) != DL_STATUS_OK || !(e > 0.0)) return 4;
    if (dl_config_parse("bad = 1", &cfg) != DL_STATUS_CONFIG || dl_last_error() == NULL) return 5;
    dl_trajectory_free(traj);
    dl_config_free(cfg);
    printf("ok %.6f\n", t);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("smoke");
    let include = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let st = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success(), "link failed");
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok 0.050000");
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("driftlab_ffi_{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
