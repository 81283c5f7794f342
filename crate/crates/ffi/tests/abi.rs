use std::ffi::{c_char, CStr};
use std::ptr;

use sgiga_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { sgiga_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn circle() -> *mut SgigaExperiment {
    let mut exp = ptr::null_mut();
    let st = unsafe { sgiga_experiment_new(SgigaExample::Circle, 10.0, 1.0, &mut exp) };
    assert_eq!(st, SgigaStatus::Ok);
    assert!(!exp.is_null());
    exp
}

#[test]
fn dof_counts_through_the_abi() {
    let exp = circle();
    for (m, want) in [
        (SgigaMethod::Iga, 49),
        (SgigaMethod::GigaStar, 71),
        (SgigaMethod::Sgiga2, 115),
    ] {
        let mut n = 0usize;
        let st = unsafe { sgiga_dof_count(exp, m, 5, &mut n) };
        assert_eq!(st, SgigaStatus::Ok);
        assert_eq!(n, want, "{m:?}");
    }
    unsafe { sgiga_experiment_free(exp) };
}

#[test]
fn solve_reports_errors_and_conditioning() {
    let exp = circle();
    let mut res = SgigaResult::default();
    let opts = sgiga_default_options();
    let st = unsafe { sgiga_solve(exp, SgigaMethod::Sgiga2, 10, &opts, &mut res) };
    assert_eq!(st, SgigaStatus::Ok);
    assert_eq!(res.dofs, 312);
    assert_eq!(res.dropped, 0);
    assert!(res.h1_error > 0.0 && res.h1_error < 1.0, "{res:?}");
    assert!(res.l2_error < res.h1_error);
    assert!(res.scn > 1.0 && res.scn.is_finite());
    assert!(res.residual < 1e-8);

    // null options means defaults; switching stabilization off keeps the span
    let mut raw = SgigaResult::default();
    let off = SgigaOptions {
        stabilization: SgigaStabilization::Off,
        compute_scn: false,
        ..opts
    };
    let st = unsafe { sgiga_solve(exp, SgigaMethod::Sgiga2, 10, &off, &mut raw) };
    assert_eq!(st, SgigaStatus::Ok);
    assert!(raw.scn.is_nan());
    assert!((raw.h1_error - res.h1_error).abs() <= 1e-6 * res.h1_error);
    let mut dflt = SgigaResult::default();
    let st = unsafe { sgiga_solve(exp, SgigaMethod::Iga, 5, ptr::null(), &mut dflt) };
    assert_eq!(st, SgigaStatus::Ok);
    assert_eq!(dflt.dofs, 49);
    unsafe { sgiga_experiment_free(exp) };
}

#[test]
fn null_pointers_are_rejected() {
    let st = unsafe { sgiga_experiment_new(SgigaExample::Line, 1.0, 1.0, ptr::null_mut()) };
    assert_eq!(st, SgigaStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut n = 0usize;
    let st = unsafe { sgiga_dof_count(ptr::null(), SgigaMethod::Iga, 5, &mut n) };
    assert_eq!(st, SgigaStatus::NullPointer);
    let exp = circle();
    let st = unsafe { sgiga_solve(exp, SgigaMethod::Iga, 5, ptr::null(), ptr::null_mut()) };
    assert_eq!(st, SgigaStatus::NullPointer);
    unsafe {
        sgiga_experiment_free(exp);
        sgiga_experiment_free(ptr::null_mut());
    }
}

#[test]
fn invalid_arguments_carry_a_message() {
    let mut exp = ptr::null_mut();
    let st = unsafe { sgiga_experiment_new(SgigaExample::Line, -1.0, 1.0, &mut exp) };
    assert_eq!(st, SgigaStatus::InvalidArgument);
    assert!(exp.is_null());
    assert!(last_error().contains("positive"));

    let st = unsafe { sgiga_experiment_new(SgigaExample::Circle, 1.0, 1.0, &mut exp) };
    assert_eq!(st, SgigaStatus::InvalidArgument);

    let exp = circle();
    let mut res = SgigaResult::default();
    let bad = SgigaOptions {
        gauss: 0,
        ..sgiga_default_options()
    };
    let st = unsafe { sgiga_solve(exp, SgigaMethod::Iga, 5, &bad, &mut res) };
    assert_eq!(st, SgigaStatus::InvalidArgument);
    unsafe { sgiga_experiment_free(exp) };
}

#[test]
fn error_message_truncates_safely() {
    let st = unsafe { sgiga_experiment_new(SgigaExample::Line, f64::NAN, 1.0, ptr::null_mut()) };
    assert_eq!(st, SgigaStatus::NullPointer);
    let mut small = [1 as c_char; 4];
    let full = unsafe { sgiga_last_error_message(small.as_mut_ptr(), small.len()) };
    assert!(full > 3);
    assert_eq!(small[3], 0);
    assert_eq!(unsafe { sgiga_last_error_message(ptr::null_mut(), 0) }, full);
}

#[test]
fn robustness_handle_and_version() {
    let mut exp = ptr::null_mut();
    let st = unsafe { sgiga_robustness_new(10.0, 1.0, 1e-3, &mut exp) };
    assert_eq!(st, SgigaStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { sgiga_dof_count(exp, SgigaMethod::Iga, 20, &mut n) }, SgigaStatus::Ok);
    assert_eq!(n, 22 * 22);
    unsafe { sgiga_experiment_free(exp) };
    let v = unsafe { CStr::from_ptr(sgiga_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
