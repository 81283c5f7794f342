//! C ABI over the `sgiga` solvers.
//!
//! Every entry point returns an [`SgigaStatus`]; on failure the message is
//! kept per thread and can be fetched with [`sgiga_last_error_message`].
//! Panics are caught at the boundary and reported as [`SgigaStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sgiga::enrichment::{Method, MethodVariant};
use sgiga::experiments::{
    define_experiment, define_robustness, dof_count, run_cell, Experiment, ExperimentKind,
    RunSettings,
};
use sgiga::quadrature::QuadSettings;
use sgiga::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgigaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    Panic = 4,
}

/// Manufactured benchmark problems.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgigaExample {
    Line = 0,
    Circle = 1,
    Arc = 2,
}

/// Discretization methods.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgigaMethod {
    Iga = 0,
    Giga = 1,
    Sgiga = 2,
    CorrectedGiga = 3,
    SgigaMulti = 4,
    GigaStar = 5,
    Sgiga2 = 6,
}

impl From<SgigaMethod> for Method {
    fn from(m: SgigaMethod) -> Self {
        match m {
            SgigaMethod::Iga => Method::Iga,
            SgigaMethod::Giga => Method::Giga,
            SgigaMethod::Sgiga => Method::Sgiga,
            SgigaMethod::CorrectedGiga => Method::CorrectedGiga,
            SgigaMethod::SgigaMulti => Method::SgigaMulti,
            SgigaMethod::GigaStar => Method::GigaStar,
            SgigaMethod::Sgiga2 => Method::Sgiga2,
        }
    }
}

/// Which enriched methods get the projection and orthogonalization.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgigaStabilization {
    /// GIGA* and SGIGA2 only.
    Default = 0,
    /// Every enriched method.
    All = 1,
    /// None.
    Off = 2,
}

/// Solver options for [`sgiga_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgigaOptions {
    /// Quadtree depth inside cut elements.
    pub quad_depth: u32,
    /// Gauss points per direction.
    pub gauss: u32,
    /// Compute the scaled condition number (expensive on fine meshes).
    pub compute_scn: bool,
    /// Which methods get the projection and orthogonalization.
    pub stabilization: SgigaStabilization,
}

/// Outcome of one solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SgigaResult {
    pub dofs: usize,
    pub dropped: usize,
    pub h: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    /// NaN when not requested.
    pub scn: f64,
    pub residual: f64,
}

/// Opaque experiment handle.
pub struct SgigaExperiment {
    inner: Experiment,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> SgigaStatus {
    match err {
        Error::InvalidArgument(_)
        | Error::InvalidKnots(_)
        | Error::OutOfDomain { .. }
        | Error::IndexOutOfRange { .. }
        | Error::UnsupportedDegree(_)
        | Error::GridMismatch(_)
        | Error::UnresolvedInterface { .. } => SgigaStatus::InvalidArgument,
        _ => SgigaStatus::NumericalFailure,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SgigaStatus, String)>) -> SgigaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgigaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SgigaStatus::Panic
        }
    }
}

fn lift<T>(r: sgiga::Result<T>) -> Result<T, (SgigaStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SgigaStatus, String) {
    (SgigaStatus::NullPointer, format!("{what} is null"))
}

/// Default options: depth 5, 3 Gauss points, SCN on, default stabilization.
#[no_mangle]
pub extern "C" fn sgiga_default_options() -> SgigaOptions {
    let q = QuadSettings::default();
    SgigaOptions {
        quad_depth: q.depth as u32,
        gauss: q.gauss as u32,
        compute_scn: true,
        stabilization: SgigaStabilization::Default,
    }
}

/// Create one of the benchmark experiments with coefficients `a0`, `a1`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sgiga_experiment_new(
    example: SgigaExample,
    a0: f64,
    a1: f64,
    out: *mut *mut SgigaExperiment,
) -> SgigaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match example {
            SgigaExample::Line => ExperimentKind::Line,
            SgigaExample::Circle => ExperimentKind::Circle,
            SgigaExample::Arc => ExperimentKind::Arc,
        };
        let inner = lift(define_experiment(kind, a0, a1))?;
        *out = Box::into_raw(Box::new(SgigaExperiment { inner }));
        Ok(())
    })
}

/// Create the robustness experiment with a straight interface at offset `delta`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sgiga_robustness_new(
    a0: f64,
    a1: f64,
    delta: f64,
    out: *mut *mut SgigaExperiment,
) -> SgigaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lift(define_robustness(a0, a1, delta))?;
        *out = Box::into_raw(Box::new(SgigaExperiment { inner }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `exp` must be null or a handle returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sgiga_experiment_free(exp: *mut SgigaExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Number of unknowns of `method` on an `n × n` mesh, without solving.
///
/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgiga_dof_count(
    exp: *const SgigaExperiment,
    method: SgigaMethod,
    n: usize,
    out: *mut usize,
) -> SgigaStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("exp"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(dof_count(&exp.inner, method.into(), n))?;
        Ok(())
    })
}

/// Solve on an `n × n` mesh and measure errors against the exact solution.
///
/// # Safety
/// `exp` must be a live handle, `options` null (defaults) or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sgiga_solve(
    exp: *const SgigaExperiment,
    method: SgigaMethod,
    n: usize,
    options: *const SgigaOptions,
    out: *mut SgigaResult,
) -> SgigaStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("exp"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| sgiga_default_options());
        if opts.gauss == 0 {
            return Err((SgigaStatus::InvalidArgument, "gauss must be positive".into()));
        }
        let settings = RunSettings {
            quad: QuadSettings {
                depth: opts.quad_depth as usize,
                gauss: opts.gauss as usize,
            },
            compute_scn: opts.compute_scn,
            ..RunSettings::default()
        };
        let method: Method = method.into();
        let variant = match opts.stabilization {
            SgigaStabilization::Default => MethodVariant::new(method),
            SgigaStabilization::All if method != Method::Iga => {
                MethodVariant::new(method).with_stabilization(true, true)
            }
            SgigaStabilization::All => MethodVariant::new(method),
            SgigaStabilization::Off => MethodVariant::new(method).with_stabilization(false, false),
        };
        let cell = lift(run_cell(&exp.inner, variant, n, &settings))?;
        let errors = cell.errors.ok_or_else(|| {
            (SgigaStatus::NumericalFailure, "error norms unavailable".to_string())
        })?;
        *out = SgigaResult {
            dofs: cell.dofs,
            dropped: cell.dropped,
            h: 1.0 / n as f64,
            l2_error: errors.l2,
            h1_error: errors.h1,
            scn: cell.scn.unwrap_or(f64::NAN),
            residual: cell.residual,
        };
        Ok(())
    })
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, 0 if none.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sgiga_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sgiga_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
