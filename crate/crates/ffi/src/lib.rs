//! C ABI for cube-witness.
//!
//! Every fallible call returns a [`CwStatus`]. On failure the message is kept
//! per thread and can be read with [`cw_last_error_message`]. Strings handed
//! out by the library are released with [`cw_string_free`]; witness handles
//! with [`cw_witness_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use clap::Parser;
use cube_witness::cli::{dispatch, render, Cli, Command, ExperimentConfig, Mode};
use cube_witness::cube::{majority_levels, NoiseParam};
use cube_witness::error::Error;
use cube_witness::exact::{format_rational, parse_rational, Q};
use cube_witness::l1lp::l1_distance;
use cube_witness::planted::{full_mask, pairwise_chi, Direction};
use cube_witness::scalar::ratio_to_f64;
use cube_witness::witness::{build_witness, correlation_kappa, WitnessLevels, WitnessSpec};

/// Result of a library call. Values 1 to 4 match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CwStatus {
    Ok = 0,
    /// The report was produced but at least one of its checks failed.
    CheckFailed = 1,
    /// Argument outside the mathematical domain, or malformed input.
    Domain = 2,
    Inconsistency = 3,
    /// A budget ran out or a quadrature did not converge.
    Budget = 4,
    NullArgument = 10,
    InvalidUtf8 = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// Exact witness for one (n, m); opaque to C.
pub struct CwWitness {
    inner: WitnessLevels,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: CwStatus, msg: impl Into<String>) -> CwStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> CwStatus {
    let status = match e.exit_code() {
        3 => CwStatus::Inconsistency,
        4 => CwStatus::Budget,
        _ => CwStatus::Domain,
    };
    fail(status, e.to_string())
}

/// Runs `body`, turning panics into [`CwStatus::Panic`].
fn guarded(body: impl FnOnce() -> CwStatus) -> CwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CwStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, CwStatus> {
    if p.is_null() {
        return Err(fail(CwStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CwStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn read_rho(p: *const c_char) -> Result<NoiseParam, CwStatus> {
    let text = read_str(p, "rho")?;
    parse_rational(text)
        .and_then(NoiseParam::from_rho)
        .map_err(|e| from_error(&e))
}

fn witness_ref<'a>(w: *const CwWitness) -> Result<&'a CwWitness, CwStatus> {
    // SAFETY: callers pass either null or a handle from cw_witness_new.
    unsafe { w.as_ref() }.ok_or_else(|| fail(CwStatus::NullArgument, "witness handle is null"))
}

fn out_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! need {
    ($p:expr, $name:literal) => {
        if $p.is_null() {
            return fail(CwStatus::NullArgument, concat!($name, " is null"));
        }
    };
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the normalized witness for odd `n` and degree `m`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cw_witness_new(n: usize, m: usize, out: *mut *mut CwWitness) -> CwStatus {
    need!(out, "out");
    *out = ptr::null_mut();
    guarded(|| match WitnessSpec::new(n, m).and_then(build_witness) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(CwWitness { inner }));
            CwStatus::Ok
        }
        Err(e) => from_error(&e),
    })
}

/// Releases a witness handle. Null is ignored.
///
/// # Safety
/// `w` must come from [`cw_witness_new`] and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cw_witness_free(w: *mut CwWitness) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Dimension n of the witness, or 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cw_witness_dimension(w: *const CwWitness) -> usize {
    w.as_ref().map_or(0, |w| w.inner.spec.n)
}

/// Writes psi at Hamming weights 0..=n into `out`, which must hold n + 1
/// values.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cw_witness_profile(w: *const CwWitness, out: *mut f64, len: usize) -> CwStatus {
    let w = try_status!(witness_ref(w));
    need!(out, "out");
    let n = w.inner.spec.n;
    if len < n + 1 {
        return fail(
            CwStatus::BufferTooSmall,
            format!("profile needs {} values, buffer holds {len}", n + 1),
        );
    }
    guarded(|| {
        let values = w.inner.psi_values();
        let dst = std::slice::from_raw_parts_mut(out, n + 1);
        for (d, v) in dst.iter_mut().zip(&values) {
            *d = ratio_to_f64(v);
        }
        CwStatus::Ok
    })
}

/// Sup norm of the unnormalized witness.
///
/// # Safety
/// `out` must be a valid pointer to one double.
#[no_mangle]
pub unsafe extern "C" fn cw_witness_sup_norm(w: *const CwWitness, out: *mut f64) -> CwStatus {
    let w = try_status!(witness_ref(w));
    need!(out, "out");
    *out = w.inner.sup_norm_f64();
    CwStatus::Ok
}

/// Correlation of the witness with majority smoothed at noise rate `rho`
/// (a decimal or p/q string). Writes the value as a double and, when
/// `out_exact` is not null, as an exact rational string to free with
/// [`cw_string_free`].
///
/// # Safety
/// `rho` must be a NUL-terminated string; `out` a valid pointer;
/// `out_exact` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_witness_kappa(
    w: *const CwWitness,
    rho: *const c_char,
    out: *mut f64,
    out_exact: *mut *mut c_char,
) -> CwStatus {
    let w = try_status!(witness_ref(w));
    need!(out, "out");
    let noise = try_status!(read_rho(rho));
    guarded(|| match correlation_kappa(&noise, &w.inner) {
        Ok(k) => {
            *out = ratio_to_f64(&k.value);
            if !out_exact.is_null() {
                *out_exact = out_string(format_rational(&k.value));
            }
            CwStatus::Ok
        }
        Err(e) => from_error(&e),
    })
}

/// Correlation between the planted laws of directions `a` and `b`, given as
/// bit masks (bit i set means coordinate i is -1).
///
/// # Safety
/// `out` must be a valid pointer to one double.
#[no_mangle]
pub unsafe extern "C" fn cw_pairwise_chi(w: *const CwWitness, a: u64, b: u64, out: *mut f64) -> CwStatus {
    let w = try_status!(witness_ref(w));
    need!(out, "out");
    let n = w.inner.spec.n;
    if (a | b) & !full_mask(n) != 0 {
        return fail(CwStatus::Domain, format!("direction mask has bits beyond n={n}"));
    }
    guarded(|| {
        let res = Direction::new(n, a)
            .and_then(|u| Direction::new(n, b).map(|v| (u, v)))
            .and_then(|(u, v)| pairwise_chi(&u, &v, &w.inner));
        match res {
            Ok(c) => {
                *out = ratio_to_f64(&c);
                CwStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Exact optimum of min over symmetric degree-m p of ||T_rho Maj_n - p||_1.
///
/// # Safety
/// `rho` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_l1_distance(n: usize, m: usize, rho: *const c_char, out: *mut f64) -> CwStatus {
    need!(out, "out");
    let noise = try_status!(read_rho(rho));
    guarded(|| {
        let res = majority_levels::<Q>(n).and_then(|maj| l1_distance(&maj.noise_apply(&noise.rho), m));
        match res {
            Ok(lp) => {
                *out = ratio_to_f64(&lp.optimum);
                CwStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Runs one CLI command given its arguments (without the program name,
/// e.g. {"witness", "--n", "11", "--m", "2"}) and returns the JSON report
/// through `out_report`. Returns [`CwStatus::CheckFailed`] with a report
/// when a check fails. Sweeps and the output flag are not available here.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings; `out_report` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_run(argc: c_int, argv: *const *const c_char, out_report: *mut *mut c_char) -> CwStatus {
    need!(out_report, "out_report");
    *out_report = ptr::null_mut();
    if argc < 0 || (argc > 0 && argv.is_null()) {
        return fail(CwStatus::NullArgument, "argv is null");
    }
    let mut args = vec!["cube-witness".to_string()];
    for i in 0..argc as usize {
        args.push(try_status!(read_str(*argv.add(i), "argument")).to_string());
    }
    guarded(|| {
        let cli = match Cli::try_parse_from(&args) {
            Ok(c) => c,
            Err(e) => return fail(CwStatus::Domain, e.to_string()),
        };
        if matches!(cli.command, Command::Sweep(_)) || cli.output.is_some() {
            return fail(
                CwStatus::Domain,
                "sweep and --output are only available from the command line",
            );
        }
        let mode = match Mode::resolve(cli.mode) {
            Ok(m) => m,
            Err(e) => return from_error(&e),
        };
        let report = dispatch(&ExperimentConfig {
            mode,
            command: cli.command,
        });
        match report.and_then(|r| render(&r).map(|s| (r.passed(), s))) {
            Ok((passed, text)) => {
                *out_report = out_string(text);
                if passed {
                    CwStatus::Ok
                } else {
                    CwStatus::CheckFailed
                }
            }
            Err(e) => from_error(&e),
        }
    })
}
