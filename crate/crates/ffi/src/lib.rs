//! C bindings for the core library: opaque handles over joint
//! distributions and solved pair systems, flat status codes, and a
//! thread-local error message.
//!
//! Conventions:
//!
//! * every fallible call returns an [`MhtStatus`] and writes its results
//!   through out-pointers, which are left untouched on failure;
//! * handles returned through out-pointers are owned by the caller and
//!   must be released with the matching `_free` function; `_free` accepts
//!   NULL;
//! * [`mht_last_error`] describes the most recent failure on the calling
//!   thread; the pointer stays valid until the next failing call on the
//!   same thread;
//! * passing NULL where a handle or out-pointer is expected yields
//!   `NullPointer`; non-NULL pointers must honor the safety contract of
//!   each function, as they must over any C boundary.
//!
//! The generated header lives at `include/mhtest.h` and is refreshed on
//! every build.

#![deny(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::catch_unwind;
use std::slice;

use mhtest_core::asymptotics::second_order_stats;
use mhtest_core::dist::kl_divergence;
use mhtest_core::error::Error;
use mhtest_core::exact::{hoeffding_rates, np_rates, MarginalPairTable};
use mhtest_core::geometry::projected_relative_entropy;
use mhtest_core::solver::{lambda_interval, solve_for_rate, solve_lambda_grid, LambdaSolution};
use mhtest_core::JointDistribution;

/// Flat result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MhtStatus {
    /// The call succeeded and all out-parameters are set.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Malformed input: bad probabilities, shapes, or documents.
    InvalidArgument = 2,
    /// A parameter lies outside its mathematically valid range.
    OutOfRange = 3,
    /// An iterative routine failed to converge or found no solution.
    SolverFailed = 4,
    /// The requested exact enumeration exceeds the supplied cap.
    CapExceeded = 5,
    /// An internal invariant was violated; the library state is still
    /// sound but the call produced nothing.
    Panic = 6,
}

/// A positive joint distribution on a finite product alphabet.
pub struct MhtDist(JointDistribution);

/// A solved gap system for a fixed base pair: the two aligned members,
/// the additive statistic, and everything needed to price error rates.
pub struct MhtSolution {
    sol: LambdaSolution,
    p: JointDistribution,
    q: JointDistribution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn fail(e: Error) -> MhtStatus {
    let status = match e {
        Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::Io(_) | Error::Parse(_) => {
            MhtStatus::InvalidArgument
        }
        Error::OutOfRange(_) => MhtStatus::OutOfRange,
        Error::NoConvergence { .. } | Error::SolverFailed(_) | Error::Degenerate(_) => {
            MhtStatus::SolverFailed
        }
        Error::CapExceeded { .. } => MhtStatus::CapExceeded,
    };
    set_error(&e.to_string());
    status
}

fn null_fail() -> MhtStatus {
    set_error("NULL passed where a handle or out-pointer is required");
    MhtStatus::NullPointer
}

/// Runs a fallible body under a panic guard and hands the value to `sink`.
fn complete<T>(
    body: impl FnOnce() -> Result<T, Error> + std::panic::UnwindSafe,
    sink: impl FnOnce(T),
) -> MhtStatus {
    match catch_unwind(body) {
        Ok(Ok(v)) => {
            sink(v);
            MhtStatus::Ok
        }
        Ok(Err(e)) => fail(e),
        Err(_) => {
            set_error("internal panic");
            MhtStatus::Panic
        }
    }
}

/// Version string of the library, static storage.
#[no_mangle]
pub extern "C" fn mht_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread, empty when
/// nothing failed yet. Valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn mht_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a distribution from `x_size * y_size` row-major cell masses.
/// Cells must be strictly positive and sum to 1 within 1e-9.
///
/// # Safety
/// `cells` must point to `x_size * y_size` readable doubles and `out` to a
/// writable handle slot, or be NULL (rejected cleanly).
#[no_mangle]
pub unsafe extern "C" fn mht_dist_new(
    x_size: usize,
    y_size: usize,
    cells: *const f64,
    out: *mut *mut MhtDist,
) -> MhtStatus {
    if cells.is_null() || out.is_null() {
        return null_fail();
    }
    let raw = unsafe { slice::from_raw_parts(cells, x_size.saturating_mul(y_size)) }.to_vec();
    complete(
        move || JointDistribution::from_flat(x_size, y_size, raw),
        |d| unsafe { *out = Box::into_raw(Box::new(MhtDist(d))) },
    )
}

/// Builds a distribution from a JSON document with fields `x_size`,
/// `y_size`, and `p` (array of rows).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable handle
/// slot, or NULL (rejected cleanly).
#[no_mangle]
pub unsafe extern "C" fn mht_dist_from_json(
    json: *const c_char,
    out: *mut *mut MhtDist,
) -> MhtStatus {
    if json.is_null() || out.is_null() {
        return null_fail();
    }
    let text = match unsafe { CStr::from_ptr(json) }.to_str() {
        Ok(t) => t.to_owned(),
        Err(_) => return fail(Error::Parse("document is not valid UTF-8".into())),
    };
    complete(
        move || JointDistribution::from_json_str(&text),
        |d| unsafe { *out = Box::into_raw(Box::new(MhtDist(d))) },
    )
}

/// Releases a distribution handle. NULL is accepted and ignored.
///
/// # Safety
/// `d` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mht_dist_free(d: *mut MhtDist) {
    if !d.is_null() {
        drop(unsafe { Box::from_raw(d) });
    }
}

/// First-alphabet size, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mht_dist_x_size(d: *const MhtDist) -> usize {
    unsafe { d.as_ref() }.map_or(0, |h| h.0.x_size())
}

/// Second-alphabet size, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mht_dist_y_size(d: *const MhtDist) -> usize {
    unsafe { d.as_ref() }.map_or(0, |h| h.0.y_size())
}

/// Copies the row-major cell masses into `buf`, which must hold at least
/// `len >= x_size * y_size` entries.
///
/// # Safety
/// `d` must be NULL or a live handle; `buf` must be NULL or writable for
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mht_dist_cells(d: *const MhtDist, buf: *mut f64, len: usize) -> MhtStatus {
    let Some(h) = (unsafe { d.as_ref() }) else {
        return null_fail();
    };
    if buf.is_null() {
        return null_fail();
    }
    let cells = h.0.cells();
    if len < cells.len() {
        return fail(Error::InvalidInput(format!(
            "buffer holds {len} entries, need {}",
            cells.len()
        )));
    }
    unsafe { slice::from_raw_parts_mut(buf, cells.len()) }.copy_from_slice(cells);
    MhtStatus::Ok
}

/// Projected relative entropy E(p || q): the minimum divergence against
/// `q` over distributions sharing `p`'s marginals.
///
/// # Safety
/// Handles must be NULL or live; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mht_projected_divergence(
    p: *const MhtDist,
    q: *const MhtDist,
    out: *mut f64,
) -> MhtStatus {
    let (Some(hp), Some(hq)) = (unsafe { p.as_ref() }, unsafe { q.as_ref() }) else {
        return null_fail();
    };
    if out.is_null() {
        return null_fail();
    }
    complete(
        || projected_relative_entropy(&hp.0, &hq.0),
        |v| unsafe { *out = v },
    )
}

/// Closed admissible interval of the gap parameter,
/// [-E(q || p), E(p || q)].
///
/// # Safety
/// Handles must be NULL or live; out-pointers must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mht_admissible_interval(
    p: *const MhtDist,
    q: *const MhtDist,
    out_low: *mut f64,
    out_high: *mut f64,
) -> MhtStatus {
    let (Some(hp), Some(hq)) = (unsafe { p.as_ref() }, unsafe { q.as_ref() }) else {
        return null_fail();
    };
    if out_low.is_null() || out_high.is_null() {
        return null_fail();
    }
    complete(
        || lambda_interval(&hp.0, &hq.0),
        |(lo, hi)| unsafe {
            *out_low = lo;
            *out_high = hi;
        },
    )
}

/// Solves the gap system at `lambda`, which must lie in the closed
/// admissible interval; values at the ends resolve to the endpoint
/// solutions. `tol` is the solver's residual target (1e-11 is a good
/// default).
///
/// # Safety
/// Handles must be NULL or live; `out` must be NULL or a writable handle
/// slot.
#[no_mangle]
pub unsafe extern "C" fn mht_solve_pair(
    p: *const MhtDist,
    q: *const MhtDist,
    lambda: f64,
    tol: f64,
    out: *mut *mut MhtSolution,
) -> MhtStatus {
    let (Some(hp), Some(hq)) = (unsafe { p.as_ref() }, unsafe { q.as_ref() }) else {
        return null_fail();
    };
    if out.is_null() {
        return null_fail();
    }
    complete(
        || {
            let sol = solve_lambda_grid(&hp.0, &hq.0, &[lambda], tol)?
                .pop()
                .expect("one grid point yields one solution");
            Ok(MhtSolution {
                sol,
                p: hp.0.clone(),
                q: hq.0.clone(),
            })
        },
        |s| unsafe { *out = Box::into_raw(Box::new(s)) },
    )
}

/// Solves for the gap whose type-I exponent equals `r`,
/// with `r` in [0, E(q || p)].
///
/// # Safety
/// Handles must be NULL or live; `out` must be NULL or a writable handle
/// slot.
#[no_mangle]
pub unsafe extern "C" fn mht_solve_for_rate(
    p: *const MhtDist,
    q: *const MhtDist,
    r: f64,
    tol: f64,
    out: *mut *mut MhtSolution,
) -> MhtStatus {
    let (Some(hp), Some(hq)) = (unsafe { p.as_ref() }, unsafe { q.as_ref() }) else {
        return null_fail();
    };
    if out.is_null() {
        return null_fail();
    }
    complete(
        || {
            let sol = solve_for_rate(&hp.0, &hq.0, r, tol)?;
            Ok(MhtSolution {
                sol,
                p: hp.0.clone(),
                q: hq.0.clone(),
            })
        },
        |s| unsafe { *out = Box::into_raw(Box::new(s)) },
    )
}

/// Releases a solution handle. NULL is accepted and ignored.
///
/// # Safety
/// `s` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mht_solution_free(s: *mut MhtSolution) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Gap value of the solution, or NaN for NULL.
///
/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mht_solution_lambda(s: *const MhtSolution) -> f64 {
    unsafe { s.as_ref() }.map_or(f64::NAN, |h| h.sol.lambda)
}

/// Alignment slope `a` (0 at the upper endpoint, +inf at the lower one),
/// or NaN for NULL.
///
/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mht_solution_slope(s: *const MhtSolution) -> f64 {
    unsafe { s.as_ref() }.map_or(f64::NAN, |h| h.sol.a)
}

/// Alignment offset `b`, or NaN for NULL.
///
/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mht_solution_offset(s: *const MhtSolution) -> f64 {
    unsafe { s.as_ref() }.map_or(f64::NAN, |h| h.sol.b)
}

/// Large-deviation exponents of the two error probabilities at the
/// canonical threshold: D(p_member || p) and D(q_member || q).
///
/// # Safety
/// `s` must be NULL or a live handle; out-pointers must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mht_solution_exponents(
    s: *const MhtSolution,
    out_type1: *mut f64,
    out_type2: *mut f64,
) -> MhtStatus {
    let Some(h) = (unsafe { s.as_ref() }) else {
        return null_fail();
    };
    if out_type1.is_null() || out_type2.is_null() {
        return null_fail();
    }
    complete(
        || {
            let e1 = kl_divergence(&h.sol.p_lambda, &h.p)?;
            let e2 = kl_divergence(&h.sol.q_lambda, &h.q)?;
            Ok((e1, e2))
        },
        |(e1, e2)| unsafe {
            *out_type1 = e1;
            *out_type2 = e2;
        },
    )
}

/// Evaluates the per-letter additive statistic on a pair of marginal
/// types, given as frequency vectors of the two alphabets.
///
/// # Safety
/// `s` must be NULL or a live handle; `tx` and `ty` must point to
/// `tx_len` and `ty_len` readable doubles; `out` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mht_solution_statistic(
    s: *const MhtSolution,
    tx: *const f64,
    tx_len: usize,
    ty: *const f64,
    ty_len: usize,
    out: *mut f64,
) -> MhtStatus {
    let Some(h) = (unsafe { s.as_ref() }) else {
        return null_fail();
    };
    if tx.is_null() || ty.is_null() || out.is_null() {
        return null_fail();
    }
    if tx_len != h.sol.llr.x_size() || ty_len != h.sol.llr.y_size() {
        return fail(Error::DimensionMismatch(format!(
            "type lengths ({tx_len}, {ty_len}) vs alphabet sizes ({}, {})",
            h.sol.llr.x_size(),
            h.sol.llr.y_size()
        )));
    }
    let vx = unsafe { slice::from_raw_parts(tx, tx_len) };
    let vy = unsafe { slice::from_raw_parts(ty, ty_len) };
    unsafe { *out = h.sol.llr.statistic(vx, vy) };
    MhtStatus::Ok
}

/// Exact error probabilities of the threshold rule on the solution's
/// statistic at blocklength `n`: accept the null when the statistic
/// exceeds `tau`. `cap` bounds the joint-type enumeration; the optional
/// log out-pointers (NULL allowed) receive natural-log rates, with
/// -inf for an exactly zero probability.
///
/// # Safety
/// `s` must be NULL or a live handle; `out_alpha` and `out_beta` must be
/// NULL or writable; the log out-pointers may be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mht_solution_exact_rates(
    s: *const MhtSolution,
    tau: f64,
    n: u64,
    cap: u64,
    out_alpha: *mut f64,
    out_beta: *mut f64,
    out_log_alpha: *mut f64,
    out_log_beta: *mut f64,
) -> MhtStatus {
    let Some(h) = (unsafe { s.as_ref() }) else {
        return null_fail();
    };
    if out_alpha.is_null() || out_beta.is_null() {
        return null_fail();
    }
    complete(
        || {
            let table = MarginalPairTable::build(&h.p, &h.q, n, cap)?;
            Ok(np_rates(&table, &h.sol.llr, tau))
        },
        |r| unsafe {
            *out_alpha = r.alpha;
            *out_beta = r.beta;
            if !out_log_alpha.is_null() {
                *out_log_alpha = r.log_alpha.unwrap_or(f64::NEG_INFINITY);
            }
            if !out_log_beta.is_null() {
                *out_log_beta = r.log_beta.unwrap_or(f64::NEG_INFINITY);
            }
        },
    )
}

/// Exact error probabilities of the divergence-ball rule with radius `r`
/// at blocklength `n`: accept the null when the observed marginal pair
/// can be coupled within projected divergence `r` of `p`. Log
/// out-pointers as in `mht_solution_exact_rates`.
///
/// # Safety
/// Handles must be NULL or live; `out_alpha` and `out_beta` must be NULL
/// or writable; the log out-pointers may be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mht_hoeffding_exact_rates(
    p: *const MhtDist,
    q: *const MhtDist,
    r: f64,
    n: u64,
    cap: u64,
    out_alpha: *mut f64,
    out_beta: *mut f64,
    out_log_alpha: *mut f64,
    out_log_beta: *mut f64,
) -> MhtStatus {
    let (Some(hp), Some(hq)) = (unsafe { p.as_ref() }, unsafe { q.as_ref() }) else {
        return null_fail();
    };
    if out_alpha.is_null() || out_beta.is_null() {
        return null_fail();
    }
    if !(r.is_finite() && r >= 0.0) {
        return fail(Error::InvalidInput("radius must be finite and >= 0".into()));
    }
    complete(
        || {
            let table = MarginalPairTable::build(&hp.0, &hq.0, n, cap)?;
            hoeffding_rates(&table, &hp.0, r)
        },
        |rates| unsafe {
            *out_alpha = rates.alpha;
            *out_beta = rates.beta;
            if !out_log_alpha.is_null() {
                *out_log_alpha = rates.log_alpha.unwrap_or(f64::NEG_INFINITY);
            }
            if !out_log_beta.is_null() {
                *out_log_beta = rates.log_beta.unwrap_or(f64::NEG_INFINITY);
            }
        },
    )
}

/// First three moments (mean, variance, third absolute central moment)
/// of the per-letter information density of the upper-endpoint statistic
/// under the null; the inputs of normal-approximation analysis.
///
/// # Safety
/// Handles must be NULL or live; out-pointers must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mht_second_order(
    p: *const MhtDist,
    q: *const MhtDist,
    out_e: *mut f64,
    out_v: *mut f64,
    out_t3: *mut f64,
) -> MhtStatus {
    let (Some(hp), Some(hq)) = (unsafe { p.as_ref() }, unsafe { q.as_ref() }) else {
        return null_fail();
    };
    if out_e.is_null() || out_v.is_null() || out_t3.is_null() {
        return null_fail();
    }
    complete(
        || second_order_stats(&hp.0, &hq.0),
        |st| unsafe {
            *out_e = st.e;
            *out_v = st.v;
            *out_t3 = st.t3;
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_mapping_partitions_the_variants() {
        assert_eq!(fail(Error::Parse("x".into())), MhtStatus::InvalidArgument);
        assert_eq!(fail(Error::OutOfRange("x".into())), MhtStatus::OutOfRange);
        assert_eq!(
            fail(Error::CapExceeded { needed: 2, cap: 1 }),
            MhtStatus::CapExceeded
        );
        assert_eq!(
            fail(Error::NoConvergence {
                iterations: 1,
                residual: 1.0
            }),
            MhtStatus::SolverFailed
        );
    }

    #[test]
    fn last_error_reflects_most_recent_failure() {
        set_error("first");
        set_error("second\0with nul");
        let msg = unsafe { CStr::from_ptr(mht_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "second with nul");
    }

    #[test]
    fn version_is_a_static_c_string() {
        let v = unsafe { CStr::from_ptr(mht_version()) };
        assert!(v.to_str().unwrap().starts_with("0."));
    }
}
