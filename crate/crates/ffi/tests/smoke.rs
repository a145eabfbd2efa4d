//! End-to-end exercise of the C surface from Rust: handle lifecycle,
//! happy-path numerics against known values, and every failure class.
//! All pointers passed below are valid, which is exactly the safety
//! contract the `unsafe` blocks assert.

use std::ffi::CStr;
use std::ptr;

use mhtest_ffi::*;

const P_CELLS: [f64; 4] = [0.5, 0.125, 0.125, 0.25];
const Q_CELLS: [f64; 4] = [0.125, 0.25, 0.5, 0.125];
const E_STAR: f64 = 0.161819257283855;

fn make(cells: &[f64; 4]) -> *mut MhtDist {
    let mut d: *mut MhtDist = ptr::null_mut();
    let st = unsafe { mht_dist_new(2, 2, cells.as_ptr(), &mut d) };
    assert_eq!(st, MhtStatus::Ok);
    assert!(!d.is_null());
    d
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mht_last_error()) }
        .to_str()
        .unwrap()
        .to_owned()
}

#[test]
fn distribution_roundtrip_and_getters() {
    unsafe {
        let d = make(&P_CELLS);
        assert_eq!(mht_dist_x_size(d), 2);
        assert_eq!(mht_dist_y_size(d), 2);
        let mut buf = [0.0f64; 4];
        assert_eq!(mht_dist_cells(d, buf.as_mut_ptr(), 4), MhtStatus::Ok);
        assert_eq!(buf, P_CELLS);
        let mut short = [0.0f64; 2];
        assert_eq!(
            mht_dist_cells(d, short.as_mut_ptr(), 2),
            MhtStatus::InvalidArgument
        );
        assert!(last_error().contains("need 4"));
        mht_dist_free(d);
        mht_dist_free(ptr::null_mut());
    }
}

#[test]
fn json_constructor_accepts_the_document_format() {
    unsafe {
        let doc = b"{\"x_size\":2,\"y_size\":2,\"p\":[[0.5,0.125],[0.125,0.25]]}\0";
        let mut d: *mut MhtDist = ptr::null_mut();
        assert_eq!(
            mht_dist_from_json(doc.as_ptr() as *const _, &mut d),
            MhtStatus::Ok
        );
        assert_eq!(mht_dist_x_size(d), 2);
        mht_dist_free(d);

        let bad = b"{\"x_size\":2\0";
        let mut e: *mut MhtDist = ptr::null_mut();
        assert_eq!(
            mht_dist_from_json(bad.as_ptr() as *const _, &mut e),
            MhtStatus::InvalidArgument
        );
        assert!(e.is_null());
    }
}

#[test]
fn invalid_cells_are_rejected_with_a_message() {
    unsafe {
        let cells = [0.5, -0.125, 0.375, 0.25];
        let mut d: *mut MhtDist = ptr::null_mut();
        assert_eq!(
            mht_dist_new(2, 2, cells.as_ptr(), &mut d),
            MhtStatus::InvalidArgument
        );
        assert!(d.is_null());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn null_arguments_never_crash() {
    unsafe {
        let mut out = 0.0f64;
        assert_eq!(
            mht_projected_divergence(ptr::null(), ptr::null(), &mut out),
            MhtStatus::NullPointer
        );
        let d = make(&P_CELLS);
        assert_eq!(
            mht_projected_divergence(d, ptr::null(), &mut out),
            MhtStatus::NullPointer
        );
        assert_eq!(mht_dist_x_size(ptr::null()), 0);
        assert!(mht_solution_lambda(ptr::null()).is_nan());
        mht_solution_free(ptr::null_mut());
        mht_dist_free(d);
    }
}

#[test]
fn projected_divergence_matches_reference_value() {
    unsafe {
        let p = make(&P_CELLS);
        let q = make(&Q_CELLS);
        let mut e = 0.0f64;
        assert_eq!(mht_projected_divergence(p, q, &mut e), MhtStatus::Ok);
        assert!((e - E_STAR).abs() < 1e-9, "E = {e}");
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        assert_eq!(
            mht_admissible_interval(p, q, &mut lo, &mut hi),
            MhtStatus::Ok
        );
        assert!((hi - E_STAR).abs() < 1e-9 && (lo + E_STAR).abs() < 1e-9);
        mht_dist_free(p);
        mht_dist_free(q);
    }
}

#[test]
fn solved_pair_reproduces_known_geometry() {
    unsafe {
        let p = make(&P_CELLS);
        let q = make(&Q_CELLS);
        let mut s: *mut MhtSolution = ptr::null_mut();
        assert_eq!(mht_solve_pair(p, q, 0.0, 1e-11, &mut s), MhtStatus::Ok);
        assert!((mht_solution_lambda(s)).abs() < 1e-12);
        // this symmetric pair has slope -1 and offset ln(16/15) at gap zero
        assert!((mht_solution_slope(s) + 1.0).abs() < 1e-8);
        assert!((mht_solution_offset(s) - (16.0f64 / 15.0).ln()).abs() < 1e-8);

        let (mut e1, mut e2) = (0.0f64, 0.0f64);
        assert_eq!(mht_solution_exponents(s, &mut e1, &mut e2), MhtStatus::Ok);
        let d0 = 0.5 * (16.0f64 / 15.0).ln();
        assert!((e1 - d0).abs() < 1e-8 && (e2 - d0).abs() < 1e-8);

        // the statistic averaged against p's own marginals is its mean
        // under p, which must exceed the gap for an interior solution
        let mut stat = 0.0f64;
        assert_eq!(
            mht_solution_statistic(
                s,
                [0.625, 0.375].as_ptr(),
                2,
                [0.625, 0.375].as_ptr(),
                2,
                &mut stat
            ),
            MhtStatus::Ok
        );
        assert!(stat > 0.0);
        let mut wrong = 0.0f64;
        assert_eq!(
            mht_solution_statistic(s, [1.0].as_ptr(), 1, [0.625, 0.375].as_ptr(), 2, &mut wrong),
            MhtStatus::InvalidArgument
        );

        // exact rates at the canonical threshold obey the exponential
        // bounds
        let n = 20u64;
        let (mut a, mut b) = (0.0f64, 0.0f64);
        let (mut la, mut lb) = (0.0f64, 0.0f64);
        assert_eq!(
            mht_solution_exact_rates(s, 0.0, n, 1_000_000, &mut a, &mut b, &mut la, &mut lb),
            MhtStatus::Ok
        );
        assert!(a > 0.0 && b > 0.0 && a < 1.0 && b < 1.0);
        assert!(a <= (-(n as f64) * e1).exp() && b <= (-(n as f64) * e2).exp());
        assert!((la - a.ln()).abs() < 1e-12 && (lb - b.ln()).abs() < 1e-12);
        // log sinks are optional
        assert_eq!(
            mht_solution_exact_rates(
                s,
                0.0,
                n,
                1_000_000,
                &mut a,
                &mut b,
                ptr::null_mut(),
                ptr::null_mut()
            ),
            MhtStatus::Ok
        );

        mht_solution_free(s);
        mht_dist_free(p);
        mht_dist_free(q);
    }
}

#[test]
fn out_of_range_and_cap_failures_report_cleanly() {
    unsafe {
        let p = make(&P_CELLS);
        let q = make(&Q_CELLS);
        let mut s: *mut MhtSolution = ptr::null_mut();
        assert_eq!(
            mht_solve_pair(p, q, 0.5, 1e-11, &mut s),
            MhtStatus::OutOfRange
        );
        assert!(s.is_null());
        assert!(last_error().contains("outside"));

        assert_eq!(mht_solve_pair(p, q, 0.05, 1e-11, &mut s), MhtStatus::Ok);
        let (mut a, mut b) = (0.0f64, 0.0f64);
        assert_eq!(
            mht_solution_exact_rates(
                s,
                0.05,
                40,
                10,
                &mut a,
                &mut b,
                ptr::null_mut(),
                ptr::null_mut()
            ),
            MhtStatus::CapExceeded
        );
        assert!(last_error().contains("cap"));
        mht_solution_free(s);
        mht_dist_free(p);
        mht_dist_free(q);
    }
}

#[test]
fn rate_solver_and_divergence_ball_rates_work_end_to_end() {
    unsafe {
        let p = make(&P_CELLS);
        let q = make(&Q_CELLS);
        let mut s: *mut MhtSolution = ptr::null_mut();
        assert_eq!(mht_solve_for_rate(p, q, 0.05, 1e-11, &mut s), MhtStatus::Ok);
        let (mut e1, mut e2) = (0.0f64, 0.0f64);
        assert_eq!(mht_solution_exponents(s, &mut e1, &mut e2), MhtStatus::Ok);
        assert!((e1 - 0.05).abs() < 1e-9, "type-I exponent {e1}");
        mht_solution_free(s);

        let (mut a, mut b) = (0.0f64, 0.0f64);
        assert_eq!(
            mht_hoeffding_exact_rates(
                p,
                q,
                0.05,
                20,
                1_000_000,
                &mut a,
                &mut b,
                ptr::null_mut(),
                ptr::null_mut()
            ),
            MhtStatus::Ok
        );
        assert!(a > 0.0 && b > 0.0 && a < 1.0 && b < 1.0);
        assert_eq!(
            mht_hoeffding_exact_rates(
                p,
                q,
                -1.0,
                20,
                1_000_000,
                &mut a,
                &mut b,
                ptr::null_mut(),
                ptr::null_mut()
            ),
            MhtStatus::InvalidArgument
        );
        mht_dist_free(p);
        mht_dist_free(q);
    }
}

#[test]
fn second_order_moments_match_reference_values() {
    unsafe {
        let p = make(&P_CELLS);
        let q = make(&Q_CELLS);
        let (mut e, mut v, mut t3) = (0.0f64, 0.0f64, 0.0f64);
        assert_eq!(
            mht_second_order(p, q, &mut e, &mut v, &mut t3),
            MhtStatus::Ok
        );
        assert!((e - E_STAR).abs() < 1e-9);
        assert!((v - 0.62813394410033).abs() < 1e-9);
        assert!((t3 - 0.5919161195641108).abs() < 1e-9);
        mht_dist_free(p);
        mht_dist_free(q);
    }
}

#[test]
fn generated_header_is_present_and_covers_the_surface() {
    let header = include_str!("../include/mhtest.h");
    for symbol in [
        "MhtStatus",
        "mht_dist_new",
        "mht_solve_pair",
        "mht_solution_exact_rates",
        "mht_last_error",
        "MHTEST_H",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}
