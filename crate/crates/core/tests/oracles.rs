//! Independent numerical cross-checks. Each test recomputes a headline
//! quantity with a deliberately different algorithm: scalar golden-section
//! search, grid minimax refinement, a lattice feasibility scan, CDF
//! bisection, and raw sequence enumeration. None of them touch the
//! library's solvers beyond the value under test.

use mhtest_core::asymptotics::{normal_cdf, normal_quantile};
use mhtest_core::dist::JointDistribution;
use mhtest_core::geometry::projected_relative_entropy;
use mhtest_core::schemes::oracle_marginal_type_llr;
use mhtest_core::solver::{exponent_f, solve_lambda_pair};

fn pair_p() -> JointDistribution {
    JointDistribution::from_rows(&[vec![0.5, 0.125], vec![0.125, 0.25]]).unwrap()
}

fn pair_q() -> JointDistribution {
    JointDistribution::from_rows(&[vec![0.125, 0.25], vec![0.5, 0.125]]).unwrap()
}

/// Plain divergence between flat tables, zeros tolerated in the first slot.
fn div(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if x > 0.0 { x * (x / y).ln() } else { 0.0 })
        .sum()
}

/// Binary table with marginal masses (u, v) on symbol 1 and the given
/// corner cell, row-major over {0,1} x {0,1}.
fn table(u: f64, v: f64, c11: f64) -> [f64; 4] {
    [1.0 - u - v + c11, v - c11, u - c11, c11]
}

/// Corner cell of the coupling with marginals (u, v) and log cross-ratio
/// `theta`, found by bisection on the monotone cross-ratio map.
fn coupling_cell(u: f64, v: f64, theta: f64) -> f64 {
    let mut lo = (u + v - 1.0).max(0.0) + 1e-14;
    let mut hi = u.min(v) - 1e-14;
    let g = |c: f64| {
        let t = table(u, v, c);
        (t[3] * t[0]).ln() - (t[1] * t[2]).ln() - theta
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn cross_ratio(cells: &[f64]) -> f64 {
    (cells[3] * cells[0]).ln() - (cells[1] * cells[2]).ln()
}

/// Divergence of the coupling with marginals (u, v) in the base's
/// cross-ratio family against the base itself.
fn family_divergence(base: &[f64], u: f64, v: f64) -> f64 {
    let c = coupling_cell(u, v, cross_ratio(base));
    div(&table(u, v, c), base)
}

#[test]
fn golden_section_confirms_projected_divergence() {
    // E(p||q) = min over couplings with p's marginals of D(.||q); for a
    // binary pair that is a 1-D convex problem in the corner cell
    let cases = [
        (pair_p(), pair_q()),
        (pair_q(), pair_p()),
        (
            JointDistribution::from_rows(&[vec![0.55, 0.1], vec![0.05, 0.3]]).unwrap(),
            JointDistribution::from_rows(&[vec![0.2, 0.3], vec![0.35, 0.15]]).unwrap(),
        ),
    ];
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    for (p, q) in cases {
        let u = p.marginal_x()[1];
        let v = p.marginal_y()[1];
        let f = |c: f64| div(&table(u, v, c), q.cells());
        let mut lo = (u + v - 1.0).max(0.0) + 1e-12;
        let mut hi = u.min(v) - 1e-12;
        let mut c1 = hi - phi * (hi - lo);
        let mut c2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (f(c1), f(c2));
        for _ in 0..120 {
            if f1 < f2 {
                hi = c2;
                c2 = c1;
                f2 = f1;
                c1 = hi - phi * (hi - lo);
                f1 = f(c1);
            } else {
                lo = c1;
                c1 = c2;
                f1 = f2;
                c2 = lo + phi * (hi - lo);
                f2 = f(c2);
            }
        }
        let oracle = f(0.5 * (lo + hi));
        let lib = projected_relative_entropy(&p, &q).unwrap();
        assert!((oracle - lib).abs() < 1e-9, "oracle {oracle} vs lib {lib}");
    }
}

#[test]
fn minimax_refinement_confirms_zero_gap_exponent() {
    // at gap zero the two divergences agree, and their common value is the
    // smallest worst-case divergence over shared marginals
    let p = pair_p();
    let q = pair_q();
    let worst =
        |u: f64, v: f64| family_divergence(p.cells(), u, v).max(family_divergence(q.cells(), u, v));
    let (mut cu, mut cv) = (0.5, 0.45);
    let mut span = 0.2;
    let mut best = f64::INFINITY;
    for _ in 0..6 {
        let mut arg = (cu, cv);
        for i in 0..=40 {
            for j in 0..=40 {
                let u = cu - span + 2.0 * span * i as f64 / 40.0;
                let v = cv - span + 2.0 * span * j as f64 / 40.0;
                if u <= 0.01 || u >= 0.99 || v <= 0.01 || v >= 0.99 {
                    continue;
                }
                let w = worst(u, v);
                if w < best {
                    best = w;
                    arg = (u, v);
                }
            }
        }
        (cu, cv) = arg;
        span /= 8.0;
    }
    let sol = solve_lambda_pair(&p, &q, 0.0, 1e-11).unwrap();
    let lib = div(sol.p_lambda.cells(), p.cells());
    assert!((best - lib).abs() < 1e-8, "oracle {best} vs lib {lib}");
    // and the refined argmin is the shared marginal of the solved pair
    assert!((cu - sol.p_lambda.marginal_x()[1]).abs() < 1e-5);
    assert!((cv - sol.p_lambda.marginal_y()[1]).abs() < 1e-5);
}

#[test]
fn lattice_scan_confirms_rate_exponent() {
    // best type-II exponent under a type-I exponent floor, by scanning
    // shared marginals: minimize the q-side divergence subject to the
    // p-side one staying within r
    let p = pair_p();
    let q = pair_q();
    for r in [0.05, 0.1] {
        let (mut cu, mut cv) = (0.5f64, 0.45f64);
        let mut span = 0.45f64;
        let mut step = 0.005f64;
        let mut best = f64::INFINITY;
        for _ in 0..4 {
            let m = (2.0 * span / step).ceil() as i64;
            let mut arg = (cu, cv);
            for i in 0..=m {
                for j in 0..=m {
                    let u = cu - span + step * i as f64;
                    let v = cv - span + step * j as f64;
                    if u <= 0.01 || u >= 0.99 || v <= 0.01 || v >= 0.99 {
                        continue;
                    }
                    if family_divergence(p.cells(), u, v) > r {
                        continue;
                    }
                    let g = family_divergence(q.cells(), u, v);
                    if g < best {
                        best = g;
                        arg = (u, v);
                    }
                }
            }
            (cu, cv) = arg;
            span = 3.0 * step;
            step /= 12.0;
        }
        let lib = exponent_f(&p, &q, r).unwrap();
        assert!(
            (best - lib).abs() < 5e-4,
            "r={r}: oracle {best} vs lib {lib}"
        );
    }
}

#[test]
fn bisected_cdf_confirms_quantile() {
    for target in [1e-9, 1e-4, 0.02425, 0.3, 0.5, 0.77, 0.975, 0.999999] {
        let (mut lo, mut hi) = (-45.0f64, 45.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let lib = normal_quantile(target).unwrap();
        assert!(
            (oracle - lib).abs() < 1e-9,
            "p={target}: oracle {oracle} vs lib {lib}"
        );
    }
}

#[test]
fn sequence_enumeration_confirms_marginal_class_masses() {
    // mass of each (row-count, column-count) class, recomputed by walking
    // every length-4 outcome sequence one by one
    let p = pair_p();
    let q = pair_q();
    let n = 4u32;
    let mut acc: std::collections::BTreeMap<(u64, u64), (f64, f64)> =
        std::collections::BTreeMap::new();
    for code in 0..4u64.pow(n) {
        let mut c = code;
        let (mut cx1, mut cy1) = (0u64, 0u64);
        let (mut wp, mut wq) = (1.0, 1.0);
        for _ in 0..n {
            let cell = (c % 4) as usize;
            c /= 4;
            let (x, y) = (cell / 2, cell % 2);
            cx1 += x as u64;
            cy1 += y as u64;
            wp *= p.get(x, y);
            wq *= q.get(x, y);
        }
        let e = acc.entry((cx1, cy1)).or_insert((0.0, 0.0));
        e.0 += wp;
        e.1 += wq;
    }
    let classes = oracle_marginal_type_llr(&p, &q, u64::from(n), 60).unwrap();
    assert_eq!(classes.len(), acc.len());
    for cls in classes {
        let (wp, wq) = acc[&(cls.x1_count, cls.y1_count)];
        assert!((cls.log_p.exp() - wp).abs() < 1e-13);
        assert!((cls.log_q.exp() - wq).abs() < 1e-13);
        let stat = (wp.ln() - wq.ln()) / f64::from(n);
        assert!((cls.statistic - stat).abs() < 1e-11);
    }
}
