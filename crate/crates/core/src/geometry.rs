//! I-projection of a positive joint distribution onto the set of
//! distributions with prescribed marginals, the projected relative entropy
//! built on it, a closed form for the binary case, and the type-restricted
//! variant with its finite-n gap bound.

use crate::dist::{kl_tables, JointDistribution, JointType};
use crate::error::{Error, Result};

/// Default convergence tolerance for the alternating-scaling projection
/// (total-variation mismatch of the marginals).
pub const DEFAULT_IPF_TOL: f64 = 1e-12;

/// Default iteration budget for the alternating-scaling projection.
pub const DEFAULT_IPF_MAX_ITER: u64 = 100_000;

/// Outcome of an I-projection onto fixed marginals.
#[derive(Clone, Debug)]
pub struct ProjectionResult {
    /// The minimizer of D(. || q) over the marginal-constrained set.
    pub projection: JointDistribution,
    /// D(projection || q) in nats.
    pub value: f64,
    /// Number of row+column sweeps performed.
    pub iterations: u64,
    /// Final total-variation mismatch of the marginals.
    pub residual: f64,
}

/// Alternating row/column scaling on a raw table. Tolerates zero target
/// marginals (rows or columns with zero mass stay zero), which the
/// type-level callers need; the public wrapper enforces positivity.
///
/// Returns the scaled table, the sweep count, and the final residual.
/// When `history` is given, the residual after each sweep is appended.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ipf_table(
    start: &[f64],
    x_size: usize,
    y_size: usize,
    mx: &[f64],
    my: &[f64],
    tol: f64,
    max_iter: u64,
    mut history: Option<&mut Vec<f64>>,
) -> Result<(Vec<f64>, u64, f64)> {
    let mut t = start.to_vec();
    let mut iterations = 0u64;
    loop {
        for x in 0..x_size {
            let row = &mut t[x * y_size..(x + 1) * y_size];
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                let f = mx[x] / s;
                for c in row.iter_mut() {
                    *c *= f;
                }
            } else if mx[x] > 0.0 {
                return Err(Error::SolverFailed(
                    "projection target puts mass on an empty row".into(),
                ));
            }
        }
        for y in 0..y_size {
            let s: f64 = (0..x_size).map(|x| t[x * y_size + y]).sum();
            if s > 0.0 {
                let f = my[y] / s;
                for x in 0..x_size {
                    t[x * y_size + y] *= f;
                }
            } else if my[y] > 0.0 {
                return Err(Error::SolverFailed(
                    "projection target puts mass on an empty column".into(),
                ));
            }
        }
        iterations += 1;
        // columns are exact right after column scaling, so the row mismatch
        // is the binding residual; measure both anyway
        let mut rx = 0.0;
        for x in 0..x_size {
            let s: f64 = t[x * y_size..(x + 1) * y_size].iter().sum();
            rx += (s - mx[x]).abs();
        }
        let mut ry = 0.0;
        for y in 0..y_size {
            let s: f64 = (0..x_size).map(|x| t[x * y_size + y]).sum();
            ry += (s - my[y]).abs();
        }
        let residual = 0.5 * rx.max(ry);
        if let Some(h) = history.as_deref_mut() {
            h.push(residual);
        }
        if residual < tol {
            return Ok((t, iterations, residual));
        }
        if iterations >= max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
    }
}

/// I-projection of `q` onto the distributions with marginals `(mx, my)`:
/// the unique minimizer of D(. || q) under those constraints, computed by
/// alternating row/column scaling. Each scaling step is itself the exact
/// projection onto a single marginal constraint, and the minimizer keeps
/// `q`'s interaction (log-linear) coordinates.
pub fn project_onto_marginals(
    q: &JointDistribution,
    mx: &[f64],
    my: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<ProjectionResult> {
    if mx.len() != q.x_size() || my.len() != q.y_size() {
        return Err(Error::DimensionMismatch(
            "marginal lengths vs distribution".into(),
        ));
    }
    for (name, m) in [("x", mx), ("y", my)] {
        if m.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "target {name}-marginal must be strictly positive"
            )));
        }
        let s: f64 = m.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "target {name}-marginal sums to {s:.12}, expected 1"
            )));
        }
    }
    if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
        return Err(Error::InvalidInput(
            "tol must be > 0 and max_iter >= 1".into(),
        ));
    }
    let (t, iterations, residual) = ipf_table(
        q.cells(),
        q.x_size(),
        q.y_size(),
        mx,
        my,
        tol,
        max_iter,
        None,
    )?;
    let value = kl_tables(&t, q.cells());
    let projection = JointDistribution::from_flat(q.x_size(), q.y_size(), t)?;
    Ok(ProjectionResult {
        projection,
        value,
        iterations,
        residual,
    })
}

/// Projected relative entropy E(p || q): the minimum of D(. || q) over all
/// distributions sharing `p`'s marginals. Depends on `p` only through its
/// marginals.
pub fn projected_relative_entropy(p: &JointDistribution, q: &JointDistribution) -> Result<f64> {
    projected_relative_entropy_with(p, q, DEFAULT_IPF_TOL, DEFAULT_IPF_MAX_ITER)
}

/// Same as [`projected_relative_entropy`] with explicit solver settings.
pub fn projected_relative_entropy_with(
    p: &JointDistribution,
    q: &JointDistribution,
    tol: f64,
    max_iter: u64,
) -> Result<f64> {
    if p.x_size() != q.x_size() || p.y_size() != q.y_size() {
        return Err(Error::DimensionMismatch("operand alphabets".into()));
    }
    Ok(project_onto_marginals(q, &p.marginal_x(), &p.marginal_y(), tol, max_iter)?.value)
}

/// Unique joint cell mass of a positive 2x2 distribution with marginals
/// `(eta_x, eta_y)` (mass of letter 1 on each side) and log-odds-ratio
/// `theta_xy`. Closed form; the root is rationalized so the expression is
/// continuous through `theta_xy = 0`, where it degenerates to the product.
pub fn binary_eta_xy(eta_x: f64, eta_y: f64, theta_xy: f64) -> Result<f64> {
    if !(eta_x > 0.0 && eta_x < 1.0 && eta_y > 0.0 && eta_y < 1.0) {
        return Err(Error::InvalidInput(
            "marginal masses must lie strictly inside (0, 1)".into(),
        ));
    }
    if !theta_xy.is_finite() {
        return Err(Error::InvalidInput("theta_xy must be finite".into()));
    }
    Ok(binary_eta_core(eta_x, eta_y, theta_xy))
}

/// Unchecked core of [`binary_eta_xy`]; also accepts boundary marginals.
pub(crate) fn binary_eta_core(eta_x: f64, eta_y: f64, theta_xy: f64) -> f64 {
    if theta_xy.abs() < 1e-9 {
        // the quadratic degenerates to linear; the product is exact at 0 and
        // within ~1e-10 relative over the branch window
        return eta_x * eta_y;
    }
    let u = theta_xy.exp_m1();
    let ethe = u + 1.0;
    let a = (eta_x + eta_y) * u + 1.0;
    let disc = a * a - 4.0 * eta_x * eta_y * u * ethe;
    // disc >= 0 for all admissible inputs; clamp defensively against round-off
    let root = disc.max(0.0).sqrt();
    2.0 * eta_x * eta_y * ethe / (a + root)
}

/// Three-point Pythagorean defect |D(p||q) - D(p||p*) - D(p*||q)| where
/// p* is the projection of q onto p's marginals. Zero up to solver
/// tolerance; exposed as a diagnostic.
pub fn pythagorean_residual(p: &JointDistribution, q: &JointDistribution) -> Result<f64> {
    if p.x_size() != q.x_size() || p.y_size() != q.y_size() {
        return Err(Error::DimensionMismatch("operand alphabets".into()));
    }
    let proj = project_onto_marginals(
        q,
        &p.marginal_x(),
        &p.marginal_y(),
        1e-14,
        DEFAULT_IPF_MAX_ITER,
    )?;
    let d_pq = kl_tables(p.cells(), q.cells());
    let d_pstar = kl_tables(p.cells(), proj.projection.cells());
    let d_starq = proj.value;
    Ok((d_pq - d_pstar - d_starq).abs())
}

/// Minimum of D(. || q) over joint TYPES (empirical distributions with
/// denominator n) sharing `t`'s marginal counts, by exhaustive enumeration
/// of contingency tables with those margins. `cap` bounds the number of
/// tables visited.
pub fn projected_relative_entropy_over_types(
    t: &JointType,
    q: &JointDistribution,
    cap: u64,
) -> Result<f64> {
    if t.x_size() != q.x_size() || t.y_size() != q.y_size() {
        return Err(Error::DimensionMismatch("type vs distribution".into()));
    }
    let rows = t.marginal_counts_x();
    let cols = t.marginal_counts_y();
    let n = t.n();
    let nx = t.x_size();
    let ny = t.y_size();
    let mut counts = vec![0u64; nx * ny];
    let mut best = f64::INFINITY;
    let mut visited = 0u64;

    // depth-first over cells in row-major order; the last cell of each row
    // and the whole last row are forced by the margins
    #[allow(clippy::too_many_arguments)]
    fn rec(
        pos: usize,
        nx: usize,
        ny: usize,
        row_rem: u64,
        col_rem: &mut [u64],
        rows: &[u64],
        counts: &mut [u64],
        q_cells: &[f64],
        n: u64,
        best: &mut f64,
        visited: &mut u64,
        cap: u64,
    ) -> Result<()> {
        let i = pos / ny;
        let j = pos % ny;
        if i == nx - 1 {
            // last row: forced to the remaining column margins
            let mut freq_div = 0.0;
            let mut ok = true;
            let mut row_sum = 0u64;
            for jj in 0..ny {
                counts[(nx - 1) * ny + jj] = col_rem[jj];
                row_sum += col_rem[jj];
            }
            if row_sum != rows[nx - 1] {
                ok = false;
            }
            if ok {
                *visited += 1;
                if *visited > cap {
                    return Err(Error::CapExceeded {
                        needed: *visited as u128,
                        cap,
                    });
                }
                let nf = n as f64;
                for (idx, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        let f = c as f64 / nf;
                        freq_div += f * (f / q_cells[idx]).ln();
                    }
                }
                if freq_div < *best {
                    *best = freq_div;
                }
            }
            return Ok(());
        }
        if j == ny - 1 {
            // last column of a non-final row: forced by the row margin
            if row_rem <= col_rem[j] {
                counts[pos] = row_rem;
                col_rem[j] -= row_rem;
                rec(
                    pos + 1,
                    nx,
                    ny,
                    rows[i + 1],
                    col_rem,
                    rows,
                    counts,
                    q_cells,
                    n,
                    best,
                    visited,
                    cap,
                )?;
                col_rem[j] += row_rem;
            }
            return Ok(());
        }
        let hi = row_rem.min(col_rem[j]);
        for c in 0..=hi {
            counts[pos] = c;
            col_rem[j] -= c;
            rec(
                pos + 1,
                nx,
                ny,
                row_rem - c,
                col_rem,
                rows,
                counts,
                q_cells,
                n,
                best,
                visited,
                cap,
            )?;
            col_rem[j] += c;
        }
        Ok(())
    }

    let mut col_rem = cols.clone();
    rec(
        0,
        nx,
        ny,
        rows[0],
        &mut col_rem,
        &rows,
        &mut counts,
        q.cells(),
        n,
        &mut best,
        &mut visited,
        cap,
    )?;
    if !best.is_finite() {
        return Err(Error::SolverFailed(
            "no contingency table matches the margins".into(),
        ));
    }
    Ok(best)
}

/// Worst-case gap between the type-restricted and unrestricted projected
/// relative entropies at blocklength `n`:
/// `nu * log(|X||Y| / nu) + nu * max log(1 / q)` with
/// `nu = 4 (|X|-1)(|Y|-1) / n`.
pub fn type_gap_bound(n: u64, q: &JointDistribution) -> f64 {
    let nu = 4.0 * ((q.x_size() - 1) * (q.y_size() - 1)) as f64 / n as f64;
    let k = (q.x_size() * q.y_size()) as f64;
    let max_log_inv = q
        .cells()
        .iter()
        .map(|&c| -(c.ln()))
        .fold(f64::NEG_INFINITY, f64::max);
    nu * (k / nu).ln() + nu * max_log_inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::kl_divergence;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pair_p() -> JointDistribution {
        JointDistribution::from_rows(&[vec![0.5, 0.125], vec![0.125, 0.25]]).unwrap()
    }

    fn pair_q() -> JointDistribution {
        JointDistribution::from_rows(&[vec![0.125, 0.25], vec![0.5, 0.125]]).unwrap()
    }

    /// Minimum of E(p || q) over the one-dimensional feasible segment,
    /// frozen from an independent golden-section scan.
    const E_STAR: f64 = 0.161819257283855;

    #[test]
    fn projecting_onto_own_marginals_is_identity() {
        let q = pair_q();
        let r = project_onto_marginals(&q, &q.marginal_x(), &q.marginal_y(), 1e-12, 1000).unwrap();
        assert!(r.value.abs() < 1e-13);
        for (a, b) in r.projection.cells().iter().zip(q.cells()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn uniform_projects_to_product() {
        let u = JointDistribution::from_flat(2, 3, vec![1.0 / 6.0; 6]).unwrap();
        let mx = [0.7, 0.3];
        let my = [0.2, 0.3, 0.5];
        let r = project_onto_marginals(&u, &mx, &my, 1e-14, 10_000).unwrap();
        for (i, a) in mx.iter().enumerate() {
            for (j, b) in my.iter().enumerate() {
                assert_abs_diff_eq!(r.projection.get(i, j), a * b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn projected_entropy_matches_frozen_oracle_value() {
        let p = pair_p();
        let q = pair_q();
        assert_abs_diff_eq!(
            projected_relative_entropy_with(&p, &q, 1e-14, 100_000).unwrap(),
            E_STAR,
            epsilon = 1e-9
        );
        // this particular pair is swap-symmetric
        assert_abs_diff_eq!(
            projected_relative_entropy_with(&q, &p, 1e-14, 100_000).unwrap(),
            E_STAR,
            epsilon = 1e-9
        );
    }

    #[test]
    fn projected_entropy_trivial_cases() {
        let p = pair_p();
        assert!(projected_relative_entropy(&p, &p).unwrap().abs() < 1e-12);
        // independent q, p = q: feasible point attains zero
        let mx = [0.6, 0.4];
        let my = [0.45, 0.55];
        let cells: Vec<f64> = mx
            .iter()
            .flat_map(|a| my.iter().map(move |b| a * b))
            .collect();
        let ind = JointDistribution::from_flat(2, 2, cells).unwrap();
        assert!(projected_relative_entropy(&ind, &ind).unwrap().abs() < 1e-12);
    }

    #[test]
    fn depends_only_on_marginals() {
        let p = pair_p();
        let q = pair_q();
        let mx = p.marginal_x();
        let my = p.marginal_y();
        let prod: Vec<f64> = mx
            .iter()
            .flat_map(|a| my.iter().map(move |b| a * b))
            .collect();
        let prod = JointDistribution::from_flat(2, 2, prod).unwrap();
        let e1 = projected_relative_entropy_with(&p, &q, 1e-14, 100_000).unwrap();
        let e2 = projected_relative_entropy_with(&prod, &q, 1e-14, 100_000).unwrap();
        assert_abs_diff_eq!(e1, e2, epsilon = 1e-12);
    }

    #[test]
    fn projection_keeps_interaction_coordinates() {
        let q =
            JointDistribution::from_rows(&[vec![0.2, 0.1, 0.15], vec![0.05, 0.3, 0.2]]).unwrap();
        let mx = [0.55, 0.45];
        let my = [0.25, 0.35, 0.4];
        let r = project_onto_marginals(&q, &mx, &my, 1e-14, 10_000).unwrap();
        let got = r.projection.to_natural().theta_xy;
        let want = q.to_natural().theta_xy;
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-8);
        }
        // requested marginals are met
        let pmx = r.projection.marginal_x();
        for (a, b) in pmx.iter().zip(&mx) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn residual_is_monotone_across_sweeps() {
        let q = pair_q();
        let p = pair_p();
        let mut hist = Vec::new();
        let _ = ipf_table(
            q.cells(),
            2,
            2,
            &p.marginal_x(),
            &p.marginal_y(),
            1e-15,
            500,
            Some(&mut hist),
        )
        .unwrap();
        assert!(hist.len() >= 2);
        for w in hist.windows(2) {
            assert!(w[1] <= w[0] + 1e-16);
        }
        assert!(*hist.last().unwrap() < 1e-15);
    }

    #[test]
    fn rejects_invalid_marginals() {
        let q = pair_q();
        assert!(project_onto_marginals(&q, &[0.5, 0.5, 0.0], &[0.5, 0.5], 1e-12, 100).is_err());
        assert!(project_onto_marginals(&q, &[1.0, 0.0], &[0.5, 0.5], 1e-12, 100).is_err());
        assert!(project_onto_marginals(&q, &[0.7, 0.7], &[0.5, 0.5], 1e-12, 100).is_err());
    }

    #[test]
    fn binary_closed_form_matches_frozen_cases() {
        // strongly positively correlated: recovers the canonical pair's cell
        assert_abs_diff_eq!(
            binary_eta_xy(0.375, 0.375, (8.0f64).ln()).unwrap(),
            0.25,
            epsilon = 1e-13
        );
        // negatively correlated side, frozen from the IPF oracle
        assert_abs_diff_eq!(
            binary_eta_xy(0.375, 0.375, -(8.0f64).ln()).unwrap(),
            0.045_797_499_397_121_75,
            epsilon = 1e-9
        );
    }

    #[test]
    fn binary_closed_form_zero_branch() {
        assert_abs_diff_eq!(binary_eta_xy(0.3, 0.7, 0.0).unwrap(), 0.21, epsilon = 1e-15);
        // continuity through the branch window
        let lo = binary_eta_xy(0.3, 0.7, 0.999e-9).unwrap();
        let hi = binary_eta_xy(0.3, 0.7, 1.001e-9).unwrap();
        assert_abs_diff_eq!(lo, hi, epsilon = 1e-9);
    }

    #[test]
    fn binary_closed_form_respects_frechet_bounds() {
        for &ex in &[0.05, 0.375, 0.6, 0.95] {
            for &ey in &[0.1, 0.375, 0.8] {
                for &th in &[-6.0, -2.0, -0.5, 0.5, 2.0, 6.0] {
                    let e = binary_eta_xy(ex, ey, th).unwrap();
                    assert!(e >= (ex + ey - 1.0).max(0.0) - 1e-12);
                    assert!(e <= ex.min(ey) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn binary_closed_form_agrees_with_ipf() {
        for &ex in &[0.2, 0.5, 0.8] {
            for &ey in &[0.3, 0.6] {
                for &th in &[-3.0, -1.0, 1e-10, 0.7, 2.5] {
                    let e = binary_eta_xy(ex, ey, th).unwrap();
                    // build the member from natural coordinates, project it
                    // onto the target marginals: fixed point
                    let base = crate::dist::NaturalCoords {
                        x_size: 2,
                        y_size: 2,
                        theta_x: vec![0.0],
                        theta_y: vec![0.0],
                        theta_xy: vec![th],
                    };
                    let base = JointDistribution::from_natural(&base).unwrap();
                    let r = project_onto_marginals(
                        &base,
                        &[1.0 - ex, ex],
                        &[1.0 - ey, ey],
                        1e-14,
                        100_000,
                    )
                    .unwrap();
                    assert_abs_diff_eq!(e, r.projection.get(1, 1), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn pythagorean_identity_holds() {
        let p = pair_p();
        let q = pair_q();
        assert!(pythagorean_residual(&p, &q).unwrap() < 1e-9);
        assert!(pythagorean_residual(&q, &p).unwrap() < 1e-9);
        assert!(pythagorean_residual(&p, &p).unwrap() < 1e-13);
    }

    #[test]
    fn cross_family_transfer_identity() {
        // members of the two log-linear families built on common marginals:
        // the mean of log(q_tilde / q) under p_tilde equals D(q_tilde || q)
        let p = pair_p();
        let q = pair_q();
        let mx = [0.55, 0.45];
        let my = [0.6, 0.4];
        let pt = project_onto_marginals(&p, &mx, &my, 1e-14, 100_000)
            .unwrap()
            .projection;
        let qt = project_onto_marginals(&q, &mx, &my, 1e-14, 100_000)
            .unwrap()
            .projection;
        let mut lhs = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                lhs += pt.get(i, j) * (qt.get(i, j) / q.get(i, j)).ln();
            }
        }
        let rhs = kl_divergence(&qt, &q).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
    }

    #[test]
    fn projected_entropy_is_convex_in_first_argument() {
        let q = pair_q();
        let p1 = pair_p();
        let p2 = JointDistribution::from_flat(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        for &w in &[0.25, 0.5, 0.75] {
            let mix: Vec<f64> = p1
                .cells()
                .iter()
                .zip(p2.cells())
                .map(|(a, b)| w * a + (1.0 - w) * b)
                .collect();
            let mix = JointDistribution::from_flat(2, 2, mix).unwrap();
            let lhs = projected_relative_entropy_with(&mix, &q, 1e-14, 100_000).unwrap();
            let rhs = w * projected_relative_entropy_with(&p1, &q, 1e-14, 100_000).unwrap()
                + (1.0 - w) * projected_relative_entropy_with(&p2, &q, 1e-14, 100_000).unwrap();
            assert!(lhs <= rhs + 1e-10);
        }
    }

    #[test]
    fn type_restricted_value_brackets() {
        let q = pair_q();
        let t = JointType::new(20, 2, 2, vec![6, 4, 3, 7]).unwrap();
        let en = projected_relative_entropy_over_types(&t, &q, 1_000_000).unwrap();
        let freq = JointDistribution::from_flat(2, 2, t.frequencies()).unwrap();
        let e = projected_relative_entropy_with(&freq, &q, 1e-14, 100_000).unwrap();
        assert!(en >= e - 1e-12);
        assert!(en <= e + type_gap_bound(20, &q) + 1e-12);
    }

    #[test]
    fn type_restricted_zero_when_feasible() {
        let u = JointDistribution::from_flat(2, 2, vec![0.25; 4]).unwrap();
        let t = JointType::new(4, 2, 2, vec![1, 1, 1, 1]).unwrap();
        assert!(projected_relative_entropy_over_types(&t, &u, 1000).unwrap() < 1e-14);
    }

    #[test]
    fn type_restricted_respects_cap() {
        let q = pair_q();
        let t = JointType::new(40, 2, 2, vec![10, 10, 10, 10]).unwrap();
        assert!(matches!(
            projected_relative_entropy_over_types(&t, &q, 3),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn gap_bound_formula() {
        let q = pair_q();
        // nu = 4/20 = 0.2; bound = 0.2 ln(4/0.2) + 0.2 ln(1/0.125)
        let want = 0.2 * (20.0f64).ln() + 0.2 * (8.0f64).ln();
        assert_abs_diff_eq!(type_gap_bound(20, &q), want, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn prop_pythagorean_random_pairs(raw_p in proptest::collection::vec(0.02f64..1.0, 6),
                                         raw_q in proptest::collection::vec(0.02f64..1.0, 6)) {
            let sp: f64 = raw_p.iter().sum();
            let sq: f64 = raw_q.iter().sum();
            let p = JointDistribution::from_flat(3, 2, raw_p.iter().map(|c| c / sp).collect()).unwrap();
            let q = JointDistribution::from_flat(3, 2, raw_q.iter().map(|c| c / sq).collect()).unwrap();
            prop_assert!(pythagorean_residual(&p, &q).unwrap() < 1e-8);
        }

        #[test]
        fn prop_projection_meets_marginals(raw_q in proptest::collection::vec(0.02f64..1.0, 4),
                                           mx1 in 0.05f64..0.95, my1 in 0.05f64..0.95) {
            let sq: f64 = raw_q.iter().sum();
            let q = JointDistribution::from_flat(2, 2, raw_q.iter().map(|c| c / sq).collect()).unwrap();
            let r = project_onto_marginals(&q, &[1.0 - mx1, mx1], &[1.0 - my1, my1], 1e-12, 100_000).unwrap();
            prop_assert!(r.value >= -1e-14);
            let got = r.projection.marginal_x();
            prop_assert!((got[1] - mx1).abs() < 1e-10);
        }
    }
}
