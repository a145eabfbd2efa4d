//! Solver for the defining system of the proxy log-likelihood-ratio test.
//!
//! For a positive pair (P, Q) and a gap value lambda strictly between
//! -E(Q||P) and E(P||Q), there is a unique pair of distributions
//! (P^l, Q^l) such that
//!
//! * P^l keeps P's interaction coordinates, Q^l keeps Q's,
//! * both share the same marginals,
//! * log(P^l / P) = a log(Q^l / Q) + b cell-wise for some scalars a, b,
//! * D(Q^l || Q) - D(P^l || P) = lambda.
//!
//! The statistic built from the pair, Lambda = log(Q^l / Q) - log(P^l / P),
//! is additively separable across the two coordinates, which is what makes
//! it computable from marginal types alone.
//!
//! The solver parametrizes the unknown shared marginals plus the slope `a`,
//! produces both members by I-projection (closed form in the binary case),
//! and drives a damped Newton iteration along a continuation path that
//! starts at the known endpoint solutions.

use crate::dist::{kl_tables, JointDistribution};
use crate::error::{Error, Result};
use crate::geometry::{
    binary_eta_core, ipf_table, project_onto_marginals, projected_relative_entropy_with,
};

/// Default residual tolerance (infinity norm) for the nonlinear system.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-11;

/// Margin below which a requested lambda counts as one of the endpoints.
pub const ENDPOINT_MARGIN: f64 = 1e-9;

const NEWTON_MAX_ITER: usize = 80;
const FD_STEP: f64 = 1e-7;
const MAX_LAMBDA_STEP: f64 = 0.05;
const MIN_LAMBDA_STEP: f64 = 1e-4;
const INNER_IPF_TOL: f64 = 1e-14;
const INNER_IPF_MAX_ITER: u64 = 50_000;
/// Marginal letters are kept at least this far from the simplex boundary
/// while the solver iterates.
const MARGINAL_FLOOR: f64 = 1e-7;

/// Additively separable statistic on the product alphabet:
/// `table(x, y) = a1(x) + a2(y)`.
#[derive(Clone, Debug)]
pub struct ProxyLlr {
    x_size: usize,
    y_size: usize,
    a1: Vec<f64>,
    a2: Vec<f64>,
    table: Vec<f64>,
}

impl ProxyLlr {
    /// Decomposes a raw table into additive parts and stores the exact
    /// additive reconstruction. Fails when the table is not additively
    /// separable (reconstruction defect above 1e-6).
    pub fn from_table(x_size: usize, y_size: usize, raw: &[f64]) -> Result<Self> {
        let (a1, a2) = additive_decomposition(x_size, y_size, raw)?;
        let mut table = Vec::with_capacity(x_size * y_size);
        for &ax in &a1 {
            for &ay in &a2 {
                table.push(ax + ay);
            }
        }
        Ok(Self {
            x_size,
            y_size,
            a1,
            a2,
            table,
        })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    /// Part indexed by the first coordinate.
    pub fn a1(&self) -> &[f64] {
        &self.a1
    }

    /// Part indexed by the second coordinate.
    pub fn a2(&self) -> &[f64] {
        &self.a2
    }

    /// Row-major additive table.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn eval(&self, x: usize, y: usize) -> f64 {
        self.a1[x] + self.a2[y]
    }

    /// Statistic of a pair of (empirical or model) marginals: the mean of
    /// the table under any joint with those marginals.
    pub fn statistic(&self, tx: &[f64], ty: &[f64]) -> f64 {
        let sx: f64 = tx.iter().zip(&self.a1).map(|(t, a)| t * a).sum();
        let sy: f64 = ty.iter().zip(&self.a2).map(|(t, a)| t * a).sum();
        sx + sy
    }

    /// Statistic from marginal counts with denominator `n`.
    pub fn statistic_from_counts(&self, cx: &[u64], cy: &[u64], n: u64) -> f64 {
        let sx: f64 = cx.iter().zip(&self.a1).map(|(&c, a)| c as f64 * a).sum();
        let sy: f64 = cy.iter().zip(&self.a2).map(|(&c, a)| c as f64 * a).sum();
        (sx + sy) / n as f64
    }

    /// Mean of the table under a joint distribution.
    pub fn mean_under(&self, d: &JointDistribution) -> f64 {
        self.statistic(&d.marginal_x(), &d.marginal_y())
    }

    pub fn min_value(&self) -> f64 {
        self.table.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.table.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Splits a row-major table into `a1(x) + a2(y)` using reference cell
/// `(0, 0)`. Errors when the reconstruction defect exceeds 1e-6.
pub fn additive_decomposition(
    x_size: usize,
    y_size: usize,
    table: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    additive_decomposition_at(x_size, y_size, table, 0, 0)
}

/// Same as [`additive_decomposition`] with an explicit reference cell; the
/// split shifts with the reference cell but the reconstructed sums do not.
pub fn additive_decomposition_at(
    x_size: usize,
    y_size: usize,
    table: &[f64],
    rx: usize,
    ry: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if table.len() != x_size * y_size || rx >= x_size || ry >= y_size {
        return Err(Error::DimensionMismatch("llr table shape".into()));
    }
    let a1: Vec<f64> = (0..x_size).map(|x| table[x * y_size + ry]).collect();
    let a2: Vec<f64> = (0..y_size)
        .map(|y| table[rx * y_size + y] - table[rx * y_size + ry])
        .collect();
    let mut defect = 0.0f64;
    for x in 0..x_size {
        for y in 0..y_size {
            defect = defect.max((table[x * y_size + y] - a1[x] - a2[y]).abs());
        }
    }
    if defect > 1e-6 {
        return Err(Error::SolverFailed(format!(
            "table is not additively separable (defect {defect:.3e})"
        )));
    }
    Ok((a1, a2))
}

/// Which end of the admissible lambda interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndpointSide {
    /// lambda = E(P||Q): the P-side member is P itself.
    Upper,
    /// lambda = -E(Q||P): the Q-side member is Q itself.
    Lower,
}

/// The aligned pair at a given lambda, together with the statistic.
#[derive(Clone, Debug)]
pub struct LambdaSolution {
    pub lambda: f64,
    /// Member keeping P's interaction coordinates.
    pub p_lambda: JointDistribution,
    /// Member keeping Q's interaction coordinates.
    pub q_lambda: JointDistribution,
    /// Alignment slope; 0 at the upper endpoint, infinite at the lower one.
    pub a: f64,
    /// Alignment offset; meaningful for finite nonzero `a`.
    pub b: f64,
    /// The additive statistic Lambda.
    pub llr: ProxyLlr,
}

/// Residual diagnostics of a solution against its defining conditions.
#[derive(Clone, Debug)]
pub struct SolutionDiagnostics {
    /// max - min of the alignment table (should be a constant table).
    pub alignment_spread: f64,
    /// |D(q_lambda||Q) - D(p_lambda||P) - lambda|.
    pub lambda_residual: f64,
    /// Largest total-variation mismatch between the members' marginals.
    pub marginal_tv: f64,
    /// lambda - mean of Lambda under Q (strictly positive for interior
    /// solutions).
    pub ordering_low: f64,
    /// Mean of Lambda under P minus lambda (strictly positive for interior
    /// solutions).
    pub ordering_high: f64,
    /// max over both members of |mean of Lambda under member - lambda|.
    pub tangent_residual: f64,
    /// Largest defect in the parallel-displacement conditions on the
    /// marginal log-coordinates.
    pub parallel_residual: f64,
    /// Raw Lambda table vs its additive reconstruction.
    pub decomposition_residual: f64,
}

impl LambdaSolution {
    /// Measures how well this solution satisfies its defining system for
    /// the base pair (p, q).
    pub fn diagnostics(
        &self,
        p: &JointDistribution,
        q: &JointDistribution,
    ) -> Result<SolutionDiagnostics> {
        let nx = p.x_size();
        let ny = p.y_size();
        if self.p_lambda.x_size() != nx || self.q_lambda.y_size() != ny {
            return Err(Error::DimensionMismatch("solution vs base pair".into()));
        }
        let mut raw = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                raw[i * ny + j] = (self.q_lambda.get(i, j) / q.get(i, j)).ln()
                    - (self.p_lambda.get(i, j) / p.get(i, j)).ln();
            }
        }
        let (ra1, ra2) = additive_decomposition(nx, ny, &raw)?;
        let mut decomposition_residual = 0.0f64;
        for i in 0..nx {
            for j in 0..ny {
                decomposition_residual =
                    decomposition_residual.max((raw[i * ny + j] - ra1[i] - ra2[j]).abs());
            }
        }

        // alignment table: log(P^l/P) - a log(Q^l/Q) for finite a,
        // log(Q^l/Q) - (1/a) log(P^l/P) -> log(Q^l/Q) at the lower endpoint
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..nx {
            for j in 0..ny {
                let lp = (self.p_lambda.get(i, j) / p.get(i, j)).ln();
                let lq = (self.q_lambda.get(i, j) / q.get(i, j)).ln();
                let v = if self.a.is_finite() {
                    lp - self.a * lq
                } else {
                    lq
                };
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }

        let d_p = kl_tables(self.p_lambda.cells(), p.cells());
        let d_q = kl_tables(self.q_lambda.cells(), q.cells());
        let lambda_residual = (d_q - d_p - self.lambda).abs();

        let pmx = self.p_lambda.marginal_x();
        let pmy = self.p_lambda.marginal_y();
        let qmx = self.q_lambda.marginal_x();
        let qmy = self.q_lambda.marginal_y();
        let tvx: f64 = 0.5
            * pmx
                .iter()
                .zip(&qmx)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        let tvy: f64 = 0.5
            * pmy
                .iter()
                .zip(&qmy)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();

        let mean_p_base = self.llr.mean_under(p);
        let mean_q_base = self.llr.mean_under(q);
        let tangent_p = (self.llr.mean_under(&self.p_lambda) - self.lambda).abs();
        let tangent_q = (self.llr.mean_under(&self.q_lambda) - self.lambda).abs();

        // parallel displacement of the marginal log-coordinates
        let th_pl = self.p_lambda.to_natural();
        let th_ql = self.q_lambda.to_natural();
        let th_p = p.to_natural();
        let th_q = q.to_natural();
        let mut parallel = 0.0f64;
        if self.a.is_finite() {
            for k in 0..nx - 1 {
                let dp = th_pl.theta_x[k] - th_p.theta_x[k];
                let dq = th_ql.theta_x[k] - th_q.theta_x[k];
                parallel = parallel.max((dp - self.a * dq).abs());
            }
            for k in 0..ny - 1 {
                let dp = th_pl.theta_y[k] - th_p.theta_y[k];
                let dq = th_ql.theta_y[k] - th_q.theta_y[k];
                parallel = parallel.max((dp - self.a * dq).abs());
            }
        } else {
            // lower endpoint: the Q-side displacement is zero
            for k in 0..nx - 1 {
                parallel = parallel.max((th_ql.theta_x[k] - th_q.theta_x[k]).abs());
            }
            for k in 0..ny - 1 {
                parallel = parallel.max((th_ql.theta_y[k] - th_q.theta_y[k]).abs());
            }
        }

        Ok(SolutionDiagnostics {
            alignment_spread: hi - lo,
            lambda_residual,
            marginal_tv: tvx.max(tvy),
            ordering_low: self.lambda - mean_q_base,
            ordering_high: mean_p_base - self.lambda,
            tangent_residual: tangent_p.max(tangent_q),
            parallel_residual: parallel,
            decomposition_residual,
        })
    }
}

/// Internal solve context for one (p, q) orientation.
struct SolveCtx<'a> {
    p: &'a JointDistribution,
    q: &'a JointDistribution,
    th_p_xy: Vec<f64>,
    th_q_xy: Vec<f64>,
    binary: bool,
    nx: usize,
    ny: usize,
}

impl<'a> SolveCtx<'a> {
    fn new(p: &'a JointDistribution, q: &'a JointDistribution) -> Self {
        let binary = p.is_binary();
        Self {
            p,
            q,
            th_p_xy: p.to_natural().theta_xy,
            th_q_xy: q.to_natural().theta_xy,
            binary,
            nx: p.x_size(),
            ny: p.y_size(),
        }
    }

    fn unknowns(&self) -> usize {
        self.nx - 1 + self.ny - 1 + 1
    }

    /// Unpacks the unknown vector into full marginal vectors; `None` when a
    /// letter mass leaves the admissible interior.
    fn unpack(&self, u: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut mx = vec![0.0; self.nx];
        let mut my = vec![0.0; self.ny];
        let mut sx = 0.0;
        for i in 1..self.nx {
            mx[i] = u[i - 1];
            sx += mx[i];
        }
        mx[0] = 1.0 - sx;
        let mut sy = 0.0;
        for j in 1..self.ny {
            my[j] = u[self.nx - 1 + j - 1];
            sy += my[j];
        }
        my[0] = 1.0 - sy;
        let ok = mx
            .iter()
            .chain(my.iter())
            .all(|&v| v > MARGINAL_FLOOR && v < 1.0 - MARGINAL_FLOOR);
        if ok {
            Some((mx, my))
        } else {
            None
        }
    }

    /// Projects p and q onto the candidate marginals; binary alphabets use
    /// the closed form, larger ones the alternating-scaling projection.
    fn project_pair(&self, mx: &[f64], my: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.binary {
            let build = |theta: f64| -> Option<Vec<f64>> {
                let e = binary_eta_core(mx[1], my[1], theta);
                let cells = vec![1.0 - mx[1] - my[1] + e, my[1] - e, mx[1] - e, e];
                if cells.iter().all(|&c| c > 0.0) {
                    Some(cells)
                } else {
                    None
                }
            };
            Some((build(self.th_p_xy[0])?, build(self.th_q_xy[0])?))
        } else {
            let tp = ipf_table(
                self.p.cells(),
                self.nx,
                self.ny,
                mx,
                my,
                INNER_IPF_TOL,
                INNER_IPF_MAX_ITER,
                None,
            )
            .ok()?;
            let tq = ipf_table(
                self.q.cells(),
                self.nx,
                self.ny,
                mx,
                my,
                INNER_IPF_TOL,
                INNER_IPF_MAX_ITER,
                None,
            )
            .ok()?;
            Some((tp.0, tq.0))
        }
    }

    /// Residual vector of the defining system at the packed unknowns.
    fn residuals(&self, u: &[f64], lambda: f64) -> Option<Vec<f64>> {
        let a = u[self.unknowns() - 1];
        if !a.is_finite() {
            return None;
        }
        let (mx, my) = self.unpack(u)?;
        let (tp, tq) = self.project_pair(&mx, &my)?;
        let ny = self.ny;
        let mut r = Vec::with_capacity(self.unknowns());
        // parallel displacement of the marginal log-coordinates, x block
        for i in 1..self.nx {
            let dp = (tp[i * ny] / tp[0]).ln() - (self.p.get(i, 0) / self.p.get(0, 0)).ln();
            let dq = (tq[i * ny] / tq[0]).ln() - (self.q.get(i, 0) / self.q.get(0, 0)).ln();
            r.push(dp - a * dq);
        }
        // y block
        for j in 1..ny {
            let dp = (tp[j] / tp[0]).ln() - (self.p.get(0, j) / self.p.get(0, 0)).ln();
            let dq = (tq[j] / tq[0]).ln() - (self.q.get(0, j) / self.q.get(0, 0)).ln();
            r.push(dp - a * dq);
        }
        // divergence gap condition
        let d_p = kl_tables(&tp, self.p.cells());
        let d_q = kl_tables(&tq, self.q.cells());
        r.push(d_q - d_p - lambda);
        Some(r)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting; `None` on singular systems.
fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row * n + k] * x[k];
        }
        x[row] = s / a[row * n + row];
    }
    Some(x)
}

/// Damped Newton iteration on the residual system at fixed lambda.
fn newton(ctx: &SolveCtx, lambda: f64, u0: Vec<f64>, tol: f64) -> Result<(Vec<f64>, f64)> {
    let m = ctx.unknowns();
    let mut u = u0;
    let mut r = ctx
        .residuals(&u, lambda)
        .ok_or_else(|| Error::SolverFailed("infeasible starting point".into()))?;
    for _ in 0..NEWTON_MAX_ITER {
        let rn = inf_norm(&r);
        if rn < tol {
            return Ok((u, rn));
        }
        // forward-difference Jacobian, falling back to backward steps at
        // feasibility boundaries
        let mut jac = vec![0.0; m * m];
        for k in 0..m {
            let h = FD_STEP * (1.0 + u[k].abs());
            let mut up = u.clone();
            up[k] += h;
            let col: Vec<f64> = match ctx.residuals(&up, lambda) {
                Some(rk) => rk.iter().zip(&r).map(|(a, b)| (a - b) / h).collect(),
                None => {
                    let mut dn = u.clone();
                    dn[k] -= h;
                    let rk = ctx.residuals(&dn, lambda).ok_or_else(|| {
                        Error::SolverFailed("finite-difference step infeasible".into())
                    })?;
                    r.iter().zip(&rk).map(|(a, b)| (a - b) / h).collect()
                }
            };
            for (row, v) in col.into_iter().enumerate() {
                jac[row * m + k] = v;
            }
        }
        let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = solve_linear(jac, neg_r)
            .ok_or_else(|| Error::SolverFailed("singular Jacobian".into()))?;
        // backtracking line search on the residual 2-norm
        let r2 = two_norm(&r);
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + s * d).collect();
            if let Some(rc) = ctx.residuals(&cand, lambda) {
                if two_norm(&rc) < r2 {
                    u = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !accepted {
            return Err(Error::SolverFailed(format!(
                "line search stalled at residual {rn:.3e}"
            )));
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER as u64,
        residual: inf_norm(&r),
    })
}

/// Walks the continuation path downward from the upper endpoint of the
/// (p, q) orientation, stopping at each target in `targets` (which must be
/// sorted descending and lie strictly below E(p||q)). Returns the unknown
/// vector at each target.
fn continue_through(
    ctx: &SolveCtx,
    lam_bar: f64,
    targets: &[f64],
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(targets.len());
    // exact solution at the endpoint: p's own marginals, slope 0
    let pmx = ctx.p.marginal_x();
    let pmy = ctx.p.marginal_y();
    let mut u: Vec<f64> = pmx[1..]
        .iter()
        .chain(pmy[1..].iter())
        .copied()
        .chain(std::iter::once(0.0))
        .collect();
    let mut lam = lam_bar;
    for &target in targets {
        if target >= lam {
            return Err(Error::InvalidInput(
                "continuation targets must descend".into(),
            ));
        }
        while lam > target {
            let mut step = MAX_LAMBDA_STEP.min(lam - target);
            loop {
                let trial = lam - step;
                match newton(ctx, trial, u.clone(), tol) {
                    Ok((nu, _)) => {
                        u = nu;
                        lam = trial;
                        break;
                    }
                    Err(e) => {
                        step *= 0.5;
                        if step < MIN_LAMBDA_STEP {
                            return Err(Error::SolverFailed(format!(
                                "continuation stalled near lambda = {lam:.6} ({e})"
                            )));
                        }
                    }
                }
            }
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// Assembles a full solution from converged unknowns; `swapped` marks that
/// the unknowns came from solving the (q, p, -lambda) orientation.
fn assemble(
    p: &JointDistribution,
    q: &JointDistribution,
    lambda: f64,
    u: &[f64],
    swapped: bool,
) -> Result<LambdaSolution> {
    let ctx = SolveCtx::new(p, q);
    let m = ctx.unknowns();
    let (mx, my) = ctx
        .unpack(
            &u[..m - 1]
                .iter()
                .copied()
                .chain(std::iter::once(0.0))
                .collect::<Vec<_>>(),
        )
        .ok_or_else(|| Error::SolverFailed("converged marginals left the interior".into()))?;
    let (tp, tq) = ctx
        .project_pair(&mx, &my)
        .ok_or_else(|| Error::SolverFailed("projection failed at the solution".into()))?;
    let p_lambda = JointDistribution::from_flat(p.x_size(), p.y_size(), tp)?;
    let q_lambda = JointDistribution::from_flat(p.x_size(), p.y_size(), tq)?;
    let a_raw = u[m - 1];
    let a = if swapped {
        if a_raw.abs() < 1e-300 {
            return Err(Error::SolverFailed(
                "slope degenerated to zero on the swapped side".into(),
            ));
        }
        1.0 / a_raw
    } else {
        a_raw
    };
    let ny = p.y_size();
    let mut raw = vec![0.0; p.x_size() * ny];
    let mut b_acc = 0.0;
    for i in 0..p.x_size() {
        for j in 0..ny {
            let lp = (p_lambda.get(i, j) / p.get(i, j)).ln();
            let lq = (q_lambda.get(i, j) / q.get(i, j)).ln();
            raw[i * ny + j] = lq - lp;
            b_acc += lp - a * lq;
        }
    }
    let b = b_acc / (p.x_size() * ny) as f64;
    let llr = ProxyLlr::from_table(p.x_size(), ny, &raw)?;
    Ok(LambdaSolution {
        lambda,
        p_lambda,
        q_lambda,
        a,
        b,
        llr,
    })
}

/// Checks the strict mean ordering that separates the true solution branch
/// from degenerate ones; errors when it fails.
fn check_ordering(
    sol: &LambdaSolution,
    p: &JointDistribution,
    q: &JointDistribution,
) -> Result<()> {
    let mean_p = sol.llr.mean_under(p);
    let mean_q = sol.llr.mean_under(q);
    if !(mean_q < sol.lambda && sol.lambda < mean_p) {
        return Err(Error::SolverFailed(format!(
            "mean ordering violated: E_Q = {mean_q:.6e}, lambda = {:.6e}, E_P = {mean_p:.6e}",
            sol.lambda
        )));
    }
    Ok(())
}

/// Solution at one of the interval endpoints, where the system degenerates
/// and the pair is known in closed form via a single projection.
pub fn endpoint_solution(
    p: &JointDistribution,
    q: &JointDistribution,
    which: EndpointSide,
) -> Result<LambdaSolution> {
    if p.x_size() != q.x_size() || p.y_size() != q.y_size() {
        return Err(Error::DimensionMismatch("pair alphabets".into()));
    }
    let nx = p.x_size();
    let ny = p.y_size();
    match which {
        EndpointSide::Upper => {
            let proj = project_onto_marginals(
                q,
                &p.marginal_x(),
                &p.marginal_y(),
                INNER_IPF_TOL,
                INNER_IPF_MAX_ITER,
            )?;
            let mut raw = vec![0.0; nx * ny];
            for i in 0..nx {
                for j in 0..ny {
                    raw[i * ny + j] = (proj.projection.get(i, j) / q.get(i, j)).ln();
                }
            }
            let llr = ProxyLlr::from_table(nx, ny, &raw)?;
            Ok(LambdaSolution {
                lambda: proj.value,
                p_lambda: p.clone(),
                q_lambda: proj.projection,
                a: 0.0,
                b: 0.0,
                llr,
            })
        }
        EndpointSide::Lower => {
            let proj = project_onto_marginals(
                p,
                &q.marginal_x(),
                &q.marginal_y(),
                INNER_IPF_TOL,
                INNER_IPF_MAX_ITER,
            )?;
            let mut raw = vec![0.0; nx * ny];
            for i in 0..nx {
                for j in 0..ny {
                    raw[i * ny + j] = -((proj.projection.get(i, j) / p.get(i, j)).ln());
                }
            }
            let llr = ProxyLlr::from_table(nx, ny, &raw)?;
            Ok(LambdaSolution {
                lambda: -proj.value,
                p_lambda: proj.projection,
                q_lambda: q.clone(),
                a: f64::INFINITY,
                b: 0.0,
                llr,
            })
        }
    }
}

/// Admissible open interval of the gap parameter: (-E(q||p), E(p||q)).
pub fn lambda_interval(p: &JointDistribution, q: &JointDistribution) -> Result<(f64, f64)> {
    let upper = projected_relative_entropy_with(p, q, INNER_IPF_TOL, INNER_IPF_MAX_ITER)?;
    let lower = -projected_relative_entropy_with(q, p, INNER_IPF_TOL, INNER_IPF_MAX_ITER)?;
    Ok((lower, upper))
}

/// Solves the defining system at one interior lambda.
pub fn solve_lambda_pair(
    p: &JointDistribution,
    q: &JointDistribution,
    lambda: f64,
    tol: f64,
) -> Result<LambdaSolution> {
    if p.x_size() != q.x_size() || p.y_size() != q.y_size() {
        return Err(Error::DimensionMismatch("pair alphabets".into()));
    }
    let (lam_low, lam_bar) = lambda_interval(p, q)?;
    if !(lambda > lam_low + ENDPOINT_MARGIN && lambda < lam_bar - ENDPOINT_MARGIN) {
        return Err(Error::OutOfRange(format!(
            "lambda = {lambda:.9} is outside the open interval ({lam_low:.9}, {lam_bar:.9}); \
             use the endpoint solution at the boundary"
        )));
    }
    let mid = 0.5 * (lam_low + lam_bar);
    let try_upper = |tol: f64| -> Result<LambdaSolution> {
        let ctx = SolveCtx::new(p, q);
        let us = continue_through(&ctx, lam_bar, &[lambda], tol)?;
        let sol = assemble(p, q, lambda, &us[0], false)?;
        check_ordering(&sol, p, q)?;
        Ok(sol)
    };
    let try_lower = |tol: f64| -> Result<LambdaSolution> {
        let ctx = SolveCtx::new(q, p);
        let us = continue_through(&ctx, -lam_low, &[-lambda], tol)?;
        let sol = assemble(p, q, lambda, &us[0], true)?;
        check_ordering(&sol, p, q)?;
        Ok(sol)
    };
    if lambda >= mid {
        try_upper(tol).or_else(|first| try_lower(tol).map_err(|_| first))
    } else {
        try_lower(tol).or_else(|first| try_upper(tol).map_err(|_| first))
    }
}

/// Solves at every lambda in the grid, reusing continuation work within
/// each half of the interval. Values within [`ENDPOINT_MARGIN`] of an
/// endpoint resolve to the endpoint solution; values outside the closed
/// interval are errors.
pub fn solve_lambda_grid(
    p: &JointDistribution,
    q: &JointDistribution,
    lambdas: &[f64],
    tol: f64,
) -> Result<Vec<LambdaSolution>> {
    let (lam_low, lam_bar) = lambda_interval(p, q)?;
    let mid = 0.5 * (lam_low + lam_bar);
    #[derive(Clone, Copy)]
    enum Kind {
        EndUpper,
        EndLower,
        InteriorUpper,
        InteriorLower,
    }
    let mut kinds = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        if l > lam_bar + ENDPOINT_MARGIN || l < lam_low - ENDPOINT_MARGIN {
            return Err(Error::OutOfRange(format!(
                "lambda = {l:.9} outside [{lam_low:.9}, {lam_bar:.9}]"
            )));
        }
        if l >= lam_bar - ENDPOINT_MARGIN {
            kinds.push(Kind::EndUpper);
        } else if l <= lam_low + ENDPOINT_MARGIN {
            kinds.push(Kind::EndLower);
        } else if l >= mid {
            kinds.push(Kind::InteriorUpper);
        } else {
            kinds.push(Kind::InteriorLower);
        }
    }
    // gather each half, sorted for a single continuation walk
    let mut upper_targets: Vec<(usize, f64)> = lambdas
        .iter()
        .zip(&kinds)
        .enumerate()
        .filter_map(|(i, (l, k))| matches!(k, Kind::InteriorUpper).then_some((i, *l)))
        .collect();
    upper_targets.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut lower_targets: Vec<(usize, f64)> = lambdas
        .iter()
        .zip(&kinds)
        .enumerate()
        .filter_map(|(i, (l, k))| matches!(k, Kind::InteriorLower).then_some((i, *l)))
        .collect();
    // the swapped walk solves at -lambda, descending from E(q||p)
    lower_targets.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut out: Vec<Option<LambdaSolution>> = vec![None; lambdas.len()];
    if !upper_targets.is_empty() {
        let ctx = SolveCtx::new(p, q);
        let targets: Vec<f64> = upper_targets.iter().map(|&(_, l)| l).collect();
        let us = continue_through(&ctx, lam_bar, &targets, tol)?;
        for ((idx, l), u) in upper_targets.iter().zip(us) {
            let sol = assemble(p, q, *l, &u, false)?;
            check_ordering(&sol, p, q)?;
            out[*idx] = Some(sol);
        }
    }
    if !lower_targets.is_empty() {
        let ctx = SolveCtx::new(q, p);
        let targets: Vec<f64> = lower_targets.iter().map(|&(_, l)| -l).collect();
        let us = continue_through(&ctx, -lam_low, &targets, tol)?;
        for ((idx, l), u) in lower_targets.iter().zip(us) {
            let sol = assemble(p, q, *l, &u, true)?;
            check_ordering(&sol, p, q)?;
            out[*idx] = Some(sol);
        }
    }
    for (i, k) in kinds.iter().enumerate() {
        match k {
            Kind::EndUpper => out[i] = Some(endpoint_solution(p, q, EndpointSide::Upper)?),
            Kind::EndLower => out[i] = Some(endpoint_solution(p, q, EndpointSide::Lower)?),
            _ => {}
        }
    }
    Ok(out
        .into_iter()
        .map(|s| s.expect("every grid point resolved"))
        .collect())
}

/// Solves for the lambda whose P-side divergence D(p_lambda || p) equals a
/// prescribed type-I exponent `r`, by bisection on the monotone map
/// lambda -> D(p_lambda || p).
pub fn solve_for_rate(
    p: &JointDistribution,
    q: &JointDistribution,
    r: f64,
    tol: f64,
) -> Result<LambdaSolution> {
    let (lam_low, lam_bar) = lambda_interval(p, q)?;
    let e_qp = -lam_low;
    if !(r >= -1e-12 && r <= e_qp + 1e-9) {
        return Err(Error::OutOfRange(format!(
            "r = {r:.9} outside [0, {e_qp:.9}]"
        )));
    }
    if r <= 1e-9 {
        return endpoint_solution(p, q, EndpointSide::Upper);
    }
    if r >= e_qp - 1e-9 {
        return endpoint_solution(p, q, EndpointSide::Lower);
    }
    let d_p_at = |sol: &LambdaSolution| kl_tables(sol.p_lambda.cells(), p.cells());
    // D(p_lambda || p) decreases in lambda: bracket then bisect
    let mut lo = lam_low + ENDPOINT_MARGIN * 10.0;
    let mut hi = lam_bar - ENDPOINT_MARGIN * 10.0;
    let mut best: Option<LambdaSolution> = None;
    for _ in 0..64 {
        let midl = 0.5 * (lo + hi);
        let sol = solve_lambda_pair(p, q, midl, tol)?;
        let d = d_p_at(&sol);
        let done = (d - r).abs() <= 1e-11 || (hi - lo) < 1e-13;
        best = Some(sol);
        if done {
            break;
        }
        if d > r {
            lo = midl;
        } else {
            hi = midl;
        }
    }
    best.ok_or_else(|| Error::SolverFailed("rate bisection produced no iterate".into()))
}

/// Best type-II exponent at type-I exponent `r`:
/// the minimum of D(. || q) over first arguments whose projected relative
/// entropy against p is at most r.
pub fn exponent_f(p: &JointDistribution, q: &JointDistribution, r: f64) -> Result<f64> {
    let sol = solve_for_rate(p, q, r, DEFAULT_SOLVER_TOL)?;
    Ok(kl_tables(sol.q_lambda.cells(), q.cells()))
}

/// Gap value achieving type-I exponent `r`: -r + F(r); strictly decreasing.
pub fn lambda_of_r(p: &JointDistribution, q: &JointDistribution, r: f64) -> Result<f64> {
    let sol = solve_for_rate(p, q, r, DEFAULT_SOLVER_TOL)?;
    Ok(sol.lambda)
}

/// Which error exponent a tilted family refines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TiltSide {
    /// Family through P; exponent of the type-I error.
    PSide,
    /// Family through Q; exponent of the type-II error.
    QSide,
}

/// One-parameter exponential family spanned by tilting `base` along an
/// additive statistic.
#[derive(Clone, Debug)]
pub struct TiltedFamily {
    base: JointDistribution,
    llr: ProxyLlr,
    side: TiltSide,
}

impl TiltedFamily {
    pub fn new(base: JointDistribution, llr: ProxyLlr, side: TiltSide) -> Result<Self> {
        if base.x_size() != llr.x_size() || base.y_size() != llr.y_size() {
            return Err(Error::DimensionMismatch("base vs llr".into()));
        }
        Ok(Self { base, llr, side })
    }

    pub fn side(&self) -> TiltSide {
        self.side
    }

    pub fn base(&self) -> &JointDistribution {
        &self.base
    }

    pub fn llr(&self) -> &ProxyLlr {
        &self.llr
    }

    /// Log-partition of the tilt: log sum of base * exp(s * Lambda).
    pub fn psi(&self, s: f64) -> f64 {
        let table = self.llr.table();
        let m = table
            .iter()
            .fold(f64::NEG_INFINITY, |acc, &l| acc.max(s * l));
        let mut z = 0.0;
        for (cell, &l) in self.base.cells().iter().zip(table) {
            z += cell * (s * l - m).exp();
        }
        m + z.ln()
    }

    /// Normalized tilted member at parameter `s`.
    pub fn member(&self, s: f64) -> Result<JointDistribution> {
        let table = self.llr.table();
        let psi = self.psi(s);
        let cells: Vec<f64> = self
            .base
            .cells()
            .iter()
            .zip(table)
            .map(|(cell, &l)| cell * (s * l - psi).exp())
            .collect();
        JointDistribution::from_flat(self.base.x_size(), self.base.y_size(), cells)
    }

    /// Mean of Lambda under the member at `s` (the derivative of psi).
    pub fn mean(&self, s: f64) -> f64 {
        let (m0, m1, _) = self.weighted_moments(s);
        m1 / m0
    }

    fn weighted_moments(&self, s: f64) -> (f64, f64, f64) {
        let table = self.llr.table();
        let shift = table
            .iter()
            .fold(f64::NEG_INFINITY, |acc, &l| acc.max(s * l));
        let mut w0 = 0.0;
        let mut w1 = 0.0;
        let mut w2 = 0.0;
        for (cell, &l) in self.base.cells().iter().zip(table) {
            let w = cell * (s * l - shift).exp();
            w0 += w;
            w1 += w * l;
            w2 += w * l * l;
        }
        (w0, w1, w2)
    }

    /// Variance of Lambda under the member at `s`.
    pub fn variance(&self, s: f64) -> f64 {
        let (w0, w1, w2) = self.weighted_moments(s);
        let mean = w1 / w0;
        (w2 / w0 - mean * mean).max(0.0)
    }

    /// Unique parameter with mean equal to `tau`; requires `tau` strictly
    /// between the extreme values of Lambda.
    pub fn inverse_tilt(&self, tau: f64) -> Result<f64> {
        let lo = self.llr.min_value();
        let hi = self.llr.max_value();
        if hi - lo < 1e-12 {
            return Err(Error::Degenerate(
                "statistic is constant; every tilt has the same mean".into(),
            ));
        }
        if !(tau > lo && tau < hi) {
            return Err(Error::OutOfRange(format!(
                "tau = {tau:.9} outside the attainable open interval ({lo:.9}, {hi:.9})"
            )));
        }
        // bracket the parameter, then bisect + Newton polish
        let mut s_lo = -1.0;
        let mut s_hi = 1.0;
        let mut grow = 0;
        while self.mean(s_lo) > tau {
            s_lo *= 2.0;
            grow += 1;
            if grow > 60 {
                return Err(Error::SolverFailed(
                    "tilt bracketing failed (low side)".into(),
                ));
            }
        }
        grow = 0;
        while self.mean(s_hi) < tau {
            s_hi *= 2.0;
            grow += 1;
            if grow > 60 {
                return Err(Error::SolverFailed(
                    "tilt bracketing failed (high side)".into(),
                ));
            }
        }
        let mut s = 0.5 * (s_lo + s_hi);
        for _ in 0..200 {
            let m = self.mean(s);
            if (m - tau).abs() < 1e-14 * (1.0 + tau.abs()) {
                break;
            }
            if m < tau {
                s_lo = s;
            } else {
                s_hi = s;
            }
            // Newton step when it stays inside the bracket
            let v = self.variance(s);
            let cand = if v > 1e-300 {
                s + (tau - m) / v
            } else {
                f64::NAN
            };
            s = if cand.is_finite() && cand > s_lo && cand < s_hi {
                cand
            } else {
                0.5 * (s_lo + s_hi)
            };
            if s_hi - s_lo < 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        Ok(s)
    }

    /// D(member at `s` || base) = s * mean(s) - psi(s).
    pub fn divergence_at(&self, s: f64) -> f64 {
        s * self.mean(s) - self.psi(s)
    }

    /// Parameter and divergence at a prescribed mean `tau`.
    pub fn divergence_for_tau(&self, tau: f64) -> Result<(f64, f64)> {
        let s = self.inverse_tilt(tau)?;
        Ok((s, s * tau - self.psi(s)))
    }
}
