//! Decision rules that see only the pair of marginal types.
//!
//! Three schemes share the same observation model: each terminal reports
//! the empirical type of its own letter sequence, and the tester accepts or
//! rejects from the pair (t_x, t_y) alone.
//!
//! * the threshold rule on the additive proxy statistic,
//! * the divergence-ball rule that accepts when the pair can be coupled
//!   close to the null (the classical Han-Kobayashi construction),
//! * the oracle: a Neyman-Pearson test on the exact probability of the
//!   observed marginal pair, which is the most powerful symmetric decision
//!   and serves as the benchmark frontier.
//!
//! Ties go to the alternative, with a fixed 1e-12 margin so that decisions
//! stay stable under floating-point noise.

use serde::{Deserialize, Serialize};

use crate::dist::{ln_gamma, JointDistribution};
use crate::error::{Error, Result};
use crate::geometry::ipf_table;

/// Margin around a threshold inside which a comparison counts as a tie.
pub const TIE_MARGIN: f64 = 1e-12;

/// Largest blocklength for which the oracle frontier is tabulated by
/// default.
pub const DEFAULT_ORACLE_MAX_N: u64 = 60;

const HOEFFDING_IPF_TOL: f64 = 1e-14;
const HOEFFDING_IPF_MAX_ITER: u64 = 50_000;

/// Outcome of a binary test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// The null (the pair was drawn from P).
    Null,
    /// The alternative (the pair was drawn from Q).
    Alternative,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hypothesis::Null => write!(f, "H0"),
            Hypothesis::Alternative => write!(f, "H1"),
        }
    }
}

/// A parametrized decision rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Scheme {
    /// Accept the null when the additive proxy statistic at gap `lambda`
    /// exceeds `tau`. Setting `tau = lambda` recovers the canonical
    /// operating point.
    NpLike { lambda: f64, tau: f64 },
    /// Accept the null when the marginal pair can be coupled within
    /// divergence `r` of the null.
    Hoeffding { r: f64 },
    /// Accept the null when the per-letter log-likelihood ratio of the
    /// observed marginal pair exceeds `tau`.
    Oracle { tau: f64 },
}

impl Scheme {
    /// Short name used in tabular output.
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::NpLike { .. } => "np-like",
            Scheme::Hoeffding { .. } => "hoeffding",
            Scheme::Oracle { .. } => "oracle",
        }
    }

    /// The scheme's headline parameter (threshold or radius).
    pub fn param(&self) -> f64 {
        match self {
            Scheme::NpLike { tau, .. } => *tau,
            Scheme::Hoeffding { r } => *r,
            Scheme::Oracle { tau } => *tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scheme::NpLike { lambda, tau } => {
                if !lambda.is_finite() || !tau.is_finite() {
                    return Err(Error::InvalidInput(
                        "np-like scheme needs finite lambda and tau".into(),
                    ));
                }
            }
            Scheme::Hoeffding { r } => {
                if !r.is_finite() || *r < 0.0 {
                    return Err(Error::InvalidInput(
                        "hoeffding scheme needs a finite radius r >= 0".into(),
                    ));
                }
            }
            Scheme::Oracle { tau } => {
                if !tau.is_finite() {
                    return Err(Error::InvalidInput(
                        "oracle scheme needs a finite tau".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::NpLike { lambda, tau } => write!(f, "np-like(lambda={lambda}, tau={tau})"),
            Scheme::Hoeffding { r } => write!(f, "hoeffding(r={r})"),
            Scheme::Oracle { tau } => write!(f, "oracle(tau={tau})"),
        }
    }
}

/// Threshold rule: null iff the statistic clears `tau` by more than the tie
/// margin.
pub fn np_like_decide(statistic: f64, tau: f64) -> Hypothesis {
    if statistic > tau + TIE_MARGIN {
        Hypothesis::Null
    } else {
        Hypothesis::Alternative
    }
}

/// Smallest divergence against `p` over joints with the given marginals.
/// The marginals may contain zeros (empirical types usually do).
pub fn hoeffding_statistic(p: &JointDistribution, tx: &[f64], ty: &[f64]) -> Result<f64> {
    if tx.len() != p.x_size() || ty.len() != p.y_size() {
        return Err(Error::DimensionMismatch("type vs alphabet".into()));
    }
    for &v in tx.iter().chain(ty.iter()) {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidInput(
                "marginal types must be nonnegative".into(),
            ));
        }
    }
    let coupled = ipf_table(
        p.cells(),
        p.x_size(),
        p.y_size(),
        tx,
        ty,
        HOEFFDING_IPF_TOL,
        HOEFFDING_IPF_MAX_ITER,
        None,
    )?;
    Ok(crate::dist::kl_tables(&coupled.0, p.cells()))
}

/// Divergence-ball rule: null iff the coupling distance is below `r` by
/// more than the tie margin.
pub fn hoeffding_decide(divergence: f64, r: f64) -> Hypothesis {
    if divergence < r - TIE_MARGIN {
        Hypothesis::Null
    } else {
        Hypothesis::Alternative
    }
}

/// One equivalence class of samples sharing the same marginal pair, with
/// its exact log-probability under both hypotheses. Binary alphabets only.
#[derive(Clone, Debug)]
pub struct OracleClass {
    /// Count of letter 1 in the x-stream.
    pub x1_count: u64,
    /// Count of letter 1 in the y-stream.
    pub y1_count: u64,
    /// Per-letter log-likelihood ratio of the class, (log P - log Q) / n.
    pub statistic: f64,
    pub log_p: f64,
    pub log_q: f64,
}

/// Exact per-class log-probabilities of every marginal pair at blocklength
/// `n`, for binary alphabets. The class mass sums the multinomial weights
/// of all contingency tables compatible with the pair.
pub fn oracle_marginal_type_llr(
    p: &JointDistribution,
    q: &JointDistribution,
    n: u64,
    max_n: u64,
) -> Result<Vec<OracleClass>> {
    if !(p.is_binary() && q.is_binary()) {
        return Err(Error::InvalidInput(
            "the oracle frontier is tabulated for binary alphabets only".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidInput("blocklength must be positive".into()));
    }
    if n > max_n {
        return Err(Error::InvalidInput(format!(
            "oracle tabulation is capped at n = {max_n}; requested n = {n}"
        )));
    }
    let lg: Vec<f64> = (0..=n).map(|k| ln_gamma((k + 1) as f64)).collect();
    let ln_p: Vec<f64> = p.cells().iter().map(|c| c.ln()).collect();
    let ln_q: Vec<f64> = q.cells().iter().map(|c| c.ln()).collect();
    let ln_n_fact = lg[n as usize];
    let mut out = Vec::with_capacity(((n + 1) * (n + 1)) as usize);
    for cx1 in 0..=n {
        for cy1 in 0..=n {
            let k_lo = cx1.saturating_sub(n - cy1).max(cy1.saturating_sub(n - cx1));
            let k_hi = cx1.min(cy1);
            let mut terms_p = Vec::with_capacity((k_hi - k_lo + 1) as usize);
            let mut terms_q = Vec::with_capacity((k_hi - k_lo + 1) as usize);
            for k in k_lo..=k_hi {
                let c00 = n + k - cx1 - cy1;
                let c01 = cy1 - k;
                let c10 = cx1 - k;
                let c11 = k;
                let coef = ln_n_fact
                    - lg[c00 as usize]
                    - lg[c01 as usize]
                    - lg[c10 as usize]
                    - lg[c11 as usize];
                let counts = [c00 as f64, c01 as f64, c10 as f64, c11 as f64];
                let dot =
                    |ln_d: &[f64]| -> f64 { counts.iter().zip(ln_d).map(|(c, l)| c * l).sum() };
                terms_p.push(coef + dot(&ln_p));
                terms_q.push(coef + dot(&ln_q));
            }
            let log_p = log_sum_exp(&terms_p);
            let log_q = log_sum_exp(&terms_q);
            out.push(OracleClass {
                x1_count: cx1,
                y1_count: cy1,
                statistic: (log_p - log_q) / n as f64,
                log_p,
                log_q,
            });
        }
    }
    Ok(out)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = terms.iter().map(|&t| (t - m).exp()).sum();
    m + s.ln()
}

/// One deterministic operating point of the oracle.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OraclePoint {
    /// Threshold realizing the point (accept iff statistic > tau).
    pub tau: f64,
    /// Type-I error probability.
    pub alpha: f64,
    /// Type-II error probability.
    pub beta: f64,
    /// ln alpha; negative infinity when alpha is exactly zero.
    pub log_alpha: f64,
    /// ln beta; negative infinity when beta is exactly zero.
    pub log_beta: f64,
}

/// Full deterministic frontier of the oracle at blocklength `n`: one point
/// per distinct statistic value, plus the all-accepting point, ordered by
/// decreasing alpha. Randomized tests achieve the segments in between; see
/// [`envelope_beta_at`].
pub fn oracle_tradeoff(
    p: &JointDistribution,
    q: &JointDistribution,
    n: u64,
    max_n: u64,
) -> Result<Vec<OraclePoint>> {
    let mut classes = oracle_marginal_type_llr(p, q, n, max_n)?;
    classes.sort_by(|a, b| b.statistic.total_cmp(&a.statistic));
    // group classes whose statistics coincide: a threshold cannot separate
    // them, so they enter the accepting region together
    let mut groups: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for c in &classes {
        match groups.last_mut() {
            Some((s, gp, gq)) if (*s - c.statistic).abs() <= 1e-12 => {
                gp.push(c.log_p);
                gq.push(c.log_q);
            }
            _ => groups.push((c.statistic, vec![c.log_p], vec![c.log_q])),
        }
    }
    let group_log_p: Vec<f64> = groups.iter().map(|(_, gp, _)| log_sum_exp(gp)).collect();
    let group_log_q: Vec<f64> = groups.iter().map(|(_, _, gq)| log_sum_exp(gq)).collect();
    let m = groups.len();
    // suffix sums of null mass (rejected classes), prefix sums of
    // alternative mass (accepted classes)
    let mut log_alpha = vec![f64::NEG_INFINITY; m + 1];
    for g in (0..m).rev() {
        log_alpha[g] = log_sum_exp(&[log_alpha[g + 1], group_log_p[g]]);
    }
    let mut points = Vec::with_capacity(m + 1);
    let mut log_beta_acc = f64::NEG_INFINITY;
    for g in 0..m {
        points.push(OraclePoint {
            tau: groups[g].0,
            alpha: log_alpha[g].exp(),
            beta: log_beta_acc.exp(),
            log_alpha: log_alpha[g],
            log_beta: log_beta_acc,
        });
        log_beta_acc = log_sum_exp(&[log_beta_acc, group_log_q[g]]);
    }
    // sentinel threshold below every statistic: accept everything
    points.push(OraclePoint {
        tau: groups[m - 1].0 - 1.0,
        alpha: f64::NEG_INFINITY.exp(),
        beta: log_beta_acc.exp(),
        log_alpha: f64::NEG_INFINITY,
        log_beta: log_beta_acc,
    });
    Ok(points)
}

/// Best type-II error achievable by a randomized symmetric test at type-I
/// level `alpha`: the lower convex hull of the oracle frontier, evaluated
/// by linear interpolation.
pub fn envelope_beta_at(points: &[OraclePoint], alpha: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.alpha, p.beta)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() <= f64::EPSILON && (a.1 - b.1).abs() <= f64::EPSILON);
    // lower hull, left to right (monotone chain)
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for pt in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    if alpha <= hull[0].0 {
        return hull[0].1;
    }
    if alpha >= hull[hull.len() - 1].0 {
        return hull[hull.len() - 1].1;
    }
    for w in hull.windows(2) {
        let (a0, b0) = w[0];
        let (a1, b1) = w[1];
        if alpha <= a1 {
            let t = (alpha - a0) / (a1 - a0);
            return b0 + t * (b1 - b0);
        }
    }
    hull[hull.len() - 1].1
}
