//! Exact and simulated finite-blocklength error probabilities.
//!
//! Every scheme in this crate decides from the pair of marginal types, so
//! exact error probabilities only need the probability mass of each
//! marginal-pair equivalence class under both hypotheses. The table is
//! built in one pass over all joint types, accumulating class masses in
//! log space; its size is the number of distinct marginal pairs, far
//! smaller than the number of joint types.

use std::collections::HashMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::{ln_gamma, JointDistribution, TypeEnumerator, DEFAULT_TYPE_CAP};
use crate::error::{Error, Result};
use crate::schemes::{
    hoeffding_decide, hoeffding_statistic, np_like_decide, Hypothesis, Scheme, DEFAULT_ORACLE_MAX_N,
};
use crate::solver::{
    solve_lambda_grid, EndpointSide, LambdaSolution, ProxyLlr, DEFAULT_SOLVER_TOL,
};

const MC_CHUNK: u64 = 16_384;

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
struct LogSumAcc {
    max: f64,
    sum: f64,
}

impl LogSumAcc {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }

    fn is_empty(&self) -> bool {
        self.max == f64::NEG_INFINITY
    }
}

/// One marginal-pair equivalence class with its exact log-mass under both
/// hypotheses.
#[derive(Clone, Debug)]
pub struct PairClass {
    pub x_counts: Vec<u64>,
    pub y_counts: Vec<u64>,
    pub log_p: f64,
    pub log_q: f64,
}

/// All marginal-pair classes at blocklength `n` with exact masses.
#[derive(Clone, Debug)]
pub struct MarginalPairTable {
    n: u64,
    x_size: usize,
    y_size: usize,
    classes: Vec<PairClass>,
}

impl MarginalPairTable {
    /// Aggregates joint-type masses into marginal-pair classes. Joint types
    /// beyond `cap` raise the capacity error; use the Monte-Carlo path for
    /// such blocklengths.
    pub fn build(p: &JointDistribution, q: &JointDistribution, n: u64, cap: u64) -> Result<Self> {
        if p.x_size() != q.x_size() || p.y_size() != q.y_size() {
            return Err(Error::DimensionMismatch("pair alphabets".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("blocklength must be positive".into()));
        }
        let nx = p.x_size();
        let ny = p.y_size();
        let lg: Vec<f64> = (0..=n).map(|k| ln_gamma((k + 1) as f64)).collect();
        let ln_p: Vec<f64> = p.cells().iter().map(|c| c.ln()).collect();
        let ln_q: Vec<f64> = q.cells().iter().map(|c| c.ln()).collect();
        let ln_n_fact = lg[n as usize];
        let mut map: HashMap<(Vec<u64>, Vec<u64>), (LogSumAcc, LogSumAcc)> = HashMap::new();
        for t in TypeEnumerator::new(n, nx, ny, cap)? {
            let mut coef = ln_n_fact;
            let mut dot_p = 0.0;
            let mut dot_q = 0.0;
            for (idx, &c) in t.counts().iter().enumerate() {
                coef -= lg[c as usize];
                let cf = c as f64;
                dot_p += cf * ln_p[idx];
                dot_q += cf * ln_q[idx];
            }
            let key = (t.marginal_counts_x(), t.marginal_counts_y());
            let entry = map
                .entry(key)
                .or_insert((LogSumAcc::new(), LogSumAcc::new()));
            entry.0.add(coef + dot_p);
            entry.1.add(coef + dot_q);
        }
        let mut classes: Vec<PairClass> = map
            .into_iter()
            .map(|((x_counts, y_counts), (ap, aq))| PairClass {
                x_counts,
                y_counts,
                log_p: ap.value(),
                log_q: aq.value(),
            })
            .collect();
        classes.sort_by(|a, b| {
            a.x_counts
                .cmp(&b.x_counts)
                .then(a.y_counts.cmp(&b.y_counts))
        });
        Ok(Self {
            n,
            x_size: nx,
            y_size: ny,
            classes,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn classes(&self) -> &[PairClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Exact error probabilities of a decision rule, in linear and log scale.
/// The log fields are `None` when the corresponding probability is exactly
/// zero.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ErrorRates {
    pub alpha: f64,
    pub beta: f64,
    pub log_alpha: Option<f64>,
    pub log_beta: Option<f64>,
}

fn rates_from(alpha_acc: LogSumAcc, beta_acc: LogSumAcc) -> ErrorRates {
    let (alpha, log_alpha) = if alpha_acc.is_empty() {
        (0.0, None)
    } else {
        let v = alpha_acc.value();
        (v.exp(), Some(v))
    };
    let (beta, log_beta) = if beta_acc.is_empty() {
        (0.0, None)
    } else {
        let v = beta_acc.value();
        (v.exp(), Some(v))
    };
    ErrorRates {
        alpha,
        beta,
        log_alpha,
        log_beta,
    }
}

/// Exact rates of the threshold rule on an additive statistic.
pub fn np_rates(table: &MarginalPairTable, llr: &ProxyLlr, tau: f64) -> ErrorRates {
    let mut alpha_acc = LogSumAcc::new();
    let mut beta_acc = LogSumAcc::new();
    for c in &table.classes {
        let stat = llr.statistic_from_counts(&c.x_counts, &c.y_counts, table.n);
        match np_like_decide(stat, tau) {
            Hypothesis::Alternative => alpha_acc.add(c.log_p),
            Hypothesis::Null => beta_acc.add(c.log_q),
        }
    }
    rates_from(alpha_acc, beta_acc)
}

/// Exact rates of the divergence-ball rule with radius `r`.
pub fn hoeffding_rates(
    table: &MarginalPairTable,
    p: &JointDistribution,
    r: f64,
) -> Result<ErrorRates> {
    let n = table.n as f64;
    let mut alpha_acc = LogSumAcc::new();
    let mut beta_acc = LogSumAcc::new();
    for c in &table.classes {
        let tx: Vec<f64> = c.x_counts.iter().map(|&v| v as f64 / n).collect();
        let ty: Vec<f64> = c.y_counts.iter().map(|&v| v as f64 / n).collect();
        let e = hoeffding_statistic(p, &tx, &ty)?;
        match hoeffding_decide(e, r) {
            Hypothesis::Alternative => alpha_acc.add(c.log_p),
            Hypothesis::Null => beta_acc.add(c.log_q),
        }
    }
    Ok(rates_from(alpha_acc, beta_acc))
}

/// Exact rates of the oracle rule at a fixed per-letter threshold.
pub fn oracle_rates(table: &MarginalPairTable, tau: f64) -> ErrorRates {
    let n = table.n as f64;
    let mut alpha_acc = LogSumAcc::new();
    let mut beta_acc = LogSumAcc::new();
    for c in &table.classes {
        let stat = (c.log_p - c.log_q) / n;
        match np_like_decide(stat, tau) {
            Hypothesis::Alternative => alpha_acc.add(c.log_p),
            Hypothesis::Null => beta_acc.add(c.log_q),
        }
    }
    rates_from(alpha_acc, beta_acc)
}

/// One evaluated operating point of a scheme.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorPoint {
    pub scheme: String,
    pub n: u64,
    pub param: f64,
    pub alpha: f64,
    pub beta: f64,
    pub log_alpha: Option<f64>,
    pub log_beta: Option<f64>,
}

impl ErrorPoint {
    fn new(scheme: &Scheme, n: u64, rates: ErrorRates) -> Self {
        Self {
            scheme: scheme.label().to_string(),
            n,
            param: scheme.param(),
            alpha: rates.alpha,
            beta: rates.beta,
            log_alpha: rates.log_alpha,
            log_beta: rates.log_beta,
        }
    }
}

/// Exact error trade-off of one scheme at one blocklength.
///
/// The threshold scheme first solves for its statistic; a gap parameter
/// within 1e-9 of either end of the admissible interval resolves to the
/// corresponding endpoint statistic.
pub fn exact_tradeoff(
    p: &JointDistribution,
    q: &JointDistribution,
    scheme: &Scheme,
    n: u64,
    cap: u64,
    tol: f64,
) -> Result<ErrorPoint> {
    scheme.validate()?;
    let rates = match scheme {
        Scheme::NpLike { lambda, tau } => {
            let sol = solve_lambda_grid(p, q, &[*lambda], tol)?
                .pop()
                .expect("one point");
            let table = MarginalPairTable::build(p, q, n, cap)?;
            np_rates(&table, &sol.llr, *tau)
        }
        Scheme::Hoeffding { r } => {
            let table = MarginalPairTable::build(p, q, n, cap)?;
            hoeffding_rates(&table, p, *r)?
        }
        Scheme::Oracle { tau } => {
            if !(p.is_binary() && q.is_binary()) {
                return Err(Error::InvalidInput(
                    "the oracle scheme is tabulated for binary alphabets only".into(),
                ));
            }
            if n > DEFAULT_ORACLE_MAX_N {
                return Err(Error::InvalidInput(format!(
                    "oracle evaluation is capped at n = {DEFAULT_ORACLE_MAX_N}"
                )));
            }
            let table = MarginalPairTable::build(p, q, n, cap)?;
            oracle_rates(&table, *tau)
        }
    };
    Ok(ErrorPoint::new(scheme, n, rates))
}

/// A reusable solved statistic for sweeping thresholds or blocklengths
/// without re-solving the pair system.
pub fn solve_scheme_llr(
    p: &JointDistribution,
    q: &JointDistribution,
    lambda: f64,
    tol: f64,
) -> Result<LambdaSolution> {
    Ok(solve_lambda_grid(p, q, &[lambda], tol)?
        .pop()
        .expect("one point"))
}

/// Monte-Carlo estimate of a scheme's error probabilities.
#[derive(Clone, Debug, Serialize)]
pub struct McEstimate {
    pub scheme: String,
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Half width of the 95% normal-approximation interval for alpha.
    pub alpha_half_width: f64,
    /// Half width of the 95% normal-approximation interval for beta.
    pub beta_half_width: f64,
}

fn cumulative(cells: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    cells
        .iter()
        .map(|c| {
            acc += c;
            acc
        })
        .collect()
}

fn sample_marginal_counts(
    rng: &mut ChaCha8Rng,
    cum: &[f64],
    ny: usize,
    n: u64,
    cx: &mut [u64],
    cy: &mut [u64],
) {
    cx.iter_mut().for_each(|v| *v = 0);
    cy.iter_mut().for_each(|v| *v = 0);
    let scale = 1.0 / (1u64 << 53) as f64;
    for _ in 0..n {
        let u = (rng.next_u64() >> 11) as f64 * scale;
        let mut k = 0usize;
        while k + 1 < cum.len() && u >= cum[k] {
            k += 1;
        }
        cx[k / ny] += 1;
        cy[k % ny] += 1;
    }
}

/// Simulates both error probabilities with a fixed-seed deterministic
/// stream layout: chunk `c` of the null draws uses substream `2c`, chunk
/// `c` of the alternative draws substream `2c + 1`, so results are
/// reproducible bit for bit for a given seed and independent of chunking
/// internals. The oracle scheme has no per-sample decision function and is
/// rejected here.
pub fn monte_carlo_tradeoff(
    p: &JointDistribution,
    q: &JointDistribution,
    scheme: &Scheme,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    scheme.validate()?;
    if trials == 0 {
        return Err(Error::InvalidInput("trial count must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("blocklength must be positive".into()));
    }
    enum Rule {
        Np { llr: ProxyLlr, tau: f64 },
        Hoeffding { r: f64 },
    }
    let rule = match scheme {
        Scheme::NpLike { lambda, tau } => {
            let sol = solve_scheme_llr(p, q, *lambda, DEFAULT_SOLVER_TOL)?;
            Rule::Np {
                llr: sol.llr,
                tau: *tau,
            }
        }
        Scheme::Hoeffding { r } => Rule::Hoeffding { r: *r },
        Scheme::Oracle { .. } => {
            return Err(Error::InvalidInput(
                "the oracle scheme is a frontier benchmark; it has no sampling evaluator".into(),
            ))
        }
    };
    let nx = p.x_size();
    let ny = p.y_size();
    let cum_p = cumulative(p.cells());
    let cum_q = cumulative(q.cells());
    let mut cx = vec![0u64; nx];
    let mut cy = vec![0u64; ny];
    let decide = |cx: &[u64], cy: &[u64]| -> Result<Hypothesis> {
        match &rule {
            Rule::Np { llr, tau } => Ok(np_like_decide(llr.statistic_from_counts(cx, cy, n), *tau)),
            Rule::Hoeffding { r } => {
                let tx: Vec<f64> = cx.iter().map(|&v| v as f64 / n as f64).collect();
                let ty: Vec<f64> = cy.iter().map(|&v| v as f64 / n as f64).collect();
                Ok(hoeffding_decide(hoeffding_statistic(p, &tx, &ty)?, *r))
            }
        }
    };
    let mut alpha_errors = 0u64;
    let mut beta_errors = 0u64;
    let chunks = trials.div_ceil(MC_CHUNK);
    for c in 0..chunks {
        let in_chunk = MC_CHUNK.min(trials - c * MC_CHUNK);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * c);
        for _ in 0..in_chunk {
            sample_marginal_counts(&mut rng, &cum_p, ny, n, &mut cx, &mut cy);
            if decide(&cx, &cy)? == Hypothesis::Alternative {
                alpha_errors += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * c + 1);
        for _ in 0..in_chunk {
            sample_marginal_counts(&mut rng, &cum_q, ny, n, &mut cx, &mut cy);
            if decide(&cx, &cy)? == Hypothesis::Null {
                beta_errors += 1;
            }
        }
    }
    let t = trials as f64;
    let alpha_hat = alpha_errors as f64 / t;
    let beta_hat = beta_errors as f64 / t;
    let hw = |p_hat: f64| 1.96 * (p_hat * (1.0 - p_hat) / t).sqrt();
    Ok(McEstimate {
        scheme: scheme.label().to_string(),
        n,
        trials,
        seed,
        alpha_hat,
        beta_hat,
        alpha_half_width: hw(alpha_hat),
        beta_half_width: hw(beta_hat),
    })
}

/// Closed-form finite-blocklength bound on the type-II error of the
/// threshold rule run at the upper-endpoint statistic with threshold equal
/// to the projected divergence: a Berry-Esseen-flavored refinement of the
/// plain exponential bound, with moments taken under the projection.
pub fn ppv_beta_bound(p: &JointDistribution, q: &JointDistribution, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("blocklength must be positive".into()));
    }
    let sol = crate::solver::endpoint_solution(p, q, EndpointSide::Upper)?;
    let tau = sol.lambda;
    let pstar = &sol.q_lambda;
    let table = sol.llr.table();
    let mut mean = 0.0;
    for (c, &l) in pstar.cells().iter().zip(table) {
        mean += c * l;
    }
    let mut var = 0.0;
    let mut t3 = 0.0;
    for (c, &l) in pstar.cells().iter().zip(table) {
        let d = l - mean;
        var += c * d * d;
        t3 += c * d.abs().powi(3);
    }
    let sigma = var.sqrt();
    if sigma < 1e-9 {
        return Err(Error::Degenerate(
            "the hypotheses coincide after projection; the refined bound needs positive variance"
                .into(),
        ));
    }
    let nf = n as f64;
    let constant = 2.0 * ((2.0f64).ln() / (2.0 * std::f64::consts::PI).sqrt() + 12.0 * t3 / var);
    Ok(constant * (-tau * nf).exp() / (sigma * nf.sqrt()))
}

/// Exhaustive evaluation over every outcome sequence: probabilities come
/// from per-sequence products, with no type counting or multinomial
/// weights. Exponential in `n`; intended as an independent cross-check for
/// small blocklengths.
pub fn brute_force_rates<F>(
    p: &JointDistribution,
    q: &JointDistribution,
    n: u64,
    decide: F,
) -> Result<(f64, f64)>
where
    F: Fn(&[u64], &[u64]) -> Hypothesis,
{
    let nx = p.x_size();
    let ny = p.y_size();
    let m = (nx * ny) as u128;
    let exp = u32::try_from(n).map_err(|_| Error::InvalidInput("n too large".into()))?;
    let total = m.checked_pow(exp).unwrap_or(u128::MAX);
    if total > 20_000_000 {
        return Err(Error::CapExceeded {
            needed: total,
            cap: 20_000_000,
        });
    }
    let mut alpha = 0.0f64;
    let mut beta = 0.0f64;
    let mut digits = vec![0usize; n as usize];
    let mut cx = vec![0u64; nx];
    let mut cy = vec![0u64; ny];
    for _ in 0..total {
        cx.iter_mut().for_each(|v| *v = 0);
        cy.iter_mut().for_each(|v| *v = 0);
        let mut prob_p = 1.0f64;
        let mut prob_q = 1.0f64;
        for &d in &digits {
            cx[d / ny] += 1;
            cy[d % ny] += 1;
            prob_p *= p.cells()[d];
            prob_q *= q.cells()[d];
        }
        match decide(&cx, &cy) {
            Hypothesis::Alternative => alpha += prob_p,
            Hypothesis::Null => beta += prob_q,
        }
        // odometer step
        for slot in digits.iter_mut() {
            *slot += 1;
            if *slot < nx * ny {
                break;
            }
            *slot = 0;
        }
    }
    Ok((alpha, beta))
}

/// Default joint-type budget re-exported for callers wiring up the cap.
pub fn default_type_cap() -> u64 {
    DEFAULT_TYPE_CAP
}
