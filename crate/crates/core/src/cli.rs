//! Command-line interface of the `mhtest` binary.
//!
//! Five subcommands cover the library surface: `project` for the
//! marginal-constrained divergence, `solve-lambda` for the pair system,
//! `tradeoff` for exact or simulated finite-n error probabilities,
//! `exponents` for the asymptotic curves, and `second-order` for the
//! normal-approximation regime. Distributions come from JSON files; output
//! goes to stdout or `--out` as CSV or JSON and is byte-stable for a given
//! input and seed.
//!
//! Exit codes: 0 success, 2 bad input, 3 numerical failure or a parameter
//! outside its admissible range, 4 workload over the enumeration cap.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dist::{JointDistribution, DEFAULT_TYPE_CAP};
use crate::error::{Error, Result};
use crate::exact::{
    hoeffding_rates, monte_carlo_tradeoff, np_rates, ErrorRates, MarginalPairTable,
};
use crate::geometry::{project_onto_marginals, DEFAULT_IPF_MAX_ITER};
use crate::schemes::{oracle_tradeoff, Scheme, DEFAULT_ORACLE_MAX_N};
use crate::solver::{solve_for_rate, solve_lambda_grid};
use crate::{asymptotics, dist};

/// Evenly spaced parameter grid, parsed from `start:end:steps` or a single
/// number.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub values: Vec<f64>,
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [single] => {
                let v: f64 = single
                    .parse()
                    .map_err(|_| Error::Parse(format!("grid '{s}': not a number")))?;
                if !v.is_finite() {
                    return Err(Error::Parse(format!("grid '{s}': not finite")));
                }
                Ok(GridSpec { values: vec![v] })
            }
            [a, b, steps] => {
                let a: f64 = a
                    .parse()
                    .map_err(|_| Error::Parse(format!("grid '{s}': bad start")))?;
                let b: f64 = b
                    .parse()
                    .map_err(|_| Error::Parse(format!("grid '{s}': bad end")))?;
                let steps: usize = steps
                    .parse()
                    .map_err(|_| Error::Parse(format!("grid '{s}': bad step count")))?;
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::Parse(format!("grid '{s}': not finite")));
                }
                if steps == 0 {
                    return Err(Error::Parse(format!("grid '{s}': needs at least one step")));
                }
                if steps == 1 {
                    return Ok(GridSpec { values: vec![a] });
                }
                let h = (b - a) / (steps - 1) as f64;
                Ok(GridSpec {
                    values: (0..steps).map(|k| a + h * k as f64).collect(),
                })
            }
            _ => Err(Error::Parse(format!(
                "grid '{s}': expected a number or start:end:steps"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Arguments shared by every subcommand.
#[derive(Args, Debug)]
pub struct IoArgs {
    /// Null-hypothesis distribution (JSON file)
    #[arg(long = "p", value_name = "FILE")]
    pub p: PathBuf,
    /// Alternative-hypothesis distribution (JSON file)
    #[arg(long = "q", value_name = "FILE")]
    pub q: PathBuf,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Parser, Debug)]
#[command(
    name = "mhtest",
    version,
    about = "Exact and asymptotic error trade-offs for zero-rate two-terminal hypothesis tests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Marginal-constrained relative entropy of the null against the
    /// alternative, with the minimizing coupling
    Project(ProjectArgs),
    /// Solve the aligned-pair system on a grid of gap values
    SolveLambda(SolveLambdaArgs),
    /// Exact or Monte-Carlo error probabilities of the decision schemes
    Tradeoff(TradeoffArgs),
    /// Large-deviation exponent curves
    Exponents(ExponentsArgs),
    /// Second-order (normal approximation) quantities
    SecondOrder(SecondOrderArgs),
}

#[derive(Args, Debug)]
#[command(
    after_help = "CSV schema: quantity,value with rows e, v, t3 (statistic moments \
under the null), e_pq, e_qp (both projected divergences), iterations_*/residual_* \
(projection diagnostics), p_star_<i>_<j>, q_star_<i>_<j> (minimizing couplings), and \
j_<i>_<j> (per-cell information density log(p_star/q))."
)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Residual tolerance of the alternating-scaling projection
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Args, Debug)]
#[command(
    after_help = "CSV schema: lambda,quantity,value with per-gap rows a, b \
(alignment slope and offset), divergence_null, divergence_alt, mean_null, mean_alt, \
the solver residual diagnostics, llr_x_<i>, llr_y_<j> (additive statistic parts), \
and the two member distributions null_member_<i>_<j>, alt_member_<i>_<j>."
)]
pub struct SolveLambdaArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Gap values, as start:end:steps or a single number
    #[arg(long = "lambda-grid", value_name = "GRID", allow_hyphen_values = true)]
    pub lambda_grid: GridSpec,
    /// Residual tolerance of the pair solver
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
}

#[derive(Args, Debug)]
#[command(
    after_help = "CSV schema: scheme,n,param,alpha,beta,log_alpha,log_beta. \
param is the threshold (np-like, oracle) or the radius (hoeffding); log fields are \
natural logs and stay empty when the error is exactly zero. Monte-Carlo runs keep \
the same columns; their half-widths appear in the JSON mirror."
)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Blocklengths, comma separated
    #[arg(long = "n", value_name = "N", value_delimiter = ',', required = true)]
    pub n: Vec<u64>,
    /// Gap grid for the threshold scheme (threshold tied to the gap)
    #[arg(long = "lambda-grid", value_name = "GRID", allow_hyphen_values = true)]
    pub lambda_grid: Option<GridSpec>,
    /// Radius grid for the divergence-ball scheme
    #[arg(long = "r-grid", value_name = "GRID")]
    pub r_grid: Option<GridSpec>,
    /// Also tabulate the oracle frontier (binary alphabets, small n)
    #[arg(long)]
    pub oracle: bool,
    /// Estimate by simulation instead of exact enumeration
    #[arg(long = "monte-carlo")]
    pub monte_carlo: bool,
    /// Trials per simulated operating point
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Seed for the simulation streams
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Budget on enumerated joint types per blocklength
    #[arg(long = "max-types", default_value_t = DEFAULT_TYPE_CAP)]
    pub max_types: u64,
    /// Residual tolerance of the pair solver
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
}

#[derive(Args, Debug)]
#[command(after_help = "CSV schema: kind,lambda,tau,exponent1,exponent2,a,\
theta_p_x,theta_p_y,theta_p_xy,theta_q_x,theta_q_y,theta_q_xy. kind is optimal, \
by-rate, or fixed-threshold; exponent1/exponent2 are the type-I/type-II decay \
rates in nats; the theta_* columns are semicolon-joined natural coordinates of \
the two attached distributions.")]
pub struct ExponentsArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Gap grid for the optimal curve; with --fixed-lambda these values
    /// are the thresholds of the fixed-gap sweep instead
    #[arg(long = "lambda-grid", value_name = "GRID", allow_hyphen_values = true)]
    pub lambda_grid: Option<GridSpec>,
    /// Type-I exponent grid, reported through the rate parametrization
    #[arg(long = "r-grid", value_name = "GRID")]
    pub r_grid: Option<GridSpec>,
    /// Hold the gap fixed here and sweep thresholds from --lambda-grid
    #[arg(
        long = "fixed-lambda",
        value_name = "LAMBDA",
        allow_negative_numbers = true
    )]
    pub fixed_lambda: Option<f64>,
    /// Residual tolerance of the pair solver
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
}

#[derive(Args, Debug)]
#[command(
    after_help = "CSV schema: quantity,eps,n,value with global rows e, v, t3 \
(eps and n empty) and per-(eps, n) rows feasible (0/1), tau (empty when the \
corrected level is out of range at this n), and minus_log_beta_approx."
)]
pub struct SecondOrderArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Target type-I levels, comma separated
    #[arg(
        long = "eps",
        value_name = "EPS",
        value_delimiter = ',',
        required = true
    )]
    pub eps: Vec<f64>,
    /// Blocklengths, comma separated
    #[arg(long = "n", value_name = "N", value_delimiter = ',', required = true)]
    pub n: Vec<u64>,
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f(x)).collect::<Vec<_>>().join(";")
}

fn rows_of(d: &JointDistribution) -> Vec<Vec<f64>> {
    (0..d.x_size())
        .map(|i| (0..d.y_size()).map(|j| d.get(i, j)).collect())
        .collect()
}

fn load_pair(io: &IoArgs) -> Result<(JointDistribution, JointDistribution)> {
    let p = JointDistribution::load_json(&io.p)?;
    let q = JointDistribution::load_json(&io.q)?;
    if p.x_size() != q.x_size() || p.y_size() != q.y_size() {
        return Err(Error::DimensionMismatch(format!(
            "{} is {}x{} but {} is {}x{}",
            io.p.display(),
            p.x_size(),
            p.y_size(),
            io.q.display(),
            q.x_size(),
            q.y_size()
        )));
    }
    Ok((p, q))
}

fn emit(io: &IoArgs, content: String) -> Result<()> {
    match &io.out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct ProjectReport {
    command: &'static str,
    p: String,
    q: String,
    tol: f64,
    e: f64,
    v: f64,
    t3: f64,
    e_pq: f64,
    e_qp: f64,
    iterations_pq: u64,
    residual_pq: f64,
    iterations_qp: u64,
    residual_qp: f64,
    p_star: Vec<Vec<f64>>,
    q_star: Vec<Vec<f64>>,
    j: Vec<Vec<f64>>,
}

fn validate_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput("tol must be positive".into()))
    }
}

fn run_project(args: &ProjectArgs) -> Result<()> {
    validate_tol(args.tol)?;
    let (p, q) = load_pair(&args.io)?;
    let toward_q = project_onto_marginals(
        &q,
        &p.marginal_x(),
        &p.marginal_y(),
        args.tol,
        DEFAULT_IPF_MAX_ITER,
    )?;
    let toward_p = project_onto_marginals(
        &p,
        &q.marginal_x(),
        &q.marginal_y(),
        args.tol,
        DEFAULT_IPF_MAX_ITER,
    )?;
    let stats = asymptotics::second_order_stats(&p, &q)?;
    let j = (0..p.x_size())
        .map(|i| {
            (0..p.y_size())
                .map(|y| (toward_q.projection.get(i, y) / q.get(i, y)).ln())
                .collect()
        })
        .collect();
    let report = ProjectReport {
        command: "project",
        p: args.io.p.display().to_string(),
        q: args.io.q.display().to_string(),
        tol: args.tol,
        e: stats.e,
        v: stats.v,
        t3: stats.t3,
        e_pq: toward_q.value,
        e_qp: toward_p.value,
        iterations_pq: toward_q.iterations,
        residual_pq: toward_q.residual,
        iterations_qp: toward_p.iterations,
        residual_qp: toward_p.residual,
        p_star: rows_of(&toward_q.projection),
        q_star: rows_of(&toward_p.projection),
        j,
    };
    let content = match args.io.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from("quantity,value\n");
            let _ = writeln!(out, "e,{}", fmt_f(report.e));
            let _ = writeln!(out, "v,{}", fmt_f(report.v));
            let _ = writeln!(out, "t3,{}", fmt_f(report.t3));
            let _ = writeln!(out, "e_pq,{}", fmt_f(report.e_pq));
            let _ = writeln!(out, "e_qp,{}", fmt_f(report.e_qp));
            let _ = writeln!(out, "iterations_pq,{}", report.iterations_pq);
            let _ = writeln!(out, "residual_pq,{}", fmt_f(report.residual_pq));
            let _ = writeln!(out, "iterations_qp,{}", report.iterations_qp);
            let _ = writeln!(out, "residual_qp,{}", fmt_f(report.residual_qp));
            for (name, table) in [
                ("p_star", &report.p_star),
                ("q_star", &report.q_star),
                ("j", &report.j),
            ] {
                for (i, row) in table.iter().enumerate() {
                    for (y, v) in row.iter().enumerate() {
                        let _ = writeln!(out, "{name}_{i}_{y},{}", fmt_f(*v));
                    }
                }
            }
            out
        }
    };
    emit(&args.io, content)
}

#[derive(Serialize)]
struct DiagnosticsReport {
    alignment_spread: f64,
    gap_residual: f64,
    marginal_tv: f64,
    tangent_residual: f64,
    parallel_residual: f64,
    decomposition_residual: f64,
}

#[derive(Serialize)]
struct SolutionReport {
    lambda: f64,
    a: f64,
    b: f64,
    divergence_null: f64,
    divergence_alt: f64,
    mean_null: f64,
    mean_alt: f64,
    llr_x: Vec<f64>,
    llr_y: Vec<f64>,
    null_member: Vec<Vec<f64>>,
    alt_member: Vec<Vec<f64>>,
    diagnostics: DiagnosticsReport,
}

#[derive(Serialize)]
struct SolveLambdaReport {
    command: &'static str,
    p: String,
    q: String,
    tol: f64,
    solutions: Vec<SolutionReport>,
}

fn run_solve_lambda(args: &SolveLambdaArgs) -> Result<()> {
    validate_tol(args.tol)?;
    let (p, q) = load_pair(&args.io)?;
    let sols = solve_lambda_grid(&p, &q, &args.lambda_grid.values, args.tol)?;
    let mut reports = Vec::with_capacity(sols.len());
    for sol in &sols {
        let d = sol.diagnostics(&p, &q)?;
        reports.push(SolutionReport {
            lambda: sol.lambda,
            a: sol.a,
            b: sol.b,
            divergence_null: dist::kl_divergence(&sol.p_lambda, &p)?,
            divergence_alt: dist::kl_divergence(&sol.q_lambda, &q)?,
            mean_null: sol.llr.mean_under(&p),
            mean_alt: sol.llr.mean_under(&q),
            llr_x: sol.llr.a1().to_vec(),
            llr_y: sol.llr.a2().to_vec(),
            null_member: rows_of(&sol.p_lambda),
            alt_member: rows_of(&sol.q_lambda),
            diagnostics: DiagnosticsReport {
                alignment_spread: d.alignment_spread,
                gap_residual: d.lambda_residual,
                marginal_tv: d.marginal_tv,
                tangent_residual: d.tangent_residual,
                parallel_residual: d.parallel_residual,
                decomposition_residual: d.decomposition_residual,
            },
        });
    }
    let report = SolveLambdaReport {
        command: "solve-lambda",
        p: args.io.p.display().to_string(),
        q: args.io.q.display().to_string(),
        tol: args.tol,
        solutions: reports,
    };
    let content = match args.io.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from("lambda,quantity,value\n");
            for s in &report.solutions {
                let l = fmt_f(s.lambda);
                let mut kv = |k: &str, v: String| {
                    let _ = writeln!(out, "{l},{k},{v}");
                };
                kv("a", fmt_f(s.a));
                kv("b", fmt_f(s.b));
                kv("divergence_null", fmt_f(s.divergence_null));
                kv("divergence_alt", fmt_f(s.divergence_alt));
                kv("mean_null", fmt_f(s.mean_null));
                kv("mean_alt", fmt_f(s.mean_alt));
                kv("alignment_spread", fmt_f(s.diagnostics.alignment_spread));
                kv("gap_residual", fmt_f(s.diagnostics.gap_residual));
                kv("marginal_tv", fmt_f(s.diagnostics.marginal_tv));
                kv("tangent_residual", fmt_f(s.diagnostics.tangent_residual));
                kv("parallel_residual", fmt_f(s.diagnostics.parallel_residual));
                kv(
                    "decomposition_residual",
                    fmt_f(s.diagnostics.decomposition_residual),
                );
                for (i, v) in s.llr_x.iter().enumerate() {
                    kv(&format!("llr_x_{i}"), fmt_f(*v));
                }
                for (j, v) in s.llr_y.iter().enumerate() {
                    kv(&format!("llr_y_{j}"), fmt_f(*v));
                }
                for (i, row) in s.null_member.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        kv(&format!("null_member_{i}_{j}"), fmt_f(*v));
                    }
                }
                for (i, row) in s.alt_member.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        kv(&format!("alt_member_{i}_{j}"), fmt_f(*v));
                    }
                }
            }
            out
        }
    };
    emit(&args.io, content)
}

#[derive(Serialize)]
struct TradeoffRow {
    scheme: String,
    n: u64,
    param: f64,
    alpha: f64,
    beta: f64,
    log_alpha: Option<f64>,
    log_beta: Option<f64>,
    alpha_half_width: Option<f64>,
    beta_half_width: Option<f64>,
}

#[derive(Serialize)]
struct TradeoffReport {
    command: &'static str,
    p: String,
    q: String,
    mode: &'static str,
    trials: Option<u64>,
    seed: Option<u64>,
    max_types: Option<u64>,
    rows: Vec<TradeoffRow>,
}

fn exact_row(scheme: &Scheme, n: u64, rates: ErrorRates) -> TradeoffRow {
    TradeoffRow {
        scheme: scheme.label().to_string(),
        n,
        param: scheme.param(),
        alpha: rates.alpha,
        beta: rates.beta,
        log_alpha: rates.log_alpha,
        log_beta: rates.log_beta,
        alpha_half_width: None,
        beta_half_width: None,
    }
}

fn mc_row(param: f64, n: u64, est: crate::exact::McEstimate) -> TradeoffRow {
    TradeoffRow {
        scheme: est.scheme,
        n,
        param,
        alpha: est.alpha_hat,
        beta: est.beta_hat,
        log_alpha: (est.alpha_hat > 0.0).then(|| est.alpha_hat.ln()),
        log_beta: (est.beta_hat > 0.0).then(|| est.beta_hat.ln()),
        alpha_half_width: Some(est.alpha_half_width),
        beta_half_width: Some(est.beta_half_width),
    }
}

fn run_tradeoff(args: &TradeoffArgs) -> Result<()> {
    validate_tol(args.tol)?;
    let (p, q) = load_pair(&args.io)?;
    let lambdas = args
        .lambda_grid
        .as_ref()
        .map(|g| g.values.clone())
        .unwrap_or_default();
    let radii = args
        .r_grid
        .as_ref()
        .map(|g| g.values.clone())
        .unwrap_or_default();
    if lambdas.is_empty() && radii.is_empty() && !args.oracle {
        return Err(Error::InvalidInput(
            "nothing to evaluate: give --lambda-grid, --r-grid, or --oracle".into(),
        ));
    }
    if args.monte_carlo && args.oracle {
        return Err(Error::InvalidInput(
            "the oracle frontier is exact by construction; drop --monte-carlo or --oracle".into(),
        ));
    }
    if args.n.is_empty() {
        return Err(Error::InvalidInput(
            "at least one blocklength is required".into(),
        ));
    }
    if args.n.contains(&0) {
        return Err(Error::InvalidInput(
            "blocklengths must be at least 1".into(),
        ));
    }
    for r in &radii {
        Scheme::Hoeffding { r: *r }.validate()?;
    }
    let sols = if lambdas.is_empty() {
        Vec::new()
    } else {
        solve_lambda_grid(&p, &q, &lambdas, args.tol)?
    };
    let mut rows = Vec::new();
    for &n in &args.n {
        if args.monte_carlo {
            for sol in &sols {
                let scheme = Scheme::NpLike {
                    lambda: sol.lambda,
                    tau: sol.lambda,
                };
                let est = monte_carlo_tradeoff(&p, &q, &scheme, n, args.trials, args.seed)?;
                rows.push(mc_row(sol.lambda, n, est));
            }
            for &r in &radii {
                let scheme = Scheme::Hoeffding { r };
                let est = monte_carlo_tradeoff(&p, &q, &scheme, n, args.trials, args.seed)?;
                rows.push(mc_row(r, n, est));
            }
        } else {
            let table = match MarginalPairTable::build(&p, &q, n, args.max_types) {
                Err(e @ Error::CapExceeded { .. }) => {
                    eprintln!("hint: raise --max-types or estimate with --monte-carlo");
                    return Err(e);
                }
                other => other?,
            };
            for sol in &sols {
                let scheme = Scheme::NpLike {
                    lambda: sol.lambda,
                    tau: sol.lambda,
                };
                rows.push(exact_row(
                    &scheme,
                    n,
                    np_rates(&table, &sol.llr, sol.lambda),
                ));
            }
            for &r in &radii {
                let scheme = Scheme::Hoeffding { r };
                rows.push(exact_row(&scheme, n, hoeffding_rates(&table, &p, r)?));
            }
            if args.oracle {
                for pt in oracle_tradeoff(&p, &q, n, DEFAULT_ORACLE_MAX_N)? {
                    rows.push(TradeoffRow {
                        scheme: "oracle".to_string(),
                        n,
                        param: pt.tau,
                        alpha: pt.alpha,
                        beta: pt.beta,
                        log_alpha: pt.log_alpha.is_finite().then_some(pt.log_alpha),
                        log_beta: pt.log_beta.is_finite().then_some(pt.log_beta),
                        alpha_half_width: None,
                        beta_half_width: None,
                    });
                }
            }
        }
    }
    let report = TradeoffReport {
        command: "tradeoff",
        p: args.io.p.display().to_string(),
        q: args.io.q.display().to_string(),
        mode: if args.monte_carlo {
            "monte-carlo"
        } else {
            "exact"
        },
        trials: args.monte_carlo.then_some(args.trials),
        seed: args.monte_carlo.then_some(args.seed),
        max_types: (!args.monte_carlo).then_some(args.max_types),
        rows,
    };
    let content = match args.io.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from("scheme,n,param,alpha,beta,log_alpha,log_beta\n");
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.scheme,
                    r.n,
                    fmt_f(r.param),
                    fmt_f(r.alpha),
                    fmt_f(r.beta),
                    fmt_opt(r.log_alpha),
                    fmt_opt(r.log_beta),
                );
            }
            out
        }
    };
    emit(&args.io, content)
}

#[derive(Serialize)]
struct ExponentRow {
    kind: &'static str,
    lambda: f64,
    tau: f64,
    exponent1: f64,
    exponent2: f64,
    a: f64,
    theta_p_x: Vec<f64>,
    theta_p_y: Vec<f64>,
    theta_p_xy: Vec<f64>,
    theta_q_x: Vec<f64>,
    theta_q_y: Vec<f64>,
    theta_q_xy: Vec<f64>,
}

impl ExponentRow {
    fn from_point(kind: &'static str, pt: asymptotics::ExponentPoint) -> Self {
        ExponentRow {
            kind,
            lambda: pt.lambda,
            tau: pt.tau,
            exponent1: pt.type_i,
            exponent2: pt.type_ii,
            a: pt.a,
            theta_p_x: pt.theta_p_x,
            theta_p_y: pt.theta_p_y,
            theta_p_xy: pt.theta_p_xy,
            theta_q_x: pt.theta_q_x,
            theta_q_y: pt.theta_q_y,
            theta_q_xy: pt.theta_q_xy,
        }
    }
}

#[derive(Serialize)]
struct ExponentsReport {
    command: &'static str,
    p: String,
    q: String,
    rows: Vec<ExponentRow>,
}

fn run_exponents(args: &ExponentsArgs) -> Result<()> {
    validate_tol(args.tol)?;
    let (p, q) = load_pair(&args.io)?;
    let mut rows = Vec::new();
    match args.fixed_lambda {
        Some(lambda) => {
            let taus = args
                .lambda_grid
                .as_ref()
                .ok_or_else(|| {
                    Error::InvalidInput(
                        "--fixed-lambda needs --lambda-grid to supply the thresholds".into(),
                    )
                })?
                .values
                .clone();
            for pt in asymptotics::fixed_lambda_curve(&p, &q, lambda, &taus, args.tol)? {
                rows.push(ExponentRow::from_point("fixed-threshold", pt));
            }
        }
        None => {
            if args.lambda_grid.is_none() && args.r_grid.is_none() {
                return Err(Error::InvalidInput(
                    "nothing to evaluate: give --lambda-grid or --r-grid".into(),
                ));
            }
            if let Some(grid) = &args.lambda_grid {
                for pt in asymptotics::optimal_exponent_curve(&p, &q, &grid.values, args.tol)? {
                    rows.push(ExponentRow::from_point("optimal", pt));
                }
            }
            if let Some(grid) = &args.r_grid {
                for &r in &grid.values {
                    let sol = solve_for_rate(&p, &q, r, args.tol)?;
                    let thp = sol.p_lambda.to_natural();
                    let thq = sol.q_lambda.to_natural();
                    rows.push(ExponentRow {
                        kind: "by-rate",
                        lambda: sol.lambda,
                        tau: sol.lambda,
                        exponent1: dist::kl_divergence(&sol.p_lambda, &p)?,
                        exponent2: dist::kl_divergence(&sol.q_lambda, &q)?,
                        a: sol.a,
                        theta_p_x: thp.theta_x,
                        theta_p_y: thp.theta_y,
                        theta_p_xy: thp.theta_xy,
                        theta_q_x: thq.theta_x,
                        theta_q_y: thq.theta_y,
                        theta_q_xy: thq.theta_xy,
                    });
                }
            }
        }
    }
    let report = ExponentsReport {
        command: "exponents",
        p: args.io.p.display().to_string(),
        q: args.io.q.display().to_string(),
        rows,
    };
    let content = match args.io.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from(
                "kind,lambda,tau,exponent1,exponent2,a,\
                 theta_p_x,theta_p_y,theta_p_xy,theta_q_x,theta_q_y,theta_q_xy\n",
            );
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.kind,
                    fmt_f(r.lambda),
                    fmt_f(r.tau),
                    fmt_f(r.exponent1),
                    fmt_f(r.exponent2),
                    fmt_f(r.a),
                    fmt_vec(&r.theta_p_x),
                    fmt_vec(&r.theta_p_y),
                    fmt_vec(&r.theta_p_xy),
                    fmt_vec(&r.theta_q_x),
                    fmt_vec(&r.theta_q_y),
                    fmt_vec(&r.theta_q_xy),
                );
            }
            out
        }
    };
    emit(&args.io, content)
}

#[derive(Serialize)]
struct SecondOrderPointReport {
    eps: f64,
    n: u64,
    feasible: bool,
    tau: Option<f64>,
    minus_log_beta_approx: f64,
}

#[derive(Serialize)]
struct SecondOrderReport {
    command: &'static str,
    p: String,
    q: String,
    e: f64,
    v: f64,
    t3: f64,
    points: Vec<SecondOrderPointReport>,
}

fn run_second_order(args: &SecondOrderArgs) -> Result<()> {
    let (p, q) = load_pair(&args.io)?;
    let stats = asymptotics::second_order_stats(&p, &q)?;
    let mut points = Vec::new();
    for &eps in &args.eps {
        for &n in &args.n {
            let tau = match asymptotics::np_threshold_for_eps(&stats, eps, n) {
                Ok(t) => Some(t),
                Err(Error::OutOfRange(_)) => None,
                Err(e) => return Err(e),
            };
            points.push(SecondOrderPointReport {
                eps,
                n,
                feasible: tau.is_some(),
                tau,
                minus_log_beta_approx: asymptotics::second_order_beta_approx(&stats, eps, n)?,
            });
        }
    }
    let report = SecondOrderReport {
        command: "second-order",
        p: args.io.p.display().to_string(),
        q: args.io.q.display().to_string(),
        e: stats.e,
        v: stats.v,
        t3: stats.t3,
        points,
    };
    let content = match args.io.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from("quantity,eps,n,value\n");
            let _ = writeln!(out, "e,,,{}", fmt_f(report.e));
            let _ = writeln!(out, "v,,,{}", fmt_f(report.v));
            let _ = writeln!(out, "t3,,,{}", fmt_f(report.t3));
            for pt in &report.points {
                let eps = fmt_f(pt.eps);
                let _ = writeln!(out, "feasible,{eps},{},{}", pt.n, u8::from(pt.feasible));
                let _ = writeln!(out, "tau,{eps},{},{}", pt.n, fmt_opt(pt.tau));
                let _ = writeln!(
                    out,
                    "minus_log_beta_approx,{eps},{},{}",
                    pt.n,
                    fmt_f(pt.minus_log_beta_approx)
                );
            }
            out
        }
    };
    emit(&args.io, content)
}

/// Executes a parsed invocation.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Project(a) => run_project(a),
        Command::SolveLambda(a) => run_solve_lambda(a),
        Command::Tradeoff(a) => run_tradeoff(a),
        Command::Exponents(a) => run_exponents(a),
        Command::SecondOrder(a) => run_second_order(a),
    }
}
