//! The subcommands, as functions from parsed options to output and exit code.

use std::time::Instant;

use qcqp_exact_core::assumption::check_assumption1;
use qcqp_exact_core::conditions::{self, run_all, ConditionConfig, ConditionId};
use qcqp_exact_core::oracle::{default_grid, global_minimize, verify_exactness, verify_exactness_with, DEFAULT_REFINE_ROUNDS, MAX_ORACLE_DIM};
use qcqp_exact_core::relaxations::{solve_convrel, solve_newconvrel, RelaxError};
use qcqp_exact_core::{compute_partition, DiagonalQcqp};
use rayon::prelude::*;

use crate::error::CliError;
use crate::generate::{random_instance, trial_seed, Scheme};
use crate::instance_file::{set_scalar, to_json_pretty};
use crate::report::{RelaxationBlock, Report, VerdictEntry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EXACT: i32 = 10;
pub const EXIT_INCONCLUSIVE: i32 = 11;

pub const THREADS_VAR: &str = "QCQP_EXACT_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output { stdout, code: EXIT_OK }
    }
}

/// Runs `f` on a pool capped by `QCQP_EXACT_THREADS` when it is set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_VAR).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&t| t > 0);
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

fn seconds(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

pub fn parse_conditions(list: &str) -> Result<Vec<ConditionId>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|tag| ConditionId::from_tag(tag).ok_or_else(|| CliError::Usage(format!("unknown condition `{}`", tag))))
        .collect()
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub conditions: Option<Vec<ConditionId>>,
    pub exhaustive: bool,
    pub powerset: bool,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { conditions: None, exhaustive: false, powerset: false, tol: 1e-8, seed: 0 }
    }
}

impl CheckOptions {
    fn config(&self) -> ConditionConfig {
        ConditionConfig {
            feas_tol: self.tol,
            seed: self.seed,
            exhaustive: self.exhaustive,
            powerset: self.powerset,
            only: self.conditions.clone(),
            ..ConditionConfig::default()
        }
    }
}

pub fn cmd_check(q: &DiagonalQcqp, opts: &CheckOptions) -> Output {
    let mut report = Report::new("check", q);
    report.seed = Some(opts.seed);
    let t = Instant::now();
    report.assumption = Some(check_assumption1(q));
    report.timings.insert("assumption".into(), seconds(t));
    let t = Instant::now();
    match solve_convrel(q, 1e-9) {
        Ok(sol) => report.relaxation = Some(RelaxationBlock::new(q, &sol, opts.tol)),
        Err(e) => report.relaxation_error = Some(e.to_string()),
    }
    report.timings.insert("relaxation".into(), seconds(t));
    let t = Instant::now();
    let verdicts = run_all(q, &opts.config());
    report.timings.insert("conditions".into(), seconds(t));
    let any_exact = verdicts.iter().any(|v| v.is_exact());
    report.verdicts = Some(verdicts.iter().map(VerdictEntry::from).collect());
    Output { stdout: report.to_json(), code: if any_exact { EXIT_EXACT } else { EXIT_INCONCLUSIVE } }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelaxChoice {
    Conv,
    NewConv,
}

pub fn cmd_solve(q: &DiagonalQcqp, which: RelaxChoice, tol: f64) -> Result<Output, CliError> {
    let mut report = Report::new("solve", q);
    let t = Instant::now();
    let sol = match which {
        RelaxChoice::Conv => solve_convrel(q, tol),
        RelaxChoice::NewConv => solve_newconvrel(q, &compute_partition(q, qcqp_exact_core::DEFAULT_GROUP_TOL), tol),
    };
    report.timings.insert("relaxation".into(), seconds(t));
    match sol {
        Ok(sol) => report.relaxation = Some(RelaxationBlock::new(q, &sol, tol.max(1e-8))),
        Err(e @ RelaxError::Infeasible { .. }) => report.relaxation_error = Some(e.to_string()),
        Err(e) => return Err(CliError::Relax(e)),
    }
    Ok(Output::ok(report.to_json()))
}

pub fn cmd_oracle(q: &DiagonalQcqp, grid: Option<usize>, refine: Option<usize>) -> Result<Output, CliError> {
    let mut report = Report::new("oracle", q);
    let t = Instant::now();
    let r = global_minimize(q, grid.unwrap_or_else(|| default_grid(q.n())), refine.unwrap_or(DEFAULT_REFINE_ROUNDS))
        .map_err(CliError::Oracle)?;
    report.timings.insert("oracle".into(), seconds(t));
    report.oracle = Some(r);
    Ok(Output::ok(report.to_json()))
}

pub fn cmd_verify(q: &DiagonalQcqp, tol: f64) -> Result<Output, CliError> {
    let mut report = Report::new("verify", q);
    let t = Instant::now();
    let check = verify_exactness(q, tol).map_err(CliError::Oracle)?;
    report.timings.insert("verify".into(), seconds(t));
    report.exactness = Some(check);
    Ok(Output::ok(report.to_json()))
}

pub fn cmd_random(n: usize, m: usize, scheme: Scheme, seed: u64) -> Result<Output, CliError> {
    if n == 0 || m == 0 {
        return Err(CliError::Usage("n and m must be positive".into()));
    }
    let mut s = to_json_pretty(&random_instance(n, m, scheme, seed));
    s.push('\n');
    Ok(Output::ok(s))
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{}", x)).unwrap_or_default()
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub with_oracle: bool,
    pub tol: f64,
    pub seed: u64,
}

/// Verdict of every applicable condition (`None` where it does not apply).
pub fn all_verdicts(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Vec<Option<bool>> {
    ConditionId::ALL.iter().map(|&id| conditions::check(id, q, cfg).ok().map(|v| v.is_exact())).collect()
}

pub fn sweep_header() -> Vec<String> {
    let mut h = vec!["param".to_string()];
    h.extend(ConditionId::ALL.iter().map(|c| c.tag().to_string()));
    h.extend(["relax_value", "oracle_value", "gap", "transition"].map(String::from));
    h
}

pub fn cmd_sweep(q: &DiagonalQcqp, opts: &SweepOptions) -> Result<Output, CliError> {
    if opts.steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    let values: Vec<f64> = (0..opts.steps)
        .map(|k| {
            if opts.steps == 1 {
                opts.from
            } else {
                opts.from + (opts.to - opts.from) * k as f64 / (opts.steps - 1) as f64
            }
        })
        .collect();
    let instances: Vec<DiagonalQcqp> =
        values.iter().map(|&v| set_scalar(q, &opts.param, v)).collect::<Result<_, _>>()?;
    let cfg = ConditionConfig { feas_tol: opts.tol, seed: opts.seed, ..ConditionConfig::default() };
    let rows: Vec<(Vec<Option<bool>>, Option<f64>, Option<f64>, Option<f64>)> = with_pool(|| {
        instances
            .par_iter()
            .map(|qi| {
                let verdicts = all_verdicts(qi, &cfg);
                let relax = solve_convrel(qi, 1e-9).ok().map(|s| s.value);
                let (oracle, gap) = if opts.with_oracle && qi.n() <= MAX_ORACLE_DIM {
                    match verify_exactness(qi, 1e-5) {
                        Ok(c) => (c.oracle_value, c.gap),
                        Err(_) => (None, None),
                    }
                } else {
                    (None, None)
                };
                (verdicts, relax, oracle, gap)
            })
            .collect()
    });
    let mut out = Vec::with_capacity(rows.len());
    for (k, (verdicts, relax, oracle, gap)) in rows.iter().enumerate() {
        let mut row = vec![format!("{}", values[k])];
        row.extend(verdicts.iter().map(|v| v.map(|b| b.to_string()).unwrap_or_default()));
        row.push(fmt_opt(*relax));
        row.push(fmt_opt(*oracle));
        row.push(fmt_opt(*gap));
        let transition = if k == 0 {
            String::new()
        } else {
            ConditionId::ALL
                .iter()
                .zip(verdicts.iter().zip(&rows[k - 1].0))
                .filter(|(_, (a, b))| a != b)
                .map(|(id, _)| id.tag())
                .collect::<Vec<_>>()
                .join(";")
        };
        row.push(transition);
        out.push(row);
    }
    Ok(Output::ok(csv_text(&sweep_header(), &out)?))
}

#[derive(Clone, Debug)]
pub struct McOptions {
    pub n_list: Vec<usize>,
    pub m: usize,
    pub trials: usize,
    pub scheme: Scheme,
    pub seed: u64,
}

pub fn mc_header() -> Vec<String> {
    ["scheme", "n", "m", "trials", "fired_fraction", "oracle_exact_fraction"].map(String::from).to_vec()
}

/// One Monte Carlo cell: fraction of trials where some condition fired, and
/// (for `n ≤ 4`) where the oracle confirmed exactness.
pub fn mc_cell(n: usize, opts: &McOptions) -> (f64, Option<f64>) {
    let cfg = ConditionConfig::default();
    let results: Vec<(bool, bool)> = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let q = random_instance(n, opts.m, opts.scheme, trial_seed(opts.seed, n, t));
            let fired = run_all(&q, &cfg).iter().any(|v| v.is_exact());
            let confirmed =
                n <= MAX_ORACLE_DIM && verify_exactness_with(&q, 1e-5, default_grid(n), 8).is_ok_and(|c| c.exact);
            (fired, confirmed)
        })
        .collect();
    let k = opts.trials.max(1) as f64;
    let fired = results.iter().filter(|r| r.0).count() as f64 / k;
    let oracle = (n <= MAX_ORACLE_DIM).then(|| results.iter().filter(|r| r.1).count() as f64 / k);
    (fired, oracle)
}

pub fn cmd_mc(opts: &McOptions) -> Result<Output, CliError> {
    if opts.m == 0 || opts.n_list.iter().any(|&n| n == 0) {
        return Err(CliError::Usage("n and m must be positive".into()));
    }
    let mut rows = Vec::new();
    if opts.trials > 0 {
        for &n in &opts.n_list {
            let (fired, oracle) = with_pool(|| mc_cell(n, opts));
            rows.push(vec![
                opts.scheme.name().to_string(),
                n.to_string(),
                opts.m.to_string(),
                opts.trials.to_string(),
                format!("{}", fired),
                fmt_opt(oracle),
            ]);
        }
    }
    Ok(Output::ok(csv_text(&mc_header(), &rows)?))
}
