//! Command-line front end.
//!
//! Every subcommand reads the model from `--preset` or the five explicit
//! parameters, optionally from a JSON `--config` file whose keys mirror the
//! long flag names (flags win). Outputs go under `--out`; each CSV gets a JSON
//! sidecar echoing the resolved configuration and the crate version, and each
//! command writes `<command>_summary.json` with its assertions.
//!
//! Exit status: 0 when every hard assertion passes, 1 when one fails, 2 on
//! an error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    compare_empirical_theoretical, convergence_report, limit_measure_tail, measure_ratio, monotonicity_check,
    sphere_grid, ConvergenceReport, FitReport, Scaling, SphereKind, Violation,
};
use crate::error::{Error, Result};
use crate::io::{self, Format};
use crate::params::{derived_constants, validate_params, DerivedConstants, Model, ModelParams, Preset};
use crate::pmf::{limit_nonstandard, limit_standard, pmf_table, SparseJointPMF};
use crate::simulator::{pool, read_edge_list, run_replicates, DegreeTally, Init};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "prefattach",
    version,
    about = "Directed preferential attachment graphs: simulation and the limiting joint degree pmf"
)]
pub struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grow graphs and write degree tallies per replicate plus the pooled tally.
    Simulate(SimulateArgs),
    /// Tabulate the limiting joint in/out-degree pmf.
    Pmf(PmfArgs),
    /// Evaluate the scaling-limit function on user points and on the E0 curve.
    Limits(LimitsArgs),
    /// Scaling-limit convergence and measure checks over an n-schedule.
    Diagnose(DiagnoseArgs),
    /// Fit simulated tallies against a pmf table.
    Compare(CompareArgs),
}

/// Options shared by all commands. Also the schema of the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target edge count per replicate.
    #[arg(long)]
    pub edges: Option<u64>,
    #[arg(long)]
    pub replicates: Option<u64>,
    #[arg(long)]
    pub imax: Option<u64>,
    #[arg(long)]
    pub jmax: Option<u64>,
    /// Comma-separated list of n values.
    #[arg(long, value_delimiter = ',')]
    pub nsched: Option<Vec<u64>>,
    /// Number of points on the E0 curve.
    #[arg(long)]
    pub grid_m: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON file with any of the option keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial graph as a CSV edge list `source,target` (default: one self-loop).
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PmfArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LimitsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Evaluation point `x,y`; repeatable.
    #[arg(long = "point", value_parser = parse_point)]
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Corner `x0,y0` of the measure-ratio check.
    #[arg(long, value_parser = parse_point, default_value = "0.5,0.5")]
    pub measure_point: (f64, f64),
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Tally CSV files (with sidecars); several are pooled.
    #[arg(long = "tally", required = true, num_args = 1..)]
    pub tallies: Vec<PathBuf>,
    /// Table written by `pmf`; computed from the tally parameters when absent.
    #[arg(long)]
    pub pmf: Option<PathBuf>,
    /// Cells with smaller expected count are left out of the fit.
    #[arg(long, default_value_t = 100.0)]
    pub min_expected: f64,
    /// Chi-square p-value below which the fit fails.
    #[arg(long, default_value_t = 1e-3)]
    pub p_min: f64,
    /// Also fail when any selected cell is off by more than this relative error.
    #[arg(long)]
    pub max_rel_error: Option<f64>,
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(x)?, parse(y)?))
}

const DEFAULT_EDGES: u64 = 1_000_000;
const DEFAULT_TRUNCATION: u64 = 200;
const DEFAULT_NSCHED: [u64; 3] = [100, 1_000, 10_000];
const DEFAULT_GRID_M: usize = 32;

impl RunConfig {
    /// Fields set in `flags` replace those in `self`.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            preset: flags.preset.or(self.preset),
            alpha: flags.alpha.or(self.alpha),
            beta: flags.beta.or(self.beta),
            gamma: flags.gamma.or(self.gamma),
            lambda: flags.lambda.or(self.lambda),
            mu: flags.mu.or(self.mu),
            seed: flags.seed.or(self.seed),
            edges: flags.edges.or(self.edges),
            replicates: flags.replicates.or(self.replicates),
            imax: flags.imax.or(self.imax),
            jmax: flags.jmax.or(self.jmax),
            nsched: flags.nsched.or(self.nsched),
            grid_m: flags.grid_m.or(self.grid_m),
            out: flags.out.or(self.out),
            format: flags.format.or(self.format),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let seed = self.seed.unwrap_or(0);
        let explicit = [self.alpha, self.beta, self.gamma, self.lambda, self.mu];
        match (self.preset, explicit.iter().any(Option::is_some)) {
            (Some(p), false) => Ok(p.params(seed)),
            (Some(_), true) => Err(Error::Config(
                "give either a preset or explicit alpha/beta/gamma/lambda/mu, not both".into(),
            )),
            (None, false) => Err(Error::Config(
                "no model: pass --preset or all of --alpha --beta --gamma --lambda --mu".into(),
            )),
            (None, true) => match explicit {
                [Some(a), Some(b), Some(g), Some(l), Some(m)] => validate_params(a, b, g, l, m, seed),
                _ => Err(Error::Config(
                    "explicit parameters need all of alpha, beta, gamma, lambda, mu".into(),
                )),
            },
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn truncation(&self) -> Result<(u64, u64)> {
        let i_max = self.imax.unwrap_or(DEFAULT_TRUNCATION);
        let j_max = self.jmax.unwrap_or(DEFAULT_TRUNCATION);
        if i_max == 0 || j_max == 0 {
            return Err(Error::Config(format!(
                "--imax and --jmax must be positive, got {i_max} and {j_max}"
            )));
        }
        Ok((i_max, j_max))
    }

    fn schedule(&self) -> Result<Vec<u64>> {
        let s = self.nsched.clone().unwrap_or_else(|| DEFAULT_NSCHED.to_vec());
        if s.is_empty() || s.contains(&0) || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "--nsched must be positive and increasing, got {s:?}"
            )));
        }
        Ok(s)
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(self.run.clone()))
    }
}

/// What every output carries about how it was produced.
#[derive(Debug, Serialize)]
struct Echo<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    #[serde(flatten)]
    echo: &'a Echo<'a>,
    #[serde(flatten)]
    data: &'a T,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Assertion {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    #[serde(flatten)]
    echo: &'a Echo<'a>,
    params: ModelParams,
    constants: DerivedConstants,
    assertions: &'a [Assertion],
    passed: bool,
    report: T,
}

fn write_summary<T: Serialize>(
    out: &Path,
    prov: &Echo,
    params: ModelParams,
    assertions: &[Assertion],
    report: T,
) -> Result<bool> {
    let passed = assertions.iter().all(|a| a.passed);
    for a in assertions {
        if a.passed {
            info!("{}: pass ({})", a.name, a.detail);
        } else {
            warn!("{}: FAIL ({})", a.name, a.detail);
        }
    }
    let summary = Summary {
        echo: prov,
        params,
        constants: derived_constants(&params),
        assertions,
        passed,
        report,
    };
    io::write_json(&out.join(format!("{}_summary.json", prov.command)), &summary)?;
    Ok(passed)
}

fn write_csv_with_sidecar<T: Serialize>(
    path: &Path,
    prov: &Echo,
    data: &T,
    body: impl FnOnce(std::io::BufWriter<std::fs::File>) -> Result<()>,
) -> Result<()> {
    body(io::create(path)?)?;
    io::write_json(&io::sidecar_path(path), &Sidecar { echo: prov, data })
}

/// Runs a parsed command line; `Ok(false)` means an assertion failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Pmf(a) => cmd_pmf(&a),
        Command::Limits(a) => cmd_limits(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Compare(a) => cmd_compare(&a),
    }
}

/// Parses `args`, runs, and maps the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<bool> {
    let mut cfg = args.common.resolve()?;
    let params = cfg.params()?;
    let edges = cfg.edges.unwrap_or(DEFAULT_EDGES);
    let replicates = cfg.replicates.unwrap_or(1);
    if edges == 0 {
        return Err(Error::Config("--edges must be positive".into()));
    }
    if replicates == 0 {
        return Err(Error::Config("--replicates must be positive".into()));
    }
    cfg.seed = Some(params.seed);
    cfg.edges = Some(edges);
    cfg.replicates = Some(replicates);
    let init = match &args.init {
        Some(path) => Init::Edges(read_edge_list(path)?),
        None => Init::SelfLoop,
    };
    let out = cfg.out_dir();
    let prov = Echo {
        version: VERSION,
        command: "simulate",
        config: &cfg,
    };
    info!("simulating {replicates} x {edges} edges");
    let tallies = run_replicates(&params, edges, &init, replicates)?;
    for (r, t) in tallies.iter().enumerate() {
        write_tally(&out.join(format!("tally_r{r}.csv")), &prov, t)?;
    }
    let pooled = pool(&tallies)?;
    write_tally(&out.join("tally_pooled.csv"), &prov, &pooled)?;
    write_summary(
        &out,
        &prov,
        params,
        &[],
        TallyTotals {
            n_nodes: pooled.n_nodes,
            n_edges: pooled.n_edges,
            replicates: pooled.replicates,
        },
    )
}

#[derive(Serialize)]
struct TallyTotals {
    n_nodes: u64,
    n_edges: u64,
    replicates: u64,
}

fn write_tally(path: &Path, prov: &Echo, t: &DegreeTally) -> Result<()> {
    write_csv_with_sidecar(path, prov, t, |w| t.write_csv(w))
}

fn write_table(out: &Path, prov: &Echo, table: &SparseJointPMF, format: Format) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let path = out.join("pmf.csv");
            write_csv_with_sidecar(&path, prov, &table.metadata(), |w| table.write_csv(w))?;
            Ok(path)
        }
        Format::Json => {
            let path = out.join("pmf.json");
            io::write_json(
                &path,
                &Sidecar {
                    echo: prov,
                    data: table,
                },
            )?;
            Ok(path)
        }
    }
}

pub fn cmd_pmf(args: &PmfArgs) -> Result<bool> {
    let mut cfg = args.common.resolve()?;
    let model = Model::new(cfg.params()?);
    let (i_max, j_max) = cfg.truncation()?;
    let format = cfg.format.unwrap_or(Format::Csv);
    cfg.imax = Some(i_max);
    cfg.jmax = Some(j_max);
    cfg.format = Some(format);
    let out = cfg.out_dir();
    let prov = Echo {
        version: VERSION,
        command: "pmf",
        config: &cfg,
    };
    info!("tabulating p(i, j) on [0, {i_max}] x [0, {j_max}]");
    let table = pmf_table(&model, i_max, j_max)?;
    let path = write_table(&out, &prov, &table, format)?;
    let bracket = table.partial_sum <= 1.0 + 1e-12 && 1.0 <= table.partial_sum + table.residual_bound + 1e-12;
    let assertions = [Assertion::new(
        "mass_bracket",
        bracket,
        format!(
            "partial sum {:.12}, residual bound {:.3e}",
            table.partial_sum, table.residual_bound
        ),
    )];
    write_summary(
        &out,
        &prov,
        model.params,
        &assertions,
        TableTotals {
            path,
            cells: table.entries.len(),
            partial_sum: table.partial_sum,
            residual_bound: table.residual_bound,
            underflow_cells: table.underflow_cells,
        },
    )
}

#[derive(Serialize)]
struct TableTotals {
    path: PathBuf,
    cells: usize,
    partial_sum: f64,
    residual_bound: f64,
    underflow_cells: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct LimitRow {
    set: &'static str,
    x: f64,
    y: f64,
    value: f64,
}

fn limit_value(x: f64, y: f64, model: &Model) -> Result<f64> {
    if model.is_standard() {
        limit_standard(x, y, model)
    } else {
        limit_nonstandard(x, y, model)
    }
}

pub fn cmd_limits(args: &LimitsArgs) -> Result<bool> {
    let mut cfg = args.common.resolve()?;
    let model = Model::new(cfg.params()?);
    let m = cfg.grid_m.unwrap_or(DEFAULT_GRID_M);
    let format = cfg.format.unwrap_or(Format::Csv);
    cfg.grid_m = Some(m);
    cfg.format = Some(format);
    let user = if args.points.is_empty() {
        vec![(1.0, 1.0)]
    } else {
        args.points.clone()
    };
    let grid = sphere_grid(&model, SphereKind::E0, m)?;
    let jobs: Vec<(&'static str, (f64, f64))> = user
        .iter()
        .map(|&p| ("user", p))
        .chain(grid.points.iter().map(|&p| ("e0", p)))
        .collect();
    let rows: Vec<LimitRow> = jobs
        .par_iter()
        .map(|&(set, (x, y))| {
            Ok(LimitRow {
                set,
                x,
                y,
                value: limit_value(x, y, &model)?,
            })
        })
        .collect::<Result<_>>()?;
    let out = cfg.out_dir();
    let prov = Echo {
        version: VERSION,
        command: "limits",
        config: &cfg,
    };
    let limits = LimitTable {
        scaling: if model.is_standard() {
            Scaling::Standard
        } else {
            Scaling::Nonstandard
        },
        rows,
    };
    match format {
        Format::Csv => write_csv_with_sidecar(
            &out.join("limits.csv"),
            &prov,
            &LimitMeta {
                scaling: limits.scaling,
            },
            |w| write_rows(w, &limits.rows),
        )?,
        Format::Json => io::write_json(
            &out.join("limits.json"),
            &Sidecar {
                echo: &prov,
                data: &limits,
            },
        )?,
    }
    write_summary(&out, &prov, model.params, &[], limits)
}

#[derive(Serialize)]
struct LimitTable {
    scaling: Scaling,
    rows: Vec<LimitRow>,
}

#[derive(Serialize)]
struct LimitMeta {
    scaling: Scaling,
}

fn write_rows<W: std::io::Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct MeasureRow {
    n: u64,
    value: Option<f64>,
    residual: Option<f64>,
    limit: f64,
    rel_error: Option<f64>,
    /// Why the ratio could not be formed from the table, if it could not.
    skipped: Option<String>,
}

#[derive(Serialize)]
struct MonotonicityFacts {
    i_max: u64,
    j_max: u64,
    tol: f64,
    violations: usize,
    eventual_start: (u64, u64),
    first_violations: Vec<Violation>,
}

#[derive(Serialize)]
struct ConvergenceMeta {
    scaling: Scaling,
    sup_errors: Vec<(u64, f64)>,
}

impl From<&ConvergenceReport> for ConvergenceMeta {
    fn from(r: &ConvergenceReport) -> Self {
        ConvergenceMeta {
            scaling: r.scaling,
            sup_errors: r.sup_errors.clone(),
        }
    }
}

#[derive(Serialize)]
struct DiagnoseReport {
    nonstandard: ConvergenceReport,
    standard: Option<ConvergenceReport>,
    measure_point: (f64, f64),
    measure: Vec<MeasureRow>,
    monotonicity: MonotonicityFacts,
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<bool> {
    let mut cfg = args.common.resolve()?;
    let model = Model::new(cfg.params()?);
    let schedule = cfg.schedule()?;
    let m = cfg.grid_m.unwrap_or(DEFAULT_GRID_M);
    let (i_max, j_max) = cfg.truncation()?;
    cfg.nsched = Some(schedule.clone());
    cfg.grid_m = Some(m);
    cfg.imax = Some(i_max);
    cfg.jmax = Some(j_max);
    let out = cfg.out_dir();
    let prov = Echo {
        version: VERSION,
        command: "diagnose",
        config: &cfg,
    };
    let mut assertions = Vec::new();

    let grid = sphere_grid(&model, SphereKind::E0, m)?;
    let nonstandard = convergence_report(&model, Scaling::Nonstandard, &schedule, &grid.points)?;
    write_csv_with_sidecar(
        &out.join("convergence.csv"),
        &prov,
        &ConvergenceMeta::from(&nonstandard),
        |w| nonstandard.write_csv(w),
    )?;
    let sups = &nonstandard.sup_errors;
    assertions.push(Assertion::new(
        "sup_error_non_increasing",
        nonstandard.sup_non_increasing(),
        format!("sup-errors on {m} E0 points: {sups:?}"),
    ));
    let (first, last) = (sups[0].1, sups[sups.len() - 1].1);
    if sups.len() > 1 {
        assertions.push(Assertion::new(
            "sup_error_reduction",
            last * 3.0 <= first,
            format!("sup-error falls by a factor {:.3} (need 3)", first / last),
        ));
    }

    let standard = if model.is_standard() {
        let r = convergence_report(&model, Scaling::Standard, &schedule, &[(1.0, 1.0)])?;
        write_csv_with_sidecar(
            &out.join("convergence_standard.csv"),
            &prov,
            &ConvergenceMeta::from(&r),
            |w| r.write_csv(w),
        )?;
        let errs: Vec<f64> = r.rows.iter().map(|row| row.abs_error).collect();
        let last = r.rows[r.rows.len() - 1];
        assertions.push(Assertion::new(
            "standard_ratio_trend",
            errs.windows(2).all(|w| w[1] <= w[0]),
            format!("|ratio - limit| at (1, 1): {errs:?}"),
        ));
        assertions.push(Assertion::new(
            "standard_ratio_close",
            last.rel_error <= 0.05,
            format!("ratio {:.6} vs limit {:.6} at n = {}", last.ratio, last.limit, last.n),
        ));
        Some(r)
    } else {
        None
    };

    info!("tabulating p(i, j) on [0, {i_max}] x [0, {j_max}]");
    let table = pmf_table(&model, i_max, j_max)?;
    let (x0, y0) = args.measure_point;
    let limit = limit_measure_tail(x0, y0, &model)?;
    let measure: Vec<MeasureRow> = schedule
        .iter()
        .map(|&n| match measure_ratio(n, x0, y0, &model, &table) {
            Ok(r) => Ok(MeasureRow {
                n,
                value: Some(r.value),
                residual: Some(r.residual),
                limit,
                rel_error: Some(r.value / limit - 1.0),
                skipped: None,
            }),
            Err(e @ (Error::OutOfTruncation { .. } | Error::ResidualTooLarge { .. })) => Ok(MeasureRow {
                n,
                value: None,
                residual: None,
                limit,
                rel_error: None,
                skipped: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let errs: Vec<f64> = measure.iter().filter_map(|r| r.rel_error.map(f64::abs)).collect();
    assertions.push(Assertion::new(
        "measure_error_decreasing",
        errs.len() >= 2 && errs.windows(2).all(|w| w[1] < w[0]),
        format!("|relative error| over the n values the table supports: {errs:?}"),
    ));

    // Reported, not asserted: the joint pmf need not decrease near the axes.
    let mono = monotonicity_check(|i, j| table.get(i, j), i_max, j_max, 1e-14)?;
    let monotonicity = MonotonicityFacts {
        i_max,
        j_max,
        tol: mono.tol,
        violations: mono.violations.len(),
        eventual_start: mono.eventual_start,
        first_violations: mono.violations.iter().take(20).copied().collect(),
    };
    info!(
        "monotonicity: {} violations, decreasing from {:?}",
        monotonicity.violations, monotonicity.eventual_start
    );

    let report = DiagnoseReport {
        nonstandard,
        standard,
        measure_point: (x0, y0),
        measure,
        monotonicity,
    };
    write_summary(&out, &prov, model.params, &assertions, report)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<bool> {
    let mut cfg = args.common.resolve()?;
    let tallies = args
        .tallies
        .iter()
        .map(|p| DegreeTally::load(p))
        .collect::<Result<Vec<_>>>()?;
    let tally = pool(&tallies)?;
    let table = match &args.pmf {
        Some(path) => SparseJointPMF::load(path)?,
        None => {
            let (i_max, j_max) = cfg.truncation()?;
            cfg.imax = Some(i_max);
            cfg.jmax = Some(j_max);
            pmf_table(&Model::new(tally.params), i_max, j_max)?
        }
    };
    let out = cfg.out_dir();
    let prov = Echo {
        version: VERSION,
        command: "compare",
        config: &cfg,
    };
    let fit = compare_empirical_theoretical(&tally, &table, args.min_expected)?;
    write_csv_with_sidecar(&out.join("fit.csv"), &prov, &FitMeta::from(&fit), |w| fit.write_csv(w))?;
    let mut assertions = vec![Assertion::new(
        "chi_square",
        fit.p_value > args.p_min,
        format!(
            "statistic {:.2} on {} dof, p = {:.4}",
            fit.chi_square, fit.dof, fit.p_value
        ),
    )];
    if let Some(limit) = args.max_rel_error {
        assertions.push(Assertion::new(
            "max_rel_error",
            fit.max_rel_error <= limit,
            format!("largest cell relative error {:.4} (limit {limit})", fit.max_rel_error),
        ));
    }
    write_summary(&out, &prov, tally.params, &assertions, fit)
}

#[derive(Serialize)]
struct FitMeta {
    n_nodes: u64,
    min_expected: f64,
    cells: usize,
    max_rel_error: f64,
    total_variation: f64,
    chi_square: f64,
    dof: usize,
    p_value: f64,
}

impl From<&FitReport> for FitMeta {
    fn from(f: &FitReport) -> Self {
        FitMeta {
            n_nodes: f.n_nodes,
            min_expected: f.min_expected,
            cells: f.cells.len(),
            max_rel_error: f.max_rel_error,
            total_variation: f.total_variation,
            chi_square: f.chi_square,
            dof: f.dof,
            p_value: f.p_value,
        }
    }
}
