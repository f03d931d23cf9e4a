//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit code: 0 success, 1 usage, 2 input, 3 numerical.

pub mod config;
pub mod plot;
pub mod table;

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::basis::{build_orthonormal, BasisSpec};
use crate::dpalign::{dp_align, Alignment, DpConfig};
use crate::error::Error;
use crate::estimator::{decompose, decompose_separation, select_subspace, DecompositionResult, EstimatorConfig};
use crate::gridfn::GridFunction;
use crate::inference::{bootstrap, BootstrapConfig};
use crate::synthgen::{fluctuation, generate, orthogonality_diagnostics, ScenarioSpec};
use crate::warping::action;

pub use config::{Level, Model, RunConfig};
use plot::{Chart, Series};
pub use table::{format_value, read_panel, read_table, Panel, Table};

const DEFAULT_L: usize = 4;
const DEFAULT_RANGE: (usize, usize) = (1, 10);

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: impl Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    pub fn from_core(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) | Error::InvalidBasis(_) | Error::UnknownScenario(_) => CliError::Usage(msg),
            Error::RankDeficient { .. }
            | Error::InvalidWarping(_)
            | Error::Estimation { .. }
            | Error::Bootstrap { .. } => CliError::Numerical(msg),
            _ => CliError::Input(msg),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_core(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "trendwarp",
    version,
    about = "Trend, seasonality and time-warping estimation for panels of curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate trend, seasonal template and warpings for a panel CSV.
    Decompose {
        panel: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Fit a range of trend dimensions and pick the lowest cost.
    Select {
        panel: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Bootstrap bands and trend tests.
    Bootstrap {
        panel: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Generate a synthetic panel with its ground truth.
    Simulate {
        #[command(flatten)]
        sim: SimOpts,
        #[command(flatten)]
        opts: Opts,
    },
    /// Align the second value column of a CSV to the first.
    Align {
        pair: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Percent change between consecutive rates.
    Fluctuation {
        rates: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Debug, Args)]
struct Opts {
    /// key = value file with the same names as the flags; flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// fourier, sine, cosine or legendre
    #[arg(long, value_name = "FAMILY")]
    basis: Option<String>,
    /// Trend dimension
    #[arg(long, value_name = "N", conflicts_with = "l_range")]
    l: Option<String>,
    /// Candidate trend dimensions, inclusive
    #[arg(long = "l-range", value_name = "A..B")]
    l_range: Option<String>,
    #[arg(long, value_name = "N")]
    max_iter: Option<String>,
    /// DP lattice nodes per axis
    #[arg(long, value_name = "N")]
    lattice: Option<String>,
    /// Bootstrap replicates
    #[arg(long, value_name = "B")]
    replicates: Option<String>,
    /// Band and test level
    #[arg(long, value_name = "A")]
    alpha: Option<String>,
    #[arg(long, value_name = "S")]
    seed: Option<String>,
    /// mle or separation
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Also write SVG plots
    #[arg(long)]
    plots: bool,
}

#[derive(Debug, Args)]
struct SimOpts {
    /// fig1, subspace_selection or noise_perturbation
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    #[arg(long, value_name = "N")]
    n: Option<String>,
    #[arg(long, value_name = "M")]
    m: Option<String>,
    #[arg(long, value_name = "SIGMA")]
    sigma: Option<String>,
}

fn push(pairs: &mut Vec<(String, String)>, key: &str, value: &Option<String>) {
    if let Some(v) = value {
        pairs.push((key.to_string(), v.clone()));
    }
}

impl Opts {
    fn resolve(&self, sim: Option<&SimOpts>) -> CliResult<RunConfig> {
        let file = match &self.config {
            Some(path) => config::parse_config_text(&table::read_text(path)?)?,
            None => Vec::new(),
        };
        let mut flags = Vec::new();
        push(&mut flags, "basis", &self.basis);
        push(&mut flags, "l", &self.l);
        push(&mut flags, "l-range", &self.l_range);
        push(&mut flags, "max-iter", &self.max_iter);
        push(&mut flags, "lattice", &self.lattice);
        push(&mut flags, "replicates", &self.replicates);
        push(&mut flags, "alpha", &self.alpha);
        push(&mut flags, "seed", &self.seed);
        push(&mut flags, "model", &self.model);
        push(&mut flags, "out", &self.out);
        if self.plots {
            flags.push(("plots".into(), "true".into()));
        }
        if let Some(sim) = sim {
            push(&mut flags, "scenario", &sim.scenario);
            push(&mut flags, "n", &sim.n);
            push(&mut flags, "m", &sim.m);
            push(&mut flags, "sigma", &sim.sigma);
        }
        RunConfig::resolve(&file, &flags)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> CliResult {
    match cmd {
        Command::Decompose { panel, opts } => {
            let rc = opts.resolve(None)?;
            cmd_decompose(&read_panel(&panel)?, &rc)
        }
        Command::Select { panel, opts } => {
            let rc = opts.resolve(None)?;
            cmd_select(&read_panel(&panel)?, &rc)
        }
        Command::Bootstrap { panel, opts } => {
            let rc = opts.resolve(None)?;
            cmd_bootstrap(&read_panel(&panel)?, &rc)
        }
        Command::Simulate { sim, opts } => cmd_simulate(&opts.resolve(Some(&sim))?),
        Command::Align { pair, opts } => {
            let rc = opts.resolve(None)?;
            cmd_align(&read_panel(&pair)?, &rc)
        }
        Command::Fluctuation { rates, opts } => cmd_fluctuation(&rates, &opts.resolve(None)?),
    }
}

/// Output directory plus the plotting switch.
struct Output {
    dir: PathBuf,
    plots: bool,
    x_display: Option<(f64, f64)>,
}

impl Output {
    fn new(dir: &Path, plots: bool) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            plots,
            x_display: None,
        })
    }

    fn sub(&self, name: &str) -> CliResult<Self> {
        let mut o = Output::new(&self.dir.join(name), self.plots)?;
        o.x_display = self.x_display;
        Ok(o)
    }

    fn csv(&self, name: &str, headers: &[&str], columns: &[&[f64]]) -> CliResult {
        let headers: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
        table::write_table(&self.dir.join(name), &headers, columns)
    }

    fn csv_named(&self, name: &str, headers: Vec<String>, columns: &[&[f64]]) -> CliResult {
        table::write_table(&self.dir.join(name), &headers, columns)
    }

    fn json(&self, name: &str, value: &serde_json::Value) -> CliResult {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).expect("json value");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    fn svg(&self, name: &str, chart: Chart) -> CliResult {
        if !self.plots {
            return Ok(());
        }
        let path = self.dir.join(name);
        fs::write(&path, chart.x_display(self.x_display).render()).map_err(|e| CliError::io(&path, e))
    }
}

fn prepend<'a>(first: &'a [f64], rest: impl Iterator<Item = &'a [f64]>) -> Vec<&'a [f64]> {
    let mut cols = vec![first];
    cols.extend(rest);
    cols
}

fn estimator_config(rc: &RunConfig, l: usize) -> CliResult<EstimatorConfig> {
    let mut dp = DpConfig::default();
    if let Some(n) = rc.lattice {
        dp = dp.with_lattice(n);
    }
    let cfg = EstimatorConfig::new(BasisSpec::new(rc.family, l)?)
        .with_max_iter(rc.max_iter)
        .with_dp(dp);
    cfg.validate()?;
    Ok(cfg)
}

fn dp_config(rc: &RunConfig) -> CliResult<DpConfig> {
    let mut dp = DpConfig::default();
    if let Some(n) = rc.lattice {
        dp = dp.with_lattice(n);
    }
    dp.validate()?;
    Ok(dp)
}

fn fit(fs: &[GridFunction], rc: &RunConfig, model: Model, l: usize) -> CliResult<DecompositionResult> {
    match model {
        Model::Mle => Ok(decompose(fs, &estimator_config(rc, l)?)?),
        Model::Separation => Ok(decompose_separation(fs, BasisSpec::new(rc.family, l)?)?),
    }
}

fn chart_for(title: &str, y: &str) -> Chart<'static> {
    Chart::new(title).labels("t", y)
}

fn write_estimate(out: &Output, panel: &Panel, res: &DecompositionResult) -> CliResult {
    let t = panel.grid().points();
    out.csv("h_hat.csv", &["t", "h_hat"], &[t, res.h_hat.values()])?;
    out.csv("g_hat.csv", &["t", "g_hat"], &[t, res.g_hat.values()])?;
    let mut headers = vec!["t".to_string()];
    headers.extend(panel.names.iter().cloned());
    let mut cols: Vec<&[f64]> = vec![t];
    cols.extend(res.warpings.iter().map(|w| w.values()));
    out.csv_named("warpings.csv", headers, &cols)?;
    let iters: Vec<f64> = (0..=res.cost_trace.len()).map(|k| k as f64).collect();
    let mut costs = vec![res.initial_cost];
    costs.extend_from_slice(&res.cost_trace);
    out.csv("cost_trace.csv", &["iteration", "cost"], &[&iters, &costs])?;

    if out.plots {
        let mut obs = chart_for("observations", "f");
        for f in &panel.observations {
            obs = obs.series(Series::line(t, f.values()).width(1.0));
        }
        out.svg("observations.svg", obs)?;
        out.svg("h_hat.svg", chart_for("trend", "h").series(Series::line(t, res.h_hat.values()).width(2.0)))?;
        out.svg(
            "g_hat.svg",
            chart_for("seasonality", "g").series(Series::line(t, res.g_hat.values()).width(2.0)),
        )?;
        let mut w = Chart::new("warpings").labels("t", "gamma");
        for g in &res.warpings {
            w = w.series(Series::line(t, g.values()).width(1.0));
        }
        out.svg("warpings.svg", w)?;
        let trace = Chart::new("cost")
            .labels("iteration", "negative log-likelihood")
            .log_y()
            .x_display(None)
            .series(Series::line(&iters, &costs).markers());
        let path = out.dir.join("cost_trace.svg");
        fs::write(&path, trace.render()).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

fn estimate_summary(command: &str, rc: &RunConfig, panel: &Panel, res: &DecompositionResult) -> serde_json::Value {
    json!({
        "command": command,
        "model": rc.model.name(),
        "family": res.basis.family.name(),
        "l": res.basis.l,
        "n": panel.observations.len(),
        "m": panel.grid().m(),
        "observations": panel.names,
        "time_column": panel.time_column,
        "time_range": panel.time_range.map(|(a, b)| [a, b]),
        "max_iter": rc.max_iter,
        "lattice": rc.lattice,
        "iterations": res.iterations(),
        "initial_cost": res.initial_cost,
        "final_cost": res.neg_log_likelihood,
        "sigma_hat": res.sigma_hat,
        "slack_violations": res.slack_violations,
    })
}

fn output_for(panel: &Panel, rc: &RunConfig) -> CliResult<Output> {
    let mut out = Output::new(&rc.out, rc.plots)?;
    out.x_display = panel.time_range;
    Ok(out)
}

/// Candidate levels and whether a selection was requested.
fn levels(rc: &RunConfig, default: Level) -> Vec<usize> {
    match rc.level.unwrap_or(default) {
        Level::Fixed(l) => vec![l],
        Level::Range(a, b) => (a..=b).collect(),
    }
}

fn write_selection(out: &Output, ls: &[usize], costs: &[f64]) -> CliResult {
    let lf: Vec<f64> = ls.iter().map(|&l| l as f64).collect();
    out.csv("selection.csv", &["l", "neg_log_likelihood"], &[&lf, costs])?;
    if out.plots {
        let chart = Chart::new("subspace selection")
            .labels("l", "minimized negative log-likelihood")
            .log_y()
            .series(Series::line(&lf, costs).markers());
        let path = out.dir.join("selection.svg");
        fs::write(&path, chart.render()).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

/// Fits every candidate level with MLE and returns the argmin result.
fn select_mle(panel: &Panel, rc: &RunConfig, ls: &[usize], out: &Output) -> CliResult<DecompositionResult> {
    let cfg = estimator_config(rc, ls[0])?;
    let sel = select_subspace(&panel.observations, rc.family, ls[0]..=ls[ls.len() - 1], &cfg)?;
    let costs: Vec<f64> = sel.results.iter().map(|r| r.neg_log_likelihood).collect();
    write_selection(out, ls, &costs)?;
    Ok(sel.selected_result().clone())
}

pub fn cmd_decompose(panel: &Panel, rc: &RunConfig) -> CliResult {
    let out = output_for(panel, rc)?;
    let ls = levels(rc, Level::Fixed(DEFAULT_L));
    let res = if ls.len() == 1 {
        fit(&panel.observations, rc, rc.model, ls[0])?
    } else if rc.model == Model::Mle {
        select_mle(panel, rc, &ls, &out)?
    } else {
        return Err(CliError::Usage(
            "the separation model cannot select a trend dimension; pass --l".into(),
        ));
    };
    write_estimate(&out, panel, &res)?;
    out.json("summary.json", &estimate_summary("decompose", rc, panel, &res))?;
    println!(
        "{} l={} final cost {} sigma_hat {} ({} iterations) -> {}",
        res.basis.family.name(),
        res.basis.l,
        format_value(res.neg_log_likelihood),
        format_value(res.sigma_hat),
        res.iterations(),
        out.dir.display()
    );
    Ok(())
}

pub fn cmd_select(panel: &Panel, rc: &RunConfig) -> CliResult {
    let out = output_for(panel, rc)?;
    let ls = levels(rc, Level::Range(DEFAULT_RANGE.0, DEFAULT_RANGE.1));
    let results = match rc.model {
        Model::Mle => {
            let cfg = estimator_config(rc, ls[0])?;
            select_subspace(&panel.observations, rc.family, ls[0]..=ls[ls.len() - 1], &cfg)?.results
        }
        Model::Separation => ls
            .iter()
            .map(|&l| fit(&panel.observations, rc, Model::Separation, l))
            .collect::<CliResult<Vec<_>>>()?,
    };
    let costs: Vec<f64> = results.iter().map(|r| r.neg_log_likelihood).collect();
    write_selection(&out, &ls, &costs)?;
    for res in &results {
        write_estimate(&out.sub(&format!("l{}", res.basis.l))?, panel, res)?;
    }
    let mut best = 0;
    for (i, c) in costs.iter().enumerate() {
        if *c < costs[best] {
            best = i;
        }
    }
    let table: Vec<_> = ls
        .iter()
        .zip(&costs)
        .map(|(l, c)| json!({"l": l, "neg_log_likelihood": c}))
        .collect();
    let mut summary = json!({
        "command": "select",
        "model": rc.model.name(),
        "family": rc.family.name(),
        "n": panel.observations.len(),
        "m": panel.grid().m(),
        "time_range": panel.time_range.map(|(a, b)| [a, b]),
        "candidates": table,
    });
    match rc.model {
        Model::Mle => {
            summary["selected_l"] = json!(ls[best]);
            println!("selected l = {} (cost {})", ls[best], format_value(costs[best]));
        }
        Model::Separation => {
            let spread = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - costs.iter().cloned().fold(f64::INFINITY, f64::min);
            let note = format!(
                "not selecting a trend dimension: without warping, the fitted h + g is the \
                 cross-sectional mean for every l, so the cost does not depend on l (spread {})",
                format_value(spread)
            );
            summary["selected_l"] = serde_json::Value::Null;
            summary["note"] = json!(note);
            println!("{note}");
        }
    }
    out.json("summary.json", &summary)
}

pub fn cmd_bootstrap(panel: &Panel, rc: &RunConfig) -> CliResult {
    if rc.model != Model::Mle {
        return Err(CliError::Usage("bootstrap supports --model mle only".into()));
    }
    let out = output_for(panel, rc)?;
    let ls = levels(rc, Level::Fixed(DEFAULT_L));
    let l = if ls.len() == 1 {
        ls[0]
    } else {
        select_mle(panel, rc, &ls, &out)?.basis.l
    };
    let cfg = estimator_config(rc, l)?;
    let bcfg = BootstrapConfig {
        replicates: rc.replicates,
        alpha: rc.alpha,
        seed: rc.seed,
    };
    bcfg.validate()?;
    let summary = bootstrap(&panel.observations, &cfg, &bcfg)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    write_estimate(&out, panel, &summary.estimate)?;

    let t = panel.grid().points();
    let b = &summary.band_h;
    out.csv(
        "band_h.csv",
        &["t", "low", "mean", "high", "estimate"],
        &[t, b.low.values(), summary.h_mean.values(), b.high.values(), summary.estimate.h_hat.values()],
    )?;
    let b = &summary.band_g;
    out.csv(
        "band_g.csv",
        &["t", "low", "mean", "high", "estimate"],
        &[t, b.low.values(), summary.g_mean.values(), b.high.values(), summary.estimate.g_hat.values()],
    )?;

    let names = ["null", "constant", "linear"];
    let tests: Vec<_> = names.iter().map(|k| summary.stats[*k]).collect();
    let stat: Vec<f64> = tests.iter().map(|t| t.statistic).collect();
    let se: Vec<f64> = tests.iter().map(|t| t.se_b).collect();
    let p: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
    table::write_labelled(
        &out.dir.join("tests.csv"),
        &["test", "statistic", "se_b", "p_value"].map(String::from),
        &names.map(String::from),
        &[&stat, &se, &p],
    )?;

    let reps = &summary.replicates;
    let idx: Vec<f64> = (1..=reps.len()).map(|k| k as f64).collect();
    let retries: Vec<f64> = reps.iter().map(|r| r.retries as f64).collect();
    let per_stat: Vec<Vec<f64>> = (0..3).map(|k| reps.iter().map(|r| r.stats[k]).collect()).collect();
    out.csv(
        "replicates.csv",
        &["replicate", "retries", "rho_null", "rho_constant", "rho_linear"],
        &[&idx, &retries, &per_stat[0], &per_stat[1], &per_stat[2]],
    )?;
    let mut headers = vec!["t".to_string()];
    headers.extend((1..=reps.len()).map(|k| format!("r{k}")));
    let mut cols: Vec<&[f64]> = vec![t];
    cols.extend(reps.iter().map(|r| r.h.values()));
    out.csv_named("replicates_h.csv", headers.clone(), &cols)?;
    let mut cols: Vec<&[f64]> = vec![t];
    cols.extend(reps.iter().map(|r| r.g.values()));
    out.csv_named("replicates_g.csv", headers, &cols)?;

    out.svg(
        "band_h.svg",
        chart_for("trend band", "h")
            .band(t, summary.band_h.low.values(), summary.band_h.high.values())
            .series(Series::line(t, summary.estimate.h_hat.values()).width(2.0)),
    )?;
    out.svg(
        "band_g.svg",
        chart_for("seasonality band", "g")
            .band(t, summary.band_g.low.values(), summary.band_g.high.values())
            .series(Series::line(t, summary.estimate.g_hat.values()).width(2.0)),
    )?;

    let mut meta = estimate_summary("bootstrap", rc, panel, &summary.estimate);
    meta["replicates"] = json!(bcfg.replicates);
    meta["alpha"] = json!(bcfg.alpha);
    meta["seed"] = json!(bcfg.seed);
    meta["failed"] = json!(summary.failed);
    meta["warnings"] = json!(summary.warnings);
    meta["tests"] = json!(summary.stats);
    out.json("summary.json", &meta)?;
    for (name, t) in names.iter().zip(&tests) {
        println!(
            "{name:>8}: rho {}  se {}  p {}",
            format_value(t.statistic),
            format_value(t.se_b),
            format_value(t.p_value)
        );
    }
    Ok(())
}

pub fn cmd_simulate(rc: &RunConfig) -> CliResult {
    let mut spec = ScenarioSpec::new(rc.scenario).with_seed(rc.seed);
    if let Some(n) = rc.n {
        spec = spec.with_n(n);
    }
    if let Some(m) = rc.m {
        spec = spec.with_m(m);
    }
    if let Some(s) = rc.sigma {
        spec = spec.with_sigma(s);
    }
    let panel = generate(&spec)?;
    let out = Output::new(&rc.out, rc.plots)?;
    let t = panel.grid().points();
    let names: Vec<String> = (1..=spec.n).map(|i| format!("f{i}")).collect();
    let mut headers = vec!["t".to_string()];
    headers.extend(names.iter().cloned());
    out.csv_named(
        "panel.csv",
        headers.clone(),
        &prepend(t, panel.observations.iter().map(|f| f.values())),
    )?;
    out.csv_named(
        "noiseless.csv",
        headers.clone(),
        &prepend(t, panel.noiseless.iter().map(|f| f.values())),
    )?;
    out.csv_named(
        "truth_warpings.csv",
        headers,
        &prepend(t, panel.truth.warpings.iter().map(|w| w.values())),
    )?;
    out.csv("truth_h.csv", &["t", "h"], &[t, panel.truth.h.values()])?;
    out.csv("truth_g.csv", &["t", "g"], &[t, panel.truth.g.values()])?;

    let designated = rc.scenario.trend_basis();
    let basis = build_orthonormal(designated, panel.grid())?;
    let diag = orthogonality_diagnostics(&panel.truth.g, &basis)?;
    out.json(
        "summary.json",
        &json!({
            "command": "simulate",
            "scenario": spec.scenario.name(),
            "n": spec.n,
            "m": spec.m,
            "sigma": spec.sigma,
            "seed": spec.seed,
            "trend_basis": {"family": designated.family.name(), "l": designated.l},
            "g_basis_coefficients": diag,
        }),
    )?;

    if out.plots {
        let mut obs = chart_for("observations", "f");
        for f in &panel.observations {
            obs = obs.series(Series::line(t, f.values()).width(1.0));
        }
        out.svg("observations.svg", obs)?;
        out.svg("truth_h.svg", chart_for("trend", "h").series(Series::line(t, panel.truth.h.values())))?;
        out.svg("truth_g.svg", chart_for("seasonality", "g").series(Series::line(t, panel.truth.g.values())))?;
        let mut w = chart_for("warpings", "gamma");
        for g in &panel.truth.warpings {
            w = w.series(Series::line(t, g.values()).width(1.0));
        }
        out.svg("truth_warpings.svg", w)?;
    }
    println!(
        "{} n={} m={} sigma={} seed={} -> {}",
        spec.scenario.name(),
        spec.n,
        spec.m,
        format_value(spec.sigma),
        spec.seed,
        out.dir.display()
    );
    Ok(())
}

pub fn cmd_align(pair: &Panel, rc: &RunConfig) -> CliResult {
    if pair.observations.len() != 2 {
        return Err(CliError::Input(format!(
            "align expects exactly two value columns (q, r), found {}",
            pair.observations.len()
        )));
    }
    let (q, r) = (&pair.observations[0], &pair.observations[1]);
    let dp = dp_config(rc)?;
    let aligned = dp_align(q, r, &dp)?;
    let problem = Alignment::new(q, r, &dp)?;
    let identity_cost = problem.path_cost(&problem.identity_path())?;
    let warped = action(r, &aligned.warping)?;

    let out = output_for(pair, rc)?;
    let t = pair.grid().points();
    out.csv("warping.csv", &["t", "gamma"], &[t, aligned.warping.values()])?;
    let r_name = format!("{}_aligned", pair.names[1]);
    out.csv_named(
        "aligned.csv",
        vec!["t".into(), pair.names[0].clone(), r_name],
        &[t, q.values(), warped.values()],
    )?;
    out.json(
        "summary.json",
        &json!({
            "command": "align",
            "q": pair.names[0],
            "r": pair.names[1],
            "m": pair.grid().m(),
            "lattice": dp.effective_lattice(pair.grid().m()),
            "cost": aligned.cost,
            "identity_cost": identity_cost,
            "time_range": pair.time_range.map(|(a, b)| [a, b]),
        }),
    )?;
    out.svg(
        "alignment.svg",
        chart_for("alignment", "value")
            .series(Series::line(t, q.values()).width(2.0))
            .series(Series::line(t, r.values()).color("#aaaaaa"))
            .series(Series::line(t, warped.values())),
    )?;
    out.svg("warping.svg", chart_for("warping", "gamma").series(Series::line(t, aligned.warping.values())))?;
    println!(
        "cost {} (identity {}) -> {}",
        format_value(aligned.cost),
        format_value(identity_cost),
        out.dir.display()
    );
    Ok(())
}

/// The rates file holds one numeric column, or a label column followed by
/// the rates.
pub fn cmd_fluctuation(path: &Path, rc: &RunConfig) -> CliResult {
    let text = table::read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() || headers.len() > 2 {
        return Err(CliError::Input(format!(
            "expected a rate column, optionally preceded by a label column; found {} columns",
            headers.len()
        )));
    }
    let labelled = headers.len() == 2;
    let rate_name = headers.get(headers.len() - 1).unwrap_or("rate").to_string();
    let mut labels = Vec::new();
    let mut rates = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = &rec[rec.len() - 1];
        let v: f64 = cell.parse().map_err(|_| {
            CliError::Input(format!("line {line}, column '{rate_name}': cannot parse '{cell}' as a number"))
        })?;
        if labelled {
            labels.push(rec[0].to_string());
        }
        rates.push(v);
    }
    let tau = fluctuation(&rates)?;
    let out = Output::new(&rc.out, rc.plots)?;
    let file = out.dir.join("fluctuation.csv");
    if labelled {
        table::write_labelled(
            &file,
            &[headers[0].to_string(), "tau".into()],
            &labels[1..],
            &[&tau],
        )?;
    } else {
        table::write_table(&file, &["tau".to_string()], &[&tau])?;
    }
    let k: Vec<f64> = (1..=tau.len()).map(|k| k as f64).collect();
    out.svg(
        "fluctuation.svg",
        Chart::new("exchange fluctuation").labels("step", "tau (%)").series(Series::line(&k, &tau)),
    )?;
    println!("{} fluctuation values -> {}", tau.len(), file.display());
    Ok(())
}
