//! Command-line front end.
//!
//! Data goes to standard output (or `--out`), diagnostics to standard
//! error. Exit codes: 0 success, 1 usage, 2 nonconvergence, 3 a verified
//! ordering hypothesis with a violated ordering.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, ComparisonReport};
use crate::continuation::{self, ContinuationError, RootWindow, SpectralCurve};
use crate::eigensolve::{find_state, SolveError, SolverConfig};
use crate::potentials::{PotentialError, PotentialFamily};
use crate::radial::{Parity, RadialError, RadialProblem};

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "KG_SPECTRA_CONFIG";

/// Largest identity residual accepted by `compare`.
pub const IDENTITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Usage = 1,
    NonConvergence = 2,
    Contradiction = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Log,
    Linear,
}

/// Settings shared by all commands. Config files hold the same fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub solver: SolverConfig,
    /// `None` uses the command's natural format.
    pub output: Option<OutputFormat>,
    pub out_path: Option<PathBuf>,
    /// Worker count, 0 = one per core.
    pub threads: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "kg-spectra", version, about = "Bound states of the radial Klein-Gordon equation")]
pub struct Cli {
    /// JSON config file (default: $KG_SPECTRA_CONFIG).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write data here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Spatial dimension.
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    /// Angular momentum (d >= 2).
    #[arg(long)]
    pub l: Option<u32>,
    /// Parity (d = 1).
    #[arg(long)]
    pub parity: Option<Parity>,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one bound state.
    Solve {
        #[arg(long)]
        potential: String,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0)]
        state: usize,
    },
    /// Compare the ground states of two potentials through the ordering identity.
    Compare {
        #[arg(long)]
        potential_a: String,
        #[arg(long)]
        potential_b: String,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Sweep a potential parameter and differentiate the level.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[arg(long)]
        potential: String,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0)]
        state: usize,
        #[arg(long)]
        sweep_param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Spacing::Linear)]
        spacing: Spacing,
    },
    /// Trace the parameter as a function of energy, folds included.
    #[command(allow_negative_numbers = true)]
    Curve {
        #[arg(long)]
        potential: String,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0)]
        state: usize,
        #[arg(long, default_value = "a")]
        sweep_param: String,
        #[arg(long)]
        e_from: f64,
        #[arg(long)]
        e_to: f64,
        #[arg(long, default_value_t = 37)]
        e_points: usize,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{message}")]
    NonConvergence { message: String, diagnostic: serde_json::Value },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) | CliError::Io(_) => ExitCode::Usage,
            CliError::NonConvergence { .. } => ExitCode::NonConvergence,
        }
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<RadialError> for CliError {
    fn from(e: RadialError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn solve_error(e: SolveError, context: serde_json::Value) -> CliError {
    match e {
        SolveError::Inadmissible(_) | SolveError::Config(_) | SolveError::Radial(_) | SolveError::Potential(_) => {
            CliError::Usage(e.to_string())
        }
        other => {
            let message = other.to_string();
            CliError::NonConvergence {
                diagnostic: serde_json::json!({ "error": message, "request": context }),
                message,
            }
        }
    }
}

fn analysis_error(e: AnalysisError, context: serde_json::Value) -> CliError {
    match e {
        AnalysisError::Solve(s) => solve_error(s, context),
        AnalysisError::Potential(p) => p.into(),
        AnalysisError::Incompatible(msg) => CliError::Usage(msg),
        other => {
            let message = other.to_string();
            CliError::NonConvergence {
                diagnostic: serde_json::json!({ "error": message, "request": context }),
                message,
            }
        }
    }
}

fn continuation_error(e: ContinuationError, context: serde_json::Value) -> CliError {
    match e {
        ContinuationError::Solve(s) => solve_error(s, context),
        ContinuationError::Potential(p) => p.into(),
        ContinuationError::BadParameterGrid
        | ContinuationError::EnergyOutsideWindow { .. }
        | ContinuationError::BadBracket(..) => CliError::Usage(e.to_string()),
        other => {
            let message = other.to_string();
            CliError::NonConvergence {
                diagnostic: serde_json::json!({ "error": message, "request": context }),
                message,
            }
        }
    }
}

impl ProblemArgs {
    fn build(&self, family: PotentialFamily) -> Result<RadialProblem, CliError> {
        if self.d == 1 {
            if self.l.is_some() {
                return Err(CliError::Usage("--l applies to d >= 2; use --parity for d = 1".into()));
            }
            Ok(RadialProblem::one_dimensional(self.parity.unwrap_or(Parity::Even), self.m, family)?)
        } else {
            if self.parity.is_some() {
                return Err(CliError::Usage("--parity applies to d = 1; use --l for d >= 2".into()));
            }
            Ok(RadialProblem::new(self.d, self.l.unwrap_or(0), self.m, family)?)
        }
    }

    fn channel(&self) -> Channel {
        if self.d == 1 {
            Channel { d: 1, l: None, parity: Some(self.parity.unwrap_or(Parity::Even)), m: self.m }
        } else {
            Channel { d: self.d, l: Some(self.l.unwrap_or(0)), parity: None, m: self.m }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Channel {
    d: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parity: Option<Parity>,
    m: f64,
}

#[derive(Serialize)]
struct SolveDocument<'a> {
    potential: String,
    #[serde(flatten)]
    channel: Channel,
    state: usize,
    energy: f64,
    nodes: usize,
    norm_error: f64,
    mismatch_residual: f64,
    config: &'a SolverConfig,
}

#[derive(Serialize)]
struct CompareDocument<'a> {
    potential_a: String,
    potential_b: String,
    #[serde(flatten)]
    channel: Channel,
    #[serde(flatten)]
    report: &'a ComparisonReport,
    verdict: Option<bool>,
    config: &'a SolverConfig,
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e6)`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn format_option(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), format_number)
}

fn json_line(value: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

struct Output {
    text: String,
    /// Side file written next to `--out`.
    companion: Option<(String, String)>,
}

impl Output {
    fn plain(text: String) -> Self {
        Output { text, companion: None }
    }
}

fn cmd_solve(
    potential: &str,
    problem: &ProblemArgs,
    state: usize,
    run: &RunConfig,
) -> Result<Output, CliError> {
    let family = PotentialFamily::parse(potential)?;
    let channel = problem.channel();
    let rp = problem.build(family.clone())?;
    let context = serde_json::json!({ "potential": family.to_string(), "channel": &channel, "state": state });
    let res = find_state(&rp, state, &run.solver).map_err(|e| solve_error(e, context))?;
    let doc = SolveDocument {
        potential: family.to_string(),
        channel,
        state,
        energy: res.energy,
        nodes: res.nodes,
        norm_error: res.norm_error,
        mismatch_residual: res.mismatch_residual,
        config: &run.solver,
    };
    match run.output.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => Ok(Output::plain(json_line(&doc)?)),
        OutputFormat::Csv => {
            let c = &doc.channel;
            let mut s = String::from("potential,d,l,parity,m,state,energy,nodes,norm_error,mismatch_residual\n");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                doc.potential,
                c.d,
                c.l.map(|l| l.to_string()).unwrap_or_default(),
                c.parity.map(|p| p.to_string()).unwrap_or_default(),
                format_number(c.m),
                doc.state,
                format_number(doc.energy),
                doc.nodes,
                format_number(doc.norm_error),
                format_number(doc.mismatch_residual),
            );
            Ok(Output::plain(s))
        }
    }
}

fn cmd_compare(
    spec_a: &str,
    spec_b: &str,
    problem: &ProblemArgs,
    run: &RunConfig,
) -> Result<(Output, ExitCode), CliError> {
    let fa = PotentialFamily::parse(spec_a)?;
    let fb = PotentialFamily::parse(spec_b)?;
    let template = problem.build(fa.clone())?;
    let channel = problem.channel();
    let context = serde_json::json!({
        "potential_a": fa.to_string(),
        "potential_b": fb.to_string(),
        "channel": &channel,
    });
    let report = analysis::check_theorem1(&fa.to_string(), &fb.to_string(), &template, &run.solver)
        .map_err(|e| analysis_error(e, context))?;
    let code = if report.contradicts_theorem() {
        ExitCode::Contradiction
    } else if !(report.residual <= IDENTITY_TOL) {
        ExitCode::NonConvergence
    } else {
        ExitCode::Success
    };
    let doc = CompareDocument {
        potential_a: fa.to_string(),
        potential_b: fb.to_string(),
        channel,
        report: &report,
        verdict: report.verdict(),
        config: &run.solver,
    };
    let text = match run.output.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => json_line(&doc)?,
        OutputFormat::Csv => {
            let r = &report;
            format!(
                "e1,e2,lhs,rhs,residual,w_min,ordering_ok,hypotheses_ok\n{},{},{},{},{},{},{},{}\n",
                format_number(r.e1),
                format_number(r.e2),
                format_number(r.lhs),
                format_number(r.rhs),
                format_number(r.residual),
                format_number(r.w_min),
                u8::from(r.ordering_ok),
                u8::from(r.hypotheses_ok),
            )
        }
    };
    Ok((Output::plain(text), code))
}

fn parameter_grid(from: f64, to: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>, CliError> {
    if points == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    if !(from.is_finite() && to.is_finite()) {
        return Err(CliError::Usage("--from and --to must be finite".into()));
    }
    if points > 1 && from == to {
        return Err(CliError::Usage("--from and --to coincide".into()));
    }
    match spacing {
        Spacing::Linear => Ok(continuation::linear_grid(from, to, points)),
        Spacing::Log if from > 0.0 && to > 0.0 => Ok(continuation::log_grid(from, to, points)),
        Spacing::Log => Err(CliError::Usage("--spacing log needs positive --from and --to".into())),
    }
}

fn sweep_csv(curve: &SpectralCurve) -> String {
    let mut s = String::from("a,E,dE_hf,dE_fd,nodes,converged\n");
    for p in &curve.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            format_number(p.a),
            format_number(p.e),
            format_option(p.de_hf),
            format_option(p.de_fd),
            p.nodes,
            u8::from(p.converged),
        );
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    potential: &str,
    problem: &ProblemArgs,
    state: usize,
    sweep_param: &str,
    grid: Vec<f64>,
    run: &RunConfig,
) -> Result<Output, CliError> {
    let family = PotentialFamily::parse(potential)?.with_sweep(sweep_param)?;
    let template = problem.build(family.clone())?;
    let context = serde_json::json!({ "potential": family.to_string(), "channel": problem.channel(), "state": state });
    let curve = continuation::sweep_parameter(&family, &template, state, &grid, &run.solver)
        .map_err(|e| continuation_error(e, context))?;
    match run.output.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => Ok(Output::plain(sweep_csv(&curve))),
        OutputFormat::Json => Ok(Output::plain(json_line(&curve)?)),
    }
}

fn curve_csv(curve: &SpectralCurve) -> String {
    let mut s = String::from("branch_pos,a,E,dE_hf,nodes,solved_by\n");
    for (i, p) in curve.points.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{}",
            format_number(p.a),
            format_number(p.e),
            format_option(p.de_hf),
            p.nodes,
            p.solved_by.as_str(),
        );
    }
    if let Some((a, e)) = curve.fold {
        let _ = writeln!(s, "# fold a={} E={}", format_number(a), format_number(e));
    }
    s
}

fn plot_data(curve: &SpectralCurve) -> String {
    let mut s = String::from("# a E\n");
    for p in curve.converged_points() {
        let _ = writeln!(s, "{} {}", format_number(p.a), format_number(p.e));
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_curve(
    potential: &str,
    problem: &ProblemArgs,
    state: usize,
    sweep_param: &str,
    e_from: f64,
    e_to: f64,
    e_points: usize,
    run: &RunConfig,
) -> Result<Output, CliError> {
    let m = problem.m;
    for (flag, e) in [("--e-from", e_from), ("--e-to", e_to)] {
        if !(e > -m && e < m) {
            return Err(CliError::Usage(format!("{flag} {e} is outside the discrete window (-{m}, {m})")));
        }
    }
    if e_points == 0 {
        return Err(CliError::Usage("--e-points must be at least 1".into()));
    }
    let family = PotentialFamily::parse(potential)?.with_sweep(sweep_param)?;
    let template = problem.build(family.clone())?;
    let e_grid = continuation::linear_grid(e_from, e_to, e_points);
    let context = serde_json::json!({ "potential": family.to_string(), "channel": problem.channel(), "state": state });
    let curve =
        continuation::trace_folded_curve(&family, &template, state, &e_grid, &RootWindow::default(), &run.solver)
            .map_err(|e| continuation_error(e, context))?;
    let text = match run.output.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => curve_csv(&curve),
        OutputFormat::Json => json_line(&curve)?,
    };
    let companion = run.out_path.as_ref().map(|p| (format!("{}.gp-data", p.display()), plot_data(&curve)));
    Ok(Output { text, companion })
}

fn merged_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
    let mut run = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = cli.output {
        run.output = Some(o);
    }
    if let Some(p) = &cli.out {
        run.out_path = Some(p.clone());
    }
    if let Some(t) = cli.threads {
        run.threads = t;
    }
    run.solver.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(run)
}

fn dispatch(cli: &Cli, run: &RunConfig) -> Result<(Output, ExitCode), CliError> {
    let ok = |o: Output| (o, ExitCode::Success);
    match &cli.command {
        Command::Solve { potential, problem, state } => cmd_solve(potential, problem, *state, run).map(ok),
        Command::Compare { potential_a, potential_b, problem } => cmd_compare(potential_a, potential_b, problem, run),
        Command::Sweep { potential, problem, state, sweep_param, from, to, points, spacing } => {
            let grid = parameter_grid(*from, *to, *points, *spacing)?;
            cmd_sweep(potential, problem, *state, sweep_param, grid, run).map(ok)
        }
        Command::Curve { potential, problem, state, sweep_param, e_from, e_to, e_points } => {
            cmd_curve(potential, problem, *state, sweep_param, *e_from, *e_to, *e_points, run).map(ok)
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<ExitCode, CliError> {
    let run = merged_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", run.threads)))?;
    let (output, code) = pool.install(|| dispatch(cli, &run))?;
    match &run.out_path {
        Some(path) => std::fs::write(path, &output.text)?,
        None => stdout.write_all(output.text.as_bytes())?,
    }
    if let Some((path, text)) = output.companion {
        std::fs::write(path, text)?;
    }
    if code == ExitCode::Contradiction {
        writeln!(stderr, "error: ordering hypotheses hold but the energies are not ordered")?;
    } else if code == ExitCode::NonConvergence {
        writeln!(stderr, "error: identity residual exceeds {IDENTITY_TOL:e}")?;
    }
    Ok(code)
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { ExitCode::Usage as i32 } else { ExitCode::Success as i32 };
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(code) => code as i32,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if let CliError::NonConvergence { diagnostic, .. } = &e {
                if let Ok(text) = serde_json::to_string_pretty(diagnostic) {
                    let _ = writeln!(stderr, "{text}");
                }
            }
            e.code() as i32
        }
    }
}
