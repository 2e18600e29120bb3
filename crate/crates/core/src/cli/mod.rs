//! Command-line front-end.
//!
//! Every flag may also come from a TOML config file given by `--config`.
//! Top-level keys apply to any subcommand that accepts them, and keys under a
//! `[subcommand]` table apply to that subcommand only. Keys are flag names
//! (`population-cap` or `population_cap`). Flags on the command line win over
//! the file, which wins over the `VOTING_BBM_WORKERS` environment variable and
//! built-in defaults.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime or resource failure,
//! 3 failed `compare --assert`.

mod commands;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::parser::ValueSource;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use output::{parse_range, parse_x_grid};

#[derive(Debug, Parser)]
#[command(
    name = "voting-bbm",
    version,
    about = "Voting models on branching Brownian motion and their PDE oracle"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Worker threads for Monte Carlo; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, env = "VOTING_BBM_WORKERS", default_value_t = 0)]
    pub workers: usize,
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Write a JSON summary here.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Suppress reports on stderr.
    #[arg(long, short = 'q', global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a polynomial nonlinearity into a model document.
    Compile(CompileArgs),
    /// Print the nonlinearity of a model document.
    Nonlinearity(NonlinearityArgs),
    /// Test whether a nonlinearity is of McKean type.
    Decompose(DecomposeArgs),
    /// List or instantiate named models.
    Catalog(CatalogArgs),
    /// Monte Carlo estimates of u(t, x) on an x-grid.
    Simulate(SimulateArgs),
    /// Finite-difference solution of u_t = u_xx + f(u).
    Solve(SolveArgs),
    /// Monte Carlo against the PDE, with per-point z-scores.
    Compare(CompareArgs),
    /// Front position series with pulled and pushed fits.
    Front(FrontArgs),
    /// Distribution of the maximum of branching Brownian motion against the PDE.
    Maxdist(MaxdistArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Outcome,
    Threshold,
    Recursive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Chosen from the model kind.
    Auto,
    Voting,
    Threshold,
    Recursive,
    /// `E[prod g(leaves)]` on the model's genealogy.
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ci {
    Normal,
    Wilson,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompileArgs {
    /// Polynomial: "-u + 3u^2 - 2u^3", "[0, -1, 3, -2]", or fkpp / allen-cahn / heat.
    #[arg(long, allow_hyphen_values = true)]
    pub f: String,
    #[arg(long, value_enum, default_value_t = Kind::Outcome)]
    pub kind: Kind,
    /// Branching rate; defaults to the smallest admissible one, floored at 1.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Tree arity; defaults to max(deg f, 2).
    #[arg(long)]
    pub arity: Option<usize>,
    /// For outcome models, use the larger default rate that makes the table monotone.
    #[arg(long)]
    pub monotone: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NonlinearityArgs {
    /// Model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Print the coefficient list instead of the polynomial text.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecomposeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub f: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CatalogParamArgs {
    /// Offspring law: "3" for pure ternary, or "2:0.5,3:0.5".
    #[arg(long)]
    pub offspring: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Group size of the group model.
    #[arg(long = "group-m")]
    pub group_m: Option<usize>,
    /// Half-arity of the composite model.
    #[arg(long = "evs-n")]
    pub evs_n: Option<usize>,
    #[arg(long)]
    pub chi: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CatalogArgs {
    /// Model name; omit to list all.
    pub name: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: CatalogParamArgs,
}

/// Where the model comes from: a document, a catalog entry or a compiled polynomial.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Model document.
    #[arg(long, conflicts_with_all = ["f", "catalog"])]
    pub model: Option<PathBuf>,
    /// Nonlinearity to compile (see `compile --f`).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "catalog")]
    pub f: Option<String>,
    /// Catalog model name.
    #[arg(long)]
    pub catalog: Option<String>,
    /// Compiler used for --f.
    #[arg(long, value_enum, default_value_t = Kind::Outcome)]
    pub kind: Kind,
    #[arg(long)]
    pub arity: Option<usize>,
    #[arg(long)]
    pub monotone: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: CatalogParamArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    /// Initial datum: step, step:s, interval:a:b, gauss:c:w[:h], const:c, table:x=u,..., not:<datum>.
    #[arg(long, default_value = "step", allow_hyphen_values = true)]
    pub datum: String,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Evaluation points: "min:max:count", a comma list, or a single value.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub x: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, value_enum, default_value_t = Estimator::Auto)]
    pub estimator: Estimator,
    /// sampled or conditional for voting, direct or via-outcome for threshold models.
    #[arg(long)]
    pub mode: Option<String>,
    /// Replicates per point.
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Ci::Normal)]
    pub ci: Ci,
    /// Largest number of leaves allowed in one tree.
    #[arg(long, default_value_t = crate::bbm::DEFAULT_POPULATION_CAP)]
    pub population_cap: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Spatial domain "min:max".
    #[arg(long, default_value = "-12:12", allow_hyphen_values = true)]
    pub domain: String,
    #[arg(long, default_value_t = 0.02)]
    pub dx: f64,
    /// Time step; defaults to 0.25 dx^2.
    #[arg(long)]
    pub dt: Option<f64>,
    /// RK4 substeps per half reaction step.
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sample: SampleArgs,
    /// Write an outline of the first replicate's tree at the first x.
    #[arg(long)]
    #[serde(skip)]
    pub dump_tree: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "step", allow_hyphen_values = true)]
    pub datum: String,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Also write the field every this much time.
    #[arg(long)]
    pub snapshot_every: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// A point passes when |MC - PDE| <= z_max * SE + allowance.
    #[arg(long, default_value_t = 3.0)]
    pub z_max: f64,
    /// Absolute allowance for solver error.
    #[arg(long, default_value_t = 0.0)]
    pub allowance: f64,
    /// Exit with code 3 if any point fails.
    #[arg(long)]
    pub assert: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrontArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "step", allow_hyphen_values = true)]
    pub datum: String,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    /// Fit window "t_start:t_end".
    #[arg(long, default_value = "20:200")]
    pub window: String,
    #[arg(long, default_value_t = 0.05)]
    pub dx: f64,
    #[arg(long)]
    pub dt: Option<f64>,
    /// The comoving domain is [X - w, X + w].
    #[arg(long, default_value_t = 40.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sample_every: f64,
    #[arg(long, default_value_t = 1.0)]
    pub regrid_every: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MaxdistArgs {
    /// Offspring law of the branching Brownian motion.
    #[arg(long, default_value = "2")]
    pub offspring: String,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value = "0:2:3", allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Ci::Normal)]
    pub ci: Ci,
    #[arg(long, default_value_t = crate::bbm::DEFAULT_POPULATION_CAP)]
    pub population_cap: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Compile(_) => "compile",
            Command::Nonlinearity(_) => "nonlinearity",
            Command::Decompose(_) => "decompose",
            Command::Catalog(_) => "catalog",
            Command::Simulate(_) => "simulate",
            Command::Solve(_) => "solve",
            Command::Compare(_) => "compare",
            Command::Front(_) => "front",
            Command::Maxdist(_) => "maxdist",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input: flags, files, model or parameter constraints.
    Validation(String),
    /// The computation failed: resources, instability, I/O.
    Runtime(String),
    /// `compare --assert` found failing points.
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Assertion(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) | CliError::Assertion(m) => m,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(ParseOutcome::Exit(code)) => return code,
        Err(ParseOutcome::Error(e)) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

enum ParseOutcome {
    Exit(i32),
    Error(CliError),
}

fn clap_outcome(e: clap::Error) -> ParseOutcome {
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = e.print();
            ParseOutcome::Exit(0)
        }
        _ => {
            let _ = e.print();
            ParseOutcome::Exit(1)
        }
    }
}

fn parse(argv: &[OsString]) -> Result<Cli, ParseOutcome> {
    let matches = Cli::command()
        .try_get_matches_from(argv)
        .map_err(clap_outcome)?;
    let cli = Cli::from_arg_matches(&matches).map_err(clap_outcome)?;
    let Some(path) = cli.global.config.clone() else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| {
        ParseOutcome::Error(CliError::Validation(format!(
            "cannot read config {}: {e}",
            path.display()
        )))
    })?;
    let extra =
        config_args(&text, &path, cli.command.name(), &matches).map_err(ParseOutcome::Error)?;
    if extra.is_empty() {
        return Ok(cli);
    }
    let mut full = argv.to_vec();
    full.extend(extra.iter().map(|(arg, _)| OsString::from(arg)));
    let matches = Cli::command().try_get_matches_from(&full).map_err(|e| {
        // point at the config line when the offending value came from the file
        let flag = match e.get(ContextKind::InvalidArg) {
            Some(ContextValue::String(s)) => s
                .split_whitespace()
                .next()
                .unwrap_or("")
                .trim_start_matches('-')
                .to_string(),
            _ => String::new(),
        };
        let from_file = extra.iter().find(|(_, origin)| origin.key == flag);
        match from_file {
            Some((_, origin)) => ParseOutcome::Error(CliError::Validation(
                format!(
                    "{}:{}: key `{}`: {}",
                    path.display(),
                    origin.line,
                    origin.key,
                    e.kind()
                ) + &detail(&e),
            )),
            None => clap_outcome(e),
        }
    })?;
    Cli::from_arg_matches(&matches).map_err(clap_outcome)
}

fn detail(e: &clap::Error) -> String {
    let rendered = e.render().to_string();
    let first = rendered
        .lines()
        .next()
        .unwrap_or("")
        .trim_start_matches("error:")
        .trim();
    format!(" ({first})")
}

struct Origin {
    key: String,
    line: usize,
}

/// Line of `key = ...` inside `section` (top level when `None`), 1-based.
fn key_line(text: &str, section: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        if current.as_deref() == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return i + 1;
                }
            }
        }
    }
    0
}

fn value_text(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        toml::Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(value_text).collect();
            parts.map(|p| p.join(","))
        }
        _ => None,
    }
}

/// Extra `--flag=value` arguments for config keys not given on the command line.
fn config_args(
    text: &str,
    path: &std::path::Path,
    subcommand: &str,
    matches: &clap::ArgMatches,
) -> Result<Vec<(String, Origin)>, CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        CliError::Validation(format!("config {}: {e}", path.display()))
    })?;
    let root = Cli::command();
    let sub = root
        .find_subcommand(subcommand)
        .expect("known subcommand")
        .clone();
    let sub_matches = matches
        .subcommand_matches(subcommand)
        .expect("parsed subcommand");
    let all_longs: Vec<String> = root
        .get_subcommands()
        .flat_map(|c| {
            c.get_arguments()
                .filter_map(|a| a.get_long().map(str::to_string))
                .collect::<Vec<_>>()
        })
        .chain(
            root.get_arguments()
                .filter_map(|a| a.get_long().map(str::to_string)),
        )
        .collect();

    let mut out = Vec::new();
    let mut entries: Vec<(Option<&str>, &str, &toml::Value)> = Vec::new();
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) => {
                if root.find_subcommand(key).is_none() {
                    return Err(CliError::Validation(format!(
                        "{}:{}: unknown section [{key}]",
                        path.display(),
                        key_line(text, None, &format!("[{key}]")).max(section_line(text, key))
                    )));
                }
                if key == subcommand {
                    entries.extend(
                        section
                            .iter()
                            .map(|(k, v)| (Some(key.as_str()), k.as_str(), v)),
                    );
                }
            }
            _ => entries.push((None, key.as_str(), value)),
        }
    }
    for (section, key, value) in entries {
        let long = key.replace('_', "-");
        let line = key_line(text, section, key);
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(long.as_str()));
        let Some(arg) = arg else {
            let known_elsewhere = section.is_none() && all_longs.contains(&long);
            if known_elsewhere {
                continue;
            }
            return Err(CliError::Validation(format!(
                "{}:{line}: unknown key `{key}`",
                path.display()
            )));
        };
        if long == "config" {
            return Err(CliError::Validation(format!(
                "{}:{line}: `config` cannot be set from a config file",
                path.display()
            )));
        }
        let id = arg.get_id().as_str();
        if sub_matches.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let text_value = value_text(value).ok_or_else(|| {
            CliError::Validation(format!(
                "{}:{line}: key `{key}` must be a string, number, boolean or array",
                path.display()
            ))
        })?;
        let origin = Origin {
            key: long.clone(),
            line,
        };
        if arg.get_action().takes_values() {
            out.push((format!("--{long}={text_value}"), origin));
        } else {
            match value {
                toml::Value::Boolean(true) => out.push((format!("--{long}"), origin)),
                toml::Value::Boolean(false) => {}
                _ => {
                    return Err(CliError::Validation(format!(
                        "{}:{line}: key `{key}` is a switch and must be true or false",
                        path.display()
                    )))
                }
            }
        }
    }
    Ok(out)
}

fn section_line(text: &str, name: &str) -> usize {
    text.lines()
        .position(|l| {
            l.trim()
                .trim_start_matches('[')
                .trim_end_matches(']')
                .trim()
                == name
                && l.trim().starts_with('[')
        })
        .map_or(0, |i| i + 1)
}
