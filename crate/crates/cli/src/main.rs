//! `tfbt`: reconstruct band structures of finite resonator chains from the command line.
//!
//! Exit codes: 0 on success, 1 when inputs or parameters are invalid, 2 when
//! `verify` reports a failing check.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use commands::{resolve_symbol, scenario_from, symbol_from_value, TransformInput};
use config::{merge, Common, FileConfig};

#[derive(Parser)]
#[command(name = "tfbt", version, about = "Band-structure reconstruction with the truncated Floquet-Bloch transform")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory [default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated output kinds: csv, json, svg [default: csv,json]
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Sample count of the reference band grid [default: 512]
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Worker threads [default: 1]
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomized checks
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file; flags given on the command line take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Band functions of a symbol: bands.csv, summary.json, bands.svg
    Bands {
        /// Symbol JSON file, inline JSON, or one of monomer, dimer, exponential
        #[arg(long)]
        symbol: Option<String>,
    },
    /// Run a scenario: points.csv, bands.csv, gaps.json, summary.json, overlay.svg
    Reconstruct(ReconstructArgs),
    /// Floquet-Bloch profile and Q of a vector or of a matrix's eigenvectors
    Transform {
        /// Vector file, one complex entry per line or comma-separated
        #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
        vector: Option<PathBuf>,
        /// Matrix file (CSV or JSON); its eigenvectors are transformed
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Unit-cell size
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// 1-based eigenvector indices to keep (all by default)
        #[arg(long, value_delimiter = ',')]
        index: Vec<usize>,
    },
    /// Run the numerical checks and acceptance scenarios
    Verify {
        /// Comma-separated check groups or ids
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Multiplies every tolerance; 0 makes every check fail
        #[arg(long)]
        tol_scale: Option<f64>,
    },
}

#[derive(Args)]
struct ReconstructArgs {
    /// periodic_nn, periodic_symbol, ssh, dislocated, compact_defect or external_matrix
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    /// toeplitz, circulant or capacitance
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long)]
    s1: Option<f64>,
    #[arg(long)]
    s2: Option<f64>,
    /// Dislocated spacing
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    dimers: Option<usize>,
    #[arg(long)]
    dimers_per_side: Option<usize>,
    /// Relative change of the defect resonator
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// 1-based defect resonator
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_tilde: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta2: Option<f64>,
    /// Matrix file for external_matrix
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Unit-cell size for external_matrix
    #[arg(long)]
    k: Option<usize>,
    /// Reference symbol: file, inline JSON or built-in name
    #[arg(long)]
    symbol: Option<String>,
    /// Use the circulant section in periodic_symbol
    #[arg(long)]
    circulant: bool,
}

impl ReconstructArgs {
    fn params(&self) -> Result<Map<String, Value>> {
        let mut map = Map::new();
        let mut put = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                map.insert(key.to_string(), v);
            }
        };
        let f = |x: Option<f64>| x.map(Value::from);
        let u = |x: Option<usize>| x.map(Value::from);
        put("m", u(self.m));
        put("a0", f(self.a0));
        put("a1", f(self.a1));
        put("boundary", self.boundary.clone().map(Value::from));
        put("s1", f(self.s1));
        put("s2", f(self.s2));
        put("d", f(self.d));
        put("dimers", u(self.dimers));
        put("dimers_per_side", u(self.dimers_per_side));
        put("delta", f(self.delta));
        put("index", u(self.index));
        put("alpha", f(self.alpha));
        put("alpha_tilde", f(self.alpha_tilde));
        put("eta", f(self.eta));
        put("beta1", f(self.beta1));
        put("beta2", f(self.beta2));
        put("path", self.matrix.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
        put("k", u(self.k));
        put("circulant", self.circulant.then_some(Value::Bool(true)));
        if let Some(s) = &self.symbol {
            put("symbol", Some(serde_json::to_value(resolve_symbol(s)?)?));
        }
        Ok(map)
    }
}

/// What a successful command reports back to `main`.
enum Outcome {
    Done,
    ChecksFailed,
}

fn common(file: &FileConfig, args: &CommonArgs) -> Result<Common> {
    Common::resolve(file, args.out.clone(), args.format.as_deref(), args.grid, args.jobs, args.seed)
}

fn run(cli: Cli) -> Result<Outcome> {
    let args = cli.common;
    let file = FileConfig::load(args.config.as_deref())?;
    let settings = common(&file, &args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .context("starting worker pool")?;
    pool.install(|| match cli.command {
        Command::Bands { symbol } => {
            let sym = match (symbol, &file.symbol) {
                (Some(s), _) => resolve_symbol(&s)?,
                (None, Some(v)) => symbol_from_value(v)?,
                (None, None) => bail!("bands needs --symbol"),
            };
            commands::bands(&sym, &settings)?;
            Ok(Outcome::Done)
        }
        Command::Reconstruct(r) => {
            let name = r
                .scenario
                .clone()
                .or_else(|| file.scenario.clone())
                .context("reconstruct needs --scenario")?;
            let mut base = file.params.clone();
            if let Some(path) = base.remove("matrix") {
                base.insert("path".into(), path);
            }
            if let Some(v) = &file.symbol {
                base.insert("symbol".into(), serde_json::to_value(symbol_from_value(v)?)?);
            }
            let scenario = scenario_from(&name, merge(base, r.params()?))?;
            commands::reconstruct(&scenario, &settings)?;
            Ok(Outcome::Done)
        }
        Command::Transform { vector, matrix, k, index } => {
            let input = match (vector, matrix) {
                (Some(v), _) => TransformInput::Vector(v),
                (None, Some(m)) => TransformInput::Matrix { path: m, only: index },
                (None, None) => bail!("transform needs --vector or --matrix"),
            };
            commands::transform(&input, k, &settings)?;
            Ok(Outcome::Done)
        }
        Command::Verify { only, tol_scale } => {
            let only = if only.is_empty() { file.only.clone().unwrap_or_default() } else { only };
            let tol_scale = tol_scale.or(file.tol_scale).unwrap_or(1.0);
            if !(tol_scale >= 0.0 && tol_scale.is_finite()) {
                bail!("--tol-scale must be a finite non-negative number, got {tol_scale}");
            }
            let s = tfbt::verify::Settings {
                seed: settings.seed,
                tol_scale,
            };
            // Reports go to disk only when an output directory was asked for.
            let out = args.out.clone().or_else(|| file.out.clone());
            let (results, ok) = commands::verify(&only, &s, out.as_deref(), settings.formats.json)?;
            print!("{}", commands::verify_table(&results));
            Ok(if ok { Outcome::Done } else { Outcome::ChecksFailed })
        }
    })
}

fn main() -> ExitCode {
    // Parse without clap's own exit so usage errors map to code 1, not 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
