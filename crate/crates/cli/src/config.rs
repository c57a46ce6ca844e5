//! Run configuration: defaults, then a JSON config file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::{Map, Value};

/// Output kinds selectable with `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self {
            csv: true,
            json: true,
            svg: false,
        }
    }
}

impl Formats {
    pub fn parse<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        let mut f = Self {
            csv: false,
            json: false,
            svg: false,
        };
        for item in items {
            match item.as_ref().trim() {
                "csv" => f.csv = true,
                "json" => f.json = true,
                "svg" => f.svg = true,
                "" => {}
                other => bail!("unknown format {other:?}; expected csv, json or svg"),
            }
        }
        if !(f.csv || f.json || f.svg) {
            bail!("--format selects no output");
        }
        Ok(f)
    }
}

/// Contents of a `--config` file. Keys not listed here are scenario parameters.
#[derive(Debug, Default, Deserialize)]
pub struct FileConfig {
    pub scenario: Option<String>,
    pub symbol: Option<Value>,
    pub grid: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Vec<String>>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
    pub only: Option<Vec<String>>,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Settings shared by every subcommand after precedence is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Common {
    pub out: PathBuf,
    pub formats: Formats,
    pub grid: usize,
    pub jobs: usize,
    pub seed: u64,
}

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_OUT: &str = "out";

impl Common {
    pub fn resolve(
        file: &FileConfig,
        out: Option<PathBuf>,
        format: Option<&[String]>,
        grid: Option<usize>,
        jobs: Option<usize>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let formats = match format.or(file.format.as_deref()) {
            Some(items) => Formats::parse(items)?,
            None => Formats::default(),
        };
        let grid = grid.or(file.grid).unwrap_or(DEFAULT_GRID);
        if grid < 16 {
            bail!("--grid must be at least 16, got {grid}");
        }
        let jobs = jobs.or(file.jobs).unwrap_or(1);
        if jobs == 0 {
            bail!("--jobs must be positive");
        }
        Ok(Self {
            out: out.or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            formats,
            grid,
            jobs,
            seed: seed.or(file.seed).unwrap_or(tfbt::verify::Settings::default().seed),
        })
    }
}

/// Overlays `flags` on `base`; both map scenario parameter names to values.
pub fn merge(mut base: Map<String, Value>, flags: Map<String, Value>) -> Map<String, Value> {
    for (k, v) in flags {
        base.insert(k, v);
    }
    base
}
