//! Run configuration, read from a TOML file.
//!
//! ```toml
//! [model]
//! k = 3
//!
//! [model.arrivals]
//! type = "exponential"
//! rate = 1.0
//!
//! [model.threshold]
//! type = "constant"
//! tau = 0.6931471805599453
//!
//! [analysis]
//! points = 200
//! tolerance = 1e-8
//!
//! [simulation]
//! runs = 100000
//! seed = 42
//! ```
//!
//! Every section except `[model]` is optional. Validation errors carry the
//! line of the offending key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use deltashock::{ArrivalLaw, Error as ModelError, InversionConfig, ShockModel, ThresholdLaw};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_POINTS: usize = 200;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_RUNS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_DIRECTORY: &str = "deltashock-out";
pub const DEFAULT_TABLE_POINTS: usize = 4001;
pub const MIN_TABLE_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub compare: CompareSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub k: u32,
    pub arrivals: ArrivalLaw,
    pub threshold: ThresholdLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Defaults to one grid step above zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    /// Defaults to the analytic mean plus six standard deviations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub points: usize,
    /// Absolute error target of each inverted value.
    pub tolerance: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            t_min: None,
            t_max: None,
            points: DEFAULT_POINTS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub runs: u64,
    pub seed: u64,
    /// 0 uses every core.
    pub workers: usize,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            runs: DEFAULT_RUNS,
            seed: DEFAULT_SEED,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: PathBuf::from(DEFAULT_DIRECTORY),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputSpec {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSpec {
    /// Points of the inverted-cdf table the empirical cdf is tested against.
    pub table_points: usize,
    /// Simulate this model instead of `[model]`; the analytic side still
    /// uses `[model]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulated_model: Option<ModelSpec>,
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec {
            table_points: DEFAULT_TABLE_POINTS,
            simulated_model: None,
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<ShockModel, ModelError> {
        ShockModel::new(self.k, self.arrivals, self.threshold)
    }

    fn check(&self, prefix: &str) -> Result<(), Problem> {
        let at = |key: &str| format!("{prefix}.{key}");
        if self.k == 0 {
            return Err(Problem::new(at("k"), "must be ≥ 1"));
        }
        self.arrivals
            .validate()
            .map_err(|e| Problem::from_model(&at("arrivals"), e))?;
        self.threshold
            .validate()
            .map_err(|e| Problem::from_model(&at("threshold"), e))?;
        match self.build() {
            Err(ModelError::UnrealizableModel { .. }) => Err(Problem::new(
                at("threshold"),
                "no gap can be lethal (P(Z ≤ δ) = 0), so the system never fails",
            )),
            Err(e) => Err(Problem::from_model(prefix, e)),
            Ok(_) => Ok(()),
        }
    }
}

/// `MIN:MAX:POINTS`, as given to `--grid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOverride {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl FromStr for GridOverride {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("expected MIN:MAX:POINTS, got {s:?}"));
        };
        let num = |v: &str, what: &str| v.trim().parse::<f64>().map_err(|e| format!("{what} {v:?}: {e}"));
        let grid = GridOverride {
            t_min: num(lo, "MIN")?,
            t_max: num(hi, "MAX")?,
            points: n.trim().parse().map_err(|e| format!("POINTS {n:?}: {e}"))?,
        };
        check_grid(Some(grid.t_min), Some(grid.t_max), grid.points).map_err(|p| p.message)?;
        Ok(grid)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: Option<u64>,
    pub grid: Option<GridOverride>,
}

/// A validation failure at a dotted key path.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub key: String,
    pub message: String,
}

impl Problem {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Problem {
            key: key.into(),
            message: message.into(),
        }
    }

    fn from_model(prefix: &str, e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter { name, reason } => Problem::new(format!("{prefix}.{name}"), reason),
            other => Problem::new(prefix, other.to_string()),
        }
    }
}

/// A configuration error located in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

fn check_grid(t_min: Option<f64>, t_max: Option<f64>, points: usize) -> Result<(), Problem> {
    if points < 2 {
        return Err(Problem::new("analysis.points", format!("must be ≥ 2, got {points}")));
    }
    if let Some(lo) = t_min {
        if !(lo.is_finite() && lo >= 0.0) {
            return Err(Problem::new("analysis.t_min", format!("must be finite and ≥ 0, got {lo}")));
        }
    }
    if let Some(hi) = t_max {
        if !(hi.is_finite() && hi > t_min.unwrap_or(0.0)) {
            return Err(Problem::new(
                "analysis.t_max",
                format!("must be finite and > t_min ({}), got {hi}", t_min.unwrap_or(0.0)),
            ));
        }
    }
    Ok(())
}

impl RunConfig {
    /// A configuration with every optional section at its default.
    pub fn new(model: ModelSpec) -> Self {
        RunConfig {
            model,
            analysis: AnalysisSpec::default(),
            simulation: SimulationSpec::default(),
            output: OutputSpec::default(),
            compare: CompareSpec::default(),
        }
    }

    /// Parses and validates TOML text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|span| line_of_offset(text, span.start)),
            key: None,
            message: e.message().trim().to_string(),
        })?;
        config.validate().map_err(|p| ConfigError {
            line: locate(text, &p.key),
            key: Some(p.key),
            message: p.message,
        })?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    /// Reads `path`, then applies `overrides`.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        let mut config = RunConfig::parse(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        config.apply(overrides)?;
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<(), CliError> {
        if let Some(out) = &overrides.out {
            self.output.directory = out.clone();
        }
        if let Some(seed) = overrides.seed {
            self.simulation.seed = seed;
        }
        if let Some(runs) = overrides.runs {
            self.simulation.runs = runs;
        }
        if let Some(grid) = overrides.grid {
            self.analysis.t_min = Some(grid.t_min);
            self.analysis.t_max = Some(grid.t_max);
            self.analysis.points = grid.points;
        }
        self.validate().map_err(|p| {
            let flag = match p.key.as_str() {
                "simulation.runs" => "--runs",
                "simulation.seed" => "--seed",
                k if k.starts_with("analysis.") => "--grid",
                _ => "configuration",
            };
            CliError::Validation(format!("{flag}: {}: {}", p.key, p.message))
        })
    }

    pub fn validate(&self) -> Result<(), Problem> {
        self.model.check("model")?;
        let a = &self.analysis;
        check_grid(a.t_min, a.t_max, a.points)?;
        InversionConfig::with_target(a.tolerance)
            .validate()
            .map_err(|e| Problem::new("analysis.tolerance", e.to_string()))?;
        if self.simulation.runs == 0 {
            return Err(Problem::new("simulation.runs", "must be ≥ 1"));
        }
        if self.simulation.seed > i64::MAX as u64 {
            return Err(Problem::new("simulation.seed", format!("must be ≤ {}", i64::MAX)));
        }
        if self.output.formats.is_empty() {
            return Err(Problem::new("output.formats", "must name at least one of \"json\", \"csv\""));
        }
        if self.compare.table_points < MIN_TABLE_POINTS {
            return Err(Problem::new(
                "compare.table_points",
                format!("must be ≥ {MIN_TABLE_POINTS}, got {}", self.compare.table_points),
            ));
        }
        if let Some(m) = &self.compare.simulated_model {
            m.check("compare.simulated_model")?;
        }
        Ok(())
    }

    pub fn inversion(&self) -> InversionConfig {
        InversionConfig::with_target(self.analysis.tolerance)
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the key `path` (dotted, e.g. `model.arrivals.rate`). Falls back
/// to the closest enclosing table or key, for inline tables and defaults.
fn locate(text: &str, path: &str) -> Option<usize> {
    let mut section = String::new();
    let mut best: Option<(usize, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let candidate = if let Some(header) = line.strip_prefix('[') {
            section = normalize(header.trim_end_matches(']'));
            section.clone()
        } else if let Some((key, _)) = line.split_once('=') {
            let key = normalize(key);
            if section.is_empty() {
                key
            } else {
                format!("{section}.{key}")
            }
        } else {
            continue;
        };
        if candidate == path {
            return Some(i + 1);
        }
        let enclosing = path.starts_with(&candidate) && path[candidate.len()..].starts_with('.');
        if enclosing && best.is_none_or(|(len, _)| candidate.len() > len) {
            best = Some((candidate.len(), i + 1));
        }
    }
    best.map(|(_, line)| line)
}

fn normalize(key: &str) -> String {
    key.split('.')
        .map(|part| part.trim().trim_matches('"').trim_matches('\''))
        .collect::<Vec<_>>()
        .join(".")
}
