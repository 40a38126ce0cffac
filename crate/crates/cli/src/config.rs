//! Run configuration: a TOML file mirroring the command-line flags, with
//! flags taking precedence over file values.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use ippt_core::estimators::PriorShape;
use ippt_core::{IntensityModel, PriorDensity, TestKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable consulted for the output directory when neither a
/// flag nor the config file names one.
pub const OUT_DIR_ENV: &str = "IPPT_OUT_DIR";

/// Evenly spaced `count` values from `start` to `stop` inclusive.
///
/// In TOML it is written as `"start:stop:count"`; an inline table with the
/// same three keys is accepted too.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UGridRepr", into = "String")]
pub struct UGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl UGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 }).collect()
    }
}

impl FromStr for UGrid {
    type Err = String;

    /// `start:stop:count`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("u-grid `{s}` is not of the form start:stop:count");
        if parts.len() != 3 {
            return Err(bad());
        }
        let grid = UGrid {
            start: parts[0].trim().parse().map_err(|_| bad())?,
            stop: parts[1].trim().parse().map_err(|_| bad())?,
            count: parts[2].trim().parse().map_err(|_| bad())?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum UGridRepr {
    Text(String),
    Table { start: f64, stop: f64, count: usize },
}

impl TryFrom<UGridRepr> for UGrid {
    type Error = String;

    fn try_from(repr: UGridRepr) -> Result<Self, String> {
        match repr {
            UGridRepr::Text(s) => s.parse(),
            UGridRepr::Table { start, stop, count } => {
                let grid = UGrid { start, stop, count };
                grid.validate()?;
                Ok(grid)
            }
        }
    }
}

impl fmt::Display for UGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

impl From<UGrid> for String {
    fn from(grid: UGrid) -> String {
        grid.to_string()
    }
}

impl UGrid {
    fn validate(&self) -> Result<(), String> {
        if self.count == 0 {
            return Err("u-grid count must be positive".into());
        }
        if self.count > 1 && !(self.stop > self.start) {
            return Err("u-grid stop must exceed start".into());
        }
        if !(self.start >= 0.0) {
            return Err("u-grid must start at a nonnegative value".into());
        }
        Ok(())
    }
}

/// Prior choice. In TOML either the flag syntax (`"uniform:3:5"`) or a table
/// tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorRepr", into = "String")]
pub enum PriorSpec {
    /// Uniform density; bounds default to the model's `[θ₁, b]`.
    Uniform { lo: Option<f64>, hi: Option<f64> },
    /// Piecewise-linear density from a `theta,density` CSV file.
    Table { path: PathBuf },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PriorRepr {
    Text(String),
    Tagged(TaggedPrior),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum TaggedPrior {
    Uniform {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    Table {
        path: PathBuf,
    },
}

impl TryFrom<PriorRepr> for PriorSpec {
    type Error = String;

    fn try_from(repr: PriorRepr) -> Result<Self, String> {
        match repr {
            PriorRepr::Text(s) => s.parse(),
            PriorRepr::Tagged(TaggedPrior::Uniform { lo, hi }) => Ok(PriorSpec::Uniform { lo, hi }),
            PriorRepr::Tagged(TaggedPrior::Table { path }) => Ok(PriorSpec::Table { path }),
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Uniform { lo: None, hi: None } => f.write_str("uniform"),
            PriorSpec::Uniform { lo, hi } => write!(
                f,
                "uniform:{}:{}",
                lo.map_or(String::new(), |v| v.to_string()),
                hi.map_or(String::new(), |v| v.to_string())
            ),
            PriorSpec::Table { path } => write!(f, "table:{}", path.display()),
        }
    }
}

impl From<PriorSpec> for String {
    fn from(prior: PriorSpec) -> String {
        prior.to_string()
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Uniform { lo: None, hi: None }
    }
}

impl FromStr for PriorSpec {
    type Err = String;

    /// `uniform`, `uniform:lo:hi` or `table:PATH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "uniform" {
            return Ok(PriorSpec::default());
        }
        if let Some(path) = s.strip_prefix("table:") {
            return Ok(PriorSpec::Table { path: path.into() });
        }
        if let Some(rest) = s.strip_prefix("uniform:") {
            if let Some((lo, hi)) = rest.split_once(':') {
                // An empty bound falls back to the model's support.
                let bound = |v: &str, which: &str| -> Result<Option<f64>, String> {
                    if v.is_empty() {
                        return Ok(None);
                    }
                    v.parse().map(Some).map_err(|_| format!("bad {which} bound in prior `{s}`"))
                };
                return Ok(PriorSpec::Uniform { lo: bound(lo, "lower")?, hi: bound(hi, "upper")? });
            }
        }
        Err(format!("prior `{s}` is not one of uniform, uniform:LO:HI, table:PATH"))
    }
}

impl PriorSpec {
    pub fn build(&self, model: &IntensityModel) -> Result<PriorDensity, CliError> {
        let shape = match self {
            PriorSpec::Uniform { lo, hi } => {
                PriorShape::Uniform { lo: lo.unwrap_or(model.theta1()), hi: hi.unwrap_or(model.b()) }
            }
            PriorSpec::Table { path } => PriorShape::table_from_path(path)?,
        };
        Ok(PriorDensity::new(shape, model)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in model name, or the name given to a table model.
    pub model: String,
    /// CSV intensity table (`theta,t,lambda`) replacing the built-in model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    /// Paths per experiment.
    pub n: usize,
    /// Monte Carlo replicates per power point.
    #[serde(rename = "N")]
    pub replicates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<UGrid>,
    /// Local alternative used by `simulate`.
    pub u: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tests: Option<Vec<TestKind>>,
    pub prior: PriorSpec,
    /// Normal draws for Bayes threshold calibration.
    #[serde(rename = "M")]
    pub draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "paper".into(),
            model_table: None,
            theta1: None,
            n: 100,
            replicates: 10_000,
            epsilon: None,
            u_grid: None,
            u: 0.0,
            seed: 0,
            tests: None,
            prior: PriorSpec::default(),
            draws: ippt_core::hypothesis::DEFAULT_DRAWS,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn build_model(&self) -> Result<IntensityModel, CliError> {
        match &self.model_table {
            Some(path) => {
                if self.theta1.is_some() {
                    return Err(CliError::Config("theta1 cannot override a table model".into()));
                }
                Ok(ippt_core::model::IntensityTable::from_path(path)?.into_model(self.model.clone())?)
            }
            None => Ok(ippt_core::model::builtin(&self.model, self.theta1)?),
        }
    }

    pub fn epsilons(&self, default: &[f64]) -> Vec<f64> {
        self.epsilon.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn kinds(&self, default: &[TestKind]) -> Vec<TestKind> {
        self.tests.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Output directory: flag or config file, then `IPPT_OUT_DIR`, then the
    /// working directory.
    pub fn output_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Flags shared by every subcommand; each one overrides the matching config
/// file entry.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Built-in model: paper, linear, constant-plus-slope
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Intensity table CSV with header theta,t,lambda
    #[arg(long, global = true, value_name = "FILE")]
    pub model_table: Option<PathBuf>,
    /// Override the null value θ₁ of a built-in model
    #[arg(long, global = true)]
    pub theta1: Option<f64>,
    /// Paths per experiment
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Replicates per power point
    #[arg(long = "N", global = true, value_name = "N")]
    pub replicates: Option<usize>,
    /// Comma-separated test sizes
    #[arg(long, global = true, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    /// Local alternatives as start:stop:count
    #[arg(long, global = true, value_name = "START:STOP:COUNT")]
    pub u_grid: Option<UGrid>,
    /// Local alternative for `simulate`
    #[arg(long, global = true)]
    pub u: Option<f64>,
    /// Master seed; every replicate derives its own stream from it
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated tests: sft, glrt, wald, bt1, bt2
    #[arg(long, global = true, value_delimiter = ',')]
    pub tests: Option<Vec<TestKind>>,
    /// uniform, uniform:LO:HI or table:PATH
    #[arg(long, global = true)]
    pub prior: Option<PriorSpec>,
    /// Normal draws for Bayes thresholds
    #[arg(long = "M", global = true, value_name = "M")]
    pub draws: Option<usize>,
    /// Output directory (default: $IPPT_OUT_DIR, then the working directory)
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            )*};
        }
        set!(model, n, replicates, u, seed, prior, draws);
        if self.model_table.is_some() {
            cfg.model_table = self.model_table.clone();
        }
        if self.theta1.is_some() {
            cfg.theta1 = self.theta1;
        }
        if self.epsilon.is_some() {
            cfg.epsilon = self.epsilon.clone();
        }
        if self.u_grid.is_some() {
            cfg.u_grid = self.u_grid;
        }
        if self.tests.is_some() {
            cfg.tests = self.tests.clone();
        }
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        if let Some(grid) = &cfg.u_grid {
            grid.validate().map_err(CliError::Config)?;
        }
        Ok(cfg)
    }
}
