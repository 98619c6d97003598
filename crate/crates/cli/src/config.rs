//! Subcommand options and their merge with a TOML file.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dynrmst::basis::{BasisLayout, SplineSpec};
use dynrmst::landmark::regular_grid;
use dynrmst::{CovarianceMode, CovariateSpec, Link, TailPolicy};

#[derive(Debug)]
pub enum CliError {
    Core(dynrmst::Error),
    Config(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) => "Config",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => f.write_str(m),
        }
    }
}

impl From<dynrmst::Error> for CliError {
    fn from(e: dynrmst::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn required<T: Clone>(value: &Option<T>, key: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| {
        CliError::Config(format!(
            "missing option `{key}` (flag --{} or config key `{key}`)",
            key.replace('_', "-")
        ))
    })
}

/// Flat key/value pairs of the TOML file, if any.
pub fn load_file(file: Option<&Path>) -> CliResult<serde_json::Map<String, serde_json::Value>> {
    let Some(path) = file else {
        return Ok(serde_json::Map::new());
    };
    let text = std::fs::read_to_string(path)?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match serde_json::to_value(table)? {
        serde_json::Value::Object(m) => Ok(m),
        _ => unreachable!("a TOML table maps to an object"),
    }
}

/// Overlays the options given on the command line onto the TOML file.
/// Unset options and absent flags leave the file value in place.
pub fn resolve<T: Serialize + DeserializeOwned>(cli: &T, file: Option<&Path>) -> CliResult<T> {
    let mut base = load_file(file)?;
    if let serde_json::Value::Object(over) = serde_json::to_value(cli)? {
        for (k, v) in over {
            if !(v.is_null() || v == serde_json::Value::Bool(false)) {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(serde_json::Value::Object(base)).map_err(|e| {
        CliError::Config(format!("invalid configuration: {e}"))
    })
}

pub fn parse_tail(value: &Option<String>) -> CliResult<TailPolicy> {
    match value.as_deref() {
        None | Some("strict") => Ok(TailPolicy::Strict),
        Some("extend_last") => Ok(TailPolicy::ExtendLast),
        Some(other) => Err(CliError::Config(format!("unknown tail policy `{other}` (strict|extend_last)"))),
    }
}

pub fn parse_link(value: &Option<String>) -> CliResult<Link> {
    Ok(Link::parse(value.as_deref().unwrap_or("identity"))?)
}

pub fn parse_covariance(value: &Option<String>) -> CliResult<CovarianceMode> {
    match value.as_deref() {
        None | Some("clustered") => Ok(CovarianceMode::Clustered),
        Some("naive_rowwise") => Ok(CovarianceMode::NaiveRowwise),
        Some(other) => Err(CliError::Config(format!(
            "unknown covariance mode `{other}` (clustered|naive_rowwise)"
        ))),
    }
}

/// `from:to:step` or a comma-separated list.
pub fn parse_grid(value: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Config(format!("invalid grid `{value}` (from:to:step or a comma list)"));
    if value.contains(':') {
        let parts: Vec<f64> = value
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [from, to, step] = parts[..] else {
            return Err(bad());
        };
        Ok(regular_grid(from, to, step)?)
    } else {
        value
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub fn parse_format(value: &Option<String>) -> CliResult<Format> {
    match value.as_deref() {
        None | Some("json") => Ok(Format::Json),
        Some("csv") => Ok(Format::Csv),
        Some(other) => Err(CliError::Config(format!("unknown format `{other}` (json|csv)"))),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct KmArgs {
    /// Survival CSV (`id,time,status[,group][,covariates]`).
    #[arg(long)]
    pub surv: Option<PathBuf>,
    /// Curve origin; only subjects with time > start are used.
    #[arg(long)]
    pub start: Option<f64>,
    /// json or csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CrmstArgs {
    #[arg(long)]
    pub surv: Option<PathBuf>,
    /// Prediction time(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    /// Window length.
    #[arg(long)]
    pub w: Option<f64>,
    /// strict or extend_last.
    #[arg(long)]
    pub tail: Option<String>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the pseudo-observations to this CSV.
    #[arg(long)]
    pub pseudo_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TestArgs {
    /// Survival CSV with a `group` column holding exactly two labels.
    #[arg(long)]
    pub surv: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    #[arg(long)]
    pub w: Option<f64>,
    /// Two-sided level (default 0.05).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tail: Option<String>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Covariates, landmark grid and coefficient basis of a super model.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelArgs {
    /// Baseline covariates taken from survival CSV columns.
    #[arg(long, value_delimiter = ',')]
    pub fixed: Option<Vec<String>>,
    /// Biomarkers carried forward from the longitudinal CSV.
    #[arg(long, value_delimiter = ',')]
    pub time_dependent: Option<Vec<String>>,
    /// Landmark grid, `from:to:step` or a comma list.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub w: Option<f64>,
    /// Interior spline knots on the time scale.
    #[arg(long, value_delimiter = ',')]
    pub knots: Option<Vec<f64>>,
    /// Spline columns when knots are not given (default 5).
    #[arg(long)]
    pub df: Option<usize>,
    /// Boundary knots (default: the ends of the grid).
    #[arg(long, value_delimiter = ',')]
    pub boundary: Option<Vec<f64>>,
    /// Times are divided by this before the spline is evaluated (default: grid span).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Time-constant coefficients instead of splines.
    #[arg(long)]
    pub constant: bool,
    /// identity or log.
    #[arg(long)]
    pub link: Option<String>,
    #[arg(long)]
    pub tail: Option<String>,
}

impl ModelArgs {
    pub fn covariates(&self) -> CovariateSpec {
        CovariateSpec {
            fixed: self.fixed.clone().unwrap_or_default(),
            time_dependent: self.time_dependent.clone().unwrap_or_default(),
        }
    }

    pub fn grid(&self) -> CliResult<Vec<f64>> {
        parse_grid(&required(&self.grid, "grid")?)
    }

    pub fn layout(&self, grid: &[f64]) -> CliResult<BasisLayout> {
        let names = self.covariates().names();
        if self.constant {
            return Ok(BasisLayout::constant(&names));
        }
        let boundary = match self.boundary.as_deref() {
            None => [grid[0], grid[grid.len() - 1]],
            Some(&[lo, hi]) => [lo, hi],
            Some(_) => return Err(CliError::Config("`boundary` needs exactly two values".into())),
        };
        let scale = self.scale.unwrap_or(grid[grid.len() - 1] - grid[0]);
        let spline = match &self.knots {
            Some(knots) => SplineSpec::new(knots.clone(), boundary, scale)?,
            None => SplineSpec::with_df(self.df.unwrap_or(5), grid, boundary, scale)?,
        };
        Ok(BasisLayout::time_varying(&names, spline))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitArgs {
    #[arg(long)]
    pub surv: Option<PathBuf>,
    /// Longitudinal CSV (`id,obs_time,name,value`).
    #[arg(long)]
    pub long: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// clustered or naive_rowwise.
    #[arg(long)]
    pub covariance: Option<String>,
    /// Model JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the stacked landmark dataset to this CSV.
    #[arg(long)]
    pub super_out: Option<PathBuf>,
    /// Also write each coefficient function over the grid to this CSV.
    #[arg(long)]
    pub effects_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub surv: Option<PathBuf>,
    #[arg(long)]
    pub long: Option<PathBuf>,
    /// Prediction times (default: the model's landmark grid).
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Skip subjects whose observed time is not beyond s.
    #[arg(long)]
    pub at_risk_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateArgs {
    /// Training survival CSV.
    #[arg(long)]
    pub surv: Option<PathBuf>,
    #[arg(long)]
    pub long: Option<PathBuf>,
    /// Validation survival CSV.
    #[arg(long)]
    pub valid_surv: Option<PathBuf>,
    #[arg(long)]
    pub valid_long: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    /// scenario, linear or quadratic.
    #[arg(long)]
    pub design: Option<String>,
    /// Two-arm scenario 1-4.
    #[arg(long)]
    pub scenario: Option<u8>,
    /// Subjects (per arm for scenarios).
    #[arg(long)]
    pub n: Option<usize>,
    /// Target censoring fraction.
    #[arg(long, visible_alias = "cen")]
    #[serde(alias = "cen")]
    pub censoring: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub surv_out: Option<PathBuf>,
    #[arg(long)]
    pub long_out: Option<PathBuf>,
    /// Joint designs: true conditional RMST of each subject at risk on the grid.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub w: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct McArgs {
    /// scenario, coefficients or prediction.
    #[arg(long)]
    pub experiment: Option<String>,
    /// Scenarios (comma list).
    #[arg(long, value_delimiter = ',')]
    pub scenario: Option<Vec<u8>>,
    /// Sample sizes (comma list; per arm for scenarios, training size otherwise).
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Censoring targets (comma list).
    #[arg(long, visible_alias = "cen", value_delimiter = ',')]
    #[serde(alias = "cen")]
    pub censoring: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Population draws for the true scenario difference.
    #[arg(long)]
    pub truth_draws: Option<usize>,
    #[arg(long)]
    pub tail: Option<String>,
    /// linear or quadratic (joint experiments).
    #[arg(long)]
    pub trajectory: Option<String>,
    /// Population size for the true coefficients.
    #[arg(long)]
    pub truth_n: Option<usize>,
    /// Validation size (prediction experiment).
    #[arg(long)]
    pub n_valid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
