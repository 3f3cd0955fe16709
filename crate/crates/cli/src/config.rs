//! JSON run configurations with `--key value` overrides.
//!
//! Keys may be dotted (`--phase.n 32`) and dashes map to underscores. Values
//! are parsed as JSON when possible and kept as strings otherwise. Overrides
//! always win over the config file.

use std::path::{Path, PathBuf};

use liouville_core::ensemble::{HistogramMode, Perturbation};
use liouville_core::{Method, Scheme};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: Value,
    pub threads: Option<usize>,
}

impl Invocation {
    pub fn parse(raw: &[String]) -> CliResult<Self> {
        let mut pairs = Vec::new();
        let mut iter = raw.iter();
        while let Some(arg) = iter.next() {
            let Some(key) = arg.strip_prefix("--") else {
                return Err(CliError::config(
                    "bad_args",
                    format!("unexpected argument `{arg}`"),
                ));
            };
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = iter.next().ok_or_else(|| {
                        CliError::config("bad_args", format!("--{key} needs a value"))
                    })?;
                    (key.to_string(), v.clone())
                }
            };
            pairs.push((key.replace('-', "_"), value));
        }

        let mut config = Value::Object(Map::new());
        if let Some((_, path)) = pairs.iter().rev().find(|(k, _)| k == "config") {
            config = load_json(Path::new(path))?;
        }
        let mut threads = std::env::var("LIOU_THREADS")
            .ok()
            .map(|v| parse_threads(&v))
            .transpose()?;
        for (key, value) in pairs {
            match key.as_str() {
                "config" => {}
                "threads" => threads = Some(parse_threads(&value)?),
                _ => set_path(&mut config, &key, parse_value(&value))?,
            }
        }
        Ok(Self { config, threads })
    }

    pub fn typed<T: DeserializeOwned>(&self) -> CliResult<T> {
        serde_json::from_value(self.config.clone())
            .map_err(|e| CliError::config("bad_config", e.to_string()))
    }
}

fn parse_threads(v: &str) -> CliResult<usize> {
    match v.trim().parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(CliError::config(
            "bad_threads",
            format!("`{v}` is not a positive thread count"),
        )),
    }
}

pub fn load_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("bad_config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config("bad_config", format!("{}: {e}", path.display())))
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::config(
                "bad_args",
                format!("cannot set `{key}`: parent is not an object"),
            )
        })?;
        if parts.peek().is_none() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub n: usize,
    pub u_min: f64,
    pub u_max: f64,
}

fn default_true() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

fn default_one() -> usize {
    1
}

fn default_cfl() -> f64 {
    0.9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub base_profile: Vec<f64>,
    #[serde(default = "default_true")]
    pub periodic: bool,
    #[serde(default)]
    pub scheme: Scheme,
    pub nu: f64,
    pub perturbation: Perturbation,
    pub count: usize,
    pub seed: u64,
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "default_one")]
    pub save_every: usize,
    pub phase: PhaseConfig,
    /// Site indices histogrammed; all sites when absent.
    #[serde(default)]
    pub axes: Option<Vec<usize>>,
    /// Snapshot slice; the final slice when absent.
    #[serde(default)]
    pub histogram: Option<HistogramMode>,
    #[serde(default)]
    pub export_csv: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialConfig {
    /// Product of normals integrated over cells.
    Gaussian { mean: Vec<f64>, sigma: Vec<f64> },
    /// A DensityField binary file.
    File { path: PathBuf },
}

/// Time-stepping settings shared by the transport commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarchConfig {
    pub phase: PhaseConfig,
    pub initial: InitialConfig,
    /// Fixed step; derived from `cfl` when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub steps: Option<usize>,
    /// Final time; `dt` is shrunk so that `steps·dt = t_end` exactly.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SystemConfig {
    /// One phase axis per site.
    Burgers {
        sites: usize,
        #[serde(default = "default_true")]
        periodic: bool,
        #[serde(default)]
        scheme: Scheme,
        nu: f64,
    },
    Rotation {
        #[serde(default = "default_omega")]
        omega: f64,
    },
    Zero {
        axes: usize,
    },
}

fn default_omega() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiouvilleConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub diffusion: f64,
    #[serde(flatten)]
    pub march: MarchConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClosureConfig {
    TripletPeriodic,
    /// Exterior neighbours from the mean of a 1-axis DensityField file.
    MeanField {
        p1: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalConfig {
    #[serde(default)]
    pub scheme: Scheme,
    pub nu: f64,
    #[serde(default = "default_closure")]
    pub closure: ClosureConfig,
    #[serde(flatten)]
    pub march: MarchConfig,
}

fn default_closure() -> ClosureConfig {
    ClosureConfig::TripletPeriodic
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative bound on each axis mean.
    #[serde(default = "default_rel")]
    pub mean_rel: f64,
    /// Absolute floor for the axis-mean bound.
    #[serde(default)]
    pub mean_abs: f64,
    #[serde(default = "default_rel")]
    pub kinetic_rel: f64,
    /// Bound on the L1 distance of each 1-point marginal; unchecked when absent.
    #[serde(default)]
    pub l1: Option<f64>,
}

fn default_rel() -> f64 {
    0.05
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mean_rel: default_rel(),
            mean_abs: 0.0,
            kinetic_rel: default_rel(),
            l1: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub solver: PathBuf,
    pub oracle: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausalConfig {
    #[serde(default)]
    pub scheme: Scheme,
    pub nu: f64,
    pub time_slices: usize,
    /// Write the full system in coordinate format to this file name.
    #[serde(default)]
    pub coo: Option<PathBuf>,
    #[serde(flatten)]
    pub march: MarchConfig,
}
