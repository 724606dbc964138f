use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::dimreduce::{PcaBasis, ReductionConfig, ReductionMethod};
use crate::distance::DEFAULT_MC_SAMPLES;
use crate::error::{Error, Result};

pub const DEFAULT_VOL_WINDOW: usize = 60;

/// A per-market panel the pipeline can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Open,
    High,
    Low,
    Close,
    Volume,
    CloseVol,
    VolumeVol,
}

impl Variable {
    pub const ALL: [Variable; 7] = [
        Variable::Open,
        Variable::High,
        Variable::Low,
        Variable::Close,
        Variable::Volume,
        Variable::CloseVol,
        Variable::VolumeVol,
    ];
    /// Columns present in the input files, in file order.
    pub const RAW: [Variable; 5] = [Variable::Open, Variable::High, Variable::Low, Variable::Close, Variable::Volume];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Open => "open",
            Variable::High => "high",
            Variable::Low => "low",
            Variable::Close => "close",
            Variable::Volume => "volume",
            Variable::CloseVol => "close_vol",
            Variable::VolumeVol => "volume_vol",
        }
    }

    /// The raw column a variable is computed from.
    pub fn source(self) -> Variable {
        match self {
            Variable::CloseVol => Variable::Close,
            Variable::VolumeVol => Variable::Volume,
            raw => raw,
        }
    }

    pub fn is_volatility(self) -> bool {
        self != self.source()
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variable '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Distribution fitted to each reduced panel before comparing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    /// Multivariate normal, closed form.
    #[default]
    Mvn,
    /// Multivariate normal truncated to the observed per-row range.
    Truncated,
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mvn" => Ok(ModelFamily::Mvn),
            "truncated" => Ok(ModelFamily::Truncated),
            other => Err(Error::Config(format!("unknown model family '{other}'"))),
        }
    }
}

impl FromStr for PcaBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "covariance" | "cov" => Ok(PcaBasis::Covariance),
            "correlation" | "corr" => Ok(PcaBasis::Correlation),
            other => Err(Error::Config(format!("unknown PCA basis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_paths: Vec<PathBuf>,
    pub variables: Vec<Variable>,
    pub reduction: ReductionConfig,
    pub vol_window: usize,
    pub sub_universe_size: Option<usize>,
    pub sample_seed: u64,
    pub mc_samples: usize,
    pub output_dir: PathBuf,
    pub output_format: OutputFormat,
    pub family: ModelFamily,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_paths: Vec::new(),
            variables: Variable::ALL.to_vec(),
            reduction: ReductionConfig::default(),
            vol_window: DEFAULT_VOL_WINDOW,
            sub_universe_size: None,
            sample_seed: 0,
            mc_samples: DEFAULT_MC_SAMPLES,
            output_dir: PathBuf::from("distkit-out"),
            output_format: OutputFormat::Csv,
            family: ModelFamily::Mvn,
        }
    }
}

impl RunConfig {
    /// Reads a `key = value` file. Relative paths are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut config = Self::default();
        config.apply_text(&text, base)?;
        Ok(config)
    }

    /// Applies `key = value` lines on top of the current values. Blank lines
    /// and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim(), base)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(e))))?;
        }
        Ok(())
    }

    /// Sets one option by name. Also used for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "inputs" | "input_paths" => {
                self.input_paths = split_list(value).map(resolve).collect();
            }
            "variables" => {
                self.variables = split_list(value).map(str::parse).collect::<Result<_>>()?;
            }
            "reduction" => self.reduction.method = value.parse::<ReductionMethod>()?,
            "sig_digits" | "pca_sig_digits" => self.reduction.pca_sig_digits = parse_num(key, value)?,
            "pca_basis" => self.reduction.pca_basis = value.parse()?,
            "epsilon" | "jl_epsilon" => self.reduction.jl_epsilon = parse_num(key, value)?,
            "jl_seed" => self.reduction.jl_seed = parse_num(key, value)?,
            "iterations" | "jl_iterations" => self.reduction.jl_iterations = parse_num(key, value)?,
            "vol_window" => self.vol_window = parse_num(key, value)?,
            "sub_universe" | "sub_universe_size" => {
                self.sub_universe_size = match value {
                    "" | "none" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "seed" | "sample_seed" => self.sample_seed = parse_num(key, value)?,
            "mc_samples" => self.mc_samples = parse_num(key, value)?,
            "out" | "output_dir" => self.output_dir = resolve(value),
            "format" | "output_format" => self.output_format = value.parse()?,
            "family" => self.family = value.parse()?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_paths.len() < 2 {
            return Err(Error::Config(format!("need at least 2 input panels, got {}", self.input_paths.len())));
        }
        if self.variables.is_empty() {
            return Err(Error::Config("variables must be nonempty".into()));
        }
        if self.vol_window < 3 {
            return Err(Error::Config(format!("vol_window must be at least 3, got {}", self.vol_window)));
        }
        if self.sub_universe_size == Some(0) {
            return Err(Error::Config("sub_universe must be positive".into()));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be positive".into()));
        }
        self.reduction.validate()
    }

    /// Number of matrices computed per variable: random projection draws a
    /// fresh matrix per iteration, PCA is deterministic and runs once.
    pub fn iterations(&self) -> usize {
        match self.reduction.method {
            ReductionMethod::Pca => 1,
            ReductionMethod::Jl => self.reduction.jl_iterations,
        }
    }

    /// Settings that determine the numbers in a report. Output location and
    /// thread count are left out so reports compare equal across both.
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            inputs: self
                .input_paths
                .iter()
                .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
                .collect(),
            variables: self.variables.iter().map(|v| v.name()).collect(),
            reduction: self.reduction.method.name(),
            pca_sig_digits: self.reduction.pca_sig_digits,
            pca_basis: match self.reduction.pca_basis {
                PcaBasis::Covariance => "covariance",
                PcaBasis::Correlation => "correlation",
            },
            jl_epsilon: self.reduction.jl_epsilon,
            jl_iterations: self.reduction.jl_iterations,
            vol_window: self.vol_window,
            sub_universe_size: self.sub_universe_size,
            sample_seed: self.sample_seed,
            mc_samples: self.mc_samples,
            family: self.family,
            output_format: self.output_format,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub inputs: Vec<String>,
    pub variables: Vec<&'static str>,
    pub reduction: &'static str,
    pub pca_sig_digits: u32,
    pub pca_basis: &'static str,
    pub jl_epsilon: f64,
    pub jl_iterations: usize,
    pub vol_window: usize,
    pub sub_universe_size: Option<usize>,
    pub sample_seed: u64,
    pub mc_samples: usize,
    pub family: ModelFamily,
    pub output_format: OutputFormat,
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}
