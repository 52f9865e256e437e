//! JSON run configuration. Every flag has a field of the same name with
//! dashes replaced by underscores; flags win over the file.

use std::path::{Path, PathBuf};

use cfreq_core::constructions::GrowthSequence;
use cfreq_core::optimizer::SolverOptions;
use cfreq_core::verify::VerifyConfig;
use clap::ValueEnum;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Seed points with prescribed digit frequencies.
    Seed,
    /// Forced-digit words over a seed word.
    Fz,
    /// Local-dimension profiles of forced-digit words.
    Profile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
    pub timing: Option<bool>,

    pub input: Option<String>,
    pub depth: Option<usize>,
    pub ranks: Option<Vec<usize>>,

    pub freq: Option<PathBuf>,
    pub n_list: Option<Vec<u64>>,
    pub k_list: Option<Vec<usize>>,
    pub solver: Option<SolverOptions>,

    pub suite: Option<String>,
    pub trials: Option<usize>,
    pub verify: Option<VerifyConfig>,

    pub mode: Option<SampleMode>,
    pub n: Option<usize>,
    pub count: Option<u64>,
    pub growth: Option<GrowthSequence>,
    pub b: Option<f64>,
    pub ln_b: Option<f64>,
    pub z: Option<String>,
    pub depths: Option<Vec<u64>>,
    pub summary: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Takes the flag when given, else the config value.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// Parses `linear`, `power:SCALE:EXPONENT` or `log:SCALE`.
pub fn parse_growth(s: &str) -> Result<GrowthSequence, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| format!("invalid number {t:?} in growth rule"))
    };
    match parts.as_slice() {
        ["linear"] => Ok(GrowthSequence::Linear),
        ["power", scale, exponent] => Ok(GrowthSequence::Power {
            scale: num(scale)?,
            exponent: num(exponent)?,
        }),
        ["log", scale] => Ok(GrowthSequence::Log { scale: num(scale)? }),
        _ => Err(format!(
            "unknown growth rule {s:?}; use linear, power:SCALE:EXP or log:SCALE"
        )),
    }
}

/// Parses `4-100` or `10`; comma lists are split by clap.
pub fn parse_depths(s: &str) -> Result<Vec<u64>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|_| format!("invalid depth {t:?}"))
    };
    match s.split_once('-') {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(format!("empty depth range {s:?}"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![num(s)?]),
    }
}
