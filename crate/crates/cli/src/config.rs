//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use genprof::FitConfig;
use serde::{Deserialize, Serialize};

/// Everything a command may need. Fields left unset fall back to the
/// command's defaults; flags always override the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub noise: Option<String>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// True ODE parameters for `simulate`.
    pub params: Option<Vec<f64>>,
    /// True initial state for `simulate`.
    pub initial: Option<Vec<f64>>,
    /// True noise scale for `simulate`.
    pub sigma: Option<f64>,
    /// Observation times for `simulate`.
    pub times: Option<Vec<f64>>,
    pub plot: bool,
    pub fit: FitConfig,
}

impl RunConfig {
    /// Reads a config file. Relative `data` and `out` paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn require_model(&self) -> Result<&str> {
        match &self.model {
            Some(m) => Ok(m),
            None => bail!("no model given (use --model or the config file)"),
        }
    }

    pub fn require_data(&self) -> Result<&Path> {
        match &self.data {
            Some(p) => Ok(p),
            None => bail!("no dataset given (use --data or the config file)"),
        }
    }

    pub fn require_out(&self) -> Result<&Path> {
        match &self.out {
            Some(p) => Ok(p),
            None => bail!("no output path given (use --out or the config file)"),
        }
    }
}

/// Parses `a,b,c` into numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().with_context(|| format!("`{s}` is not a number"))
        })
        .collect()
}

/// Parses either a list `a,b,c` or a range `start:end:step` (end included
/// when it falls on the step).
pub fn parse_times(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [_] => parse_list(text),
        [a, b, h] => {
            let (a, b, h): (f64, f64, f64) = (
                a.trim().parse().context("bad range start")?,
                b.trim().parse().context("bad range end")?,
                h.trim().parse().context("bad range step")?,
            );
            if !(h > 0.0) || !(b > a) || !a.is_finite() || !b.is_finite() {
                bail!("time range needs start < end and a positive step");
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * h).collect())
        }
        _ => bail!("times must be `a,b,c` or `start:end:step`"),
    }
}
