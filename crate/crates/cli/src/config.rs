use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use batchq::verify::Suite;
use batchq::DistSpec;
use serde::Deserialize;

use crate::args::Format;

/// Values read from `--config`. Any field may be omitted; command-line
/// flags win over the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub dist: Option<DistSpec>,
    pub count: Option<usize>,
    pub max: Option<u64>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub beta: Option<f64>,
    pub arrival: Option<DistSpec>,
    pub service: Option<DistSpec>,
    pub services: Option<Vec<DistSpec>>,
    pub stages: Option<usize>,
    pub slots: Option<usize>,
    pub check: Option<bool>,
    pub weights: Option<DistSpec>,
    pub columns: Option<usize>,
    pub rows: Option<usize>,
    pub free: Option<bool>,
    pub window: Option<usize>,
    pub instances: Option<usize>,
    pub x: Option<f64>,
    pub n: Option<usize>,
    pub replicas: Option<usize>,
    pub variant: Option<String>,
    pub grid: Option<String>,
    pub suite: Option<Suite>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
