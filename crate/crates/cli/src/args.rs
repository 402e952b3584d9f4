use std::path::PathBuf;

use batchq::verify::Suite;
use batchq::DistSpec;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub fn parse_dist(s: &str) -> Result<DistSpec, String> {
    let spec: DistSpec = serde_json::from_str(s).map_err(|e| format!("not a distribution: {e}"))?;
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// A whole JSON list in one flag value.
pub type DistList = Vec<DistSpec>;

fn parse_dists(s: &str) -> Result<DistList, String> {
    let specs: Vec<DistSpec> = serde_json::from_str(s).map_err(|e| format!("not a list of distributions: {e}"))?;
    for spec in &specs {
        spec.validate().map_err(|e| e.to_string())?;
    }
    Ok(specs)
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: batchq::Error| e.to_string())
}

/// Discrete-time batch queues, tandems and first-passage percolation.
///
/// Distributions are given as JSON, e.g.
/// `--arrival '{"kind":"ber_geom","p":0.25,"alpha":0.5}'`.
#[derive(Debug, Parser)]
#[command(name = "batchq", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Root seed; replica and suite streams are derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for replica-parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with default values; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample from or tabulate a batch distribution.
    Dist {
        #[command(subcommand)]
        action: DistAction,
    },
    /// Simulate one queue from empty. Writes the trace CSV to --out and a
    /// JSON summary to stdout.
    Queue(QueueArgs),
    /// Simulate queues in series. Writes the trace CSV to --out and a JSON
    /// summary to stdout.
    Tandem(TandemArgs),
    /// First-passage percolation.
    Perc {
        #[command(subcommand)]
        action: PercAction,
    },
    /// Evaluate a time constant at one abscissa or along a grid.
    Tc(TcArgs),
    /// Run the seeded property suites and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum DistAction {
    /// Independent draws, one per line.
    Sample(DistArgs),
    /// Probability mass function of a discrete law.
    Pmf(DistArgs),
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long, value_parser = parse_dist)]
    pub dist: Option<DistSpec>,
    /// Number of draws for `sample`.
    #[arg(long)]
    pub count: Option<usize>,
    /// Largest value tabulated by `pmf` (default: where the tail drops below 1e-12).
    #[arg(long)]
    pub max: Option<u64>,
}

/// Ber-Geom parameters; `--p --alpha` set the arrival law and `--q --beta`
/// the service law.
#[derive(Debug, Args)]
pub struct BerGeomArgs {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct QueueArgs {
    #[command(flatten)]
    pub params: BerGeomArgs,
    #[arg(long, value_parser = parse_dist, conflicts_with_all = ["p", "alpha"])]
    pub arrival: Option<DistSpec>,
    #[arg(long, value_parser = parse_dist, conflicts_with_all = ["q", "beta"])]
    pub service: Option<DistSpec>,
    #[arg(long)]
    pub slots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TandemArgs {
    #[command(flatten)]
    pub params: BerGeomArgs,
    #[arg(long, value_parser = parse_dist, conflicts_with_all = ["p", "alpha"])]
    pub arrival: Option<DistSpec>,
    /// JSON list of stage service laws.
    #[arg(long, value_parser = parse_dists, conflicts_with_all = ["q", "beta", "stages"])]
    pub services: Option<DistList>,
    /// Number of identical stages built from `--q --beta`.
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub slots: Option<usize>,
    /// Add the product-form tests to the summary; exit 1 if any fails.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Subcommand)]
pub enum PercAction {
    /// First-passage time across one sampled field.
    Simulate(PercSimulateArgs),
    /// Check the tandem sum against the max-minus-passage-time form on
    /// random finite windows; exit 1 on any mismatch.
    Identity(PercIdentityArgs),
    /// Monte Carlo time-constant estimate F/N at aspect ratio x.
    Estimate(PercEstimateArgs),
}

#[derive(Debug, Args)]
pub struct PercSimulateArgs {
    #[arg(long, value_parser = parse_dist)]
    pub weights: Option<DistSpec>,
    #[arg(long)]
    pub columns: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    /// Leave the path's first and last rows free.
    #[arg(long)]
    pub free: bool,
}

#[derive(Debug, Args)]
pub struct PercIdentityArgs {
    #[arg(long, value_parser = parse_dist)]
    pub arrival: Option<DistSpec>,
    #[arg(long, value_parser = parse_dist)]
    pub service: Option<DistSpec>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub instances: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PercEstimateArgs {
    #[arg(long, value_parser = parse_dist)]
    pub weights: Option<DistSpec>,
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TcArgs {
    /// One of ber, geom, exp, ber_geom, legendre, ber_exp, cont_geom,
    /// cont_exp, cont_poisson.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Single abscissa; the value alone is printed.
    #[arg(long, conflicts_with = "grid")]
    pub x: Option<f64>,
    /// Grid `lo:hi:count` (inclusive ends); a curve CSV is written.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = parse_suite)]
    pub suite: Option<Suite>,
}
