use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use swab_core::config::{Branch, CapabilityPlan, RunConfig};
use swab_core::gap_bridge::GapLevel;
use swab_core::transport::OtMethod;

#[derive(Parser, Debug)]
#[command(name = "swab", version, about = "Rank vision-language models for a task from its text assets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check bundle files and their consistency.
    Validate {
        /// A bundle directory or a directory of bundles.
        path: PathBuf,
    },
    /// Predict a ranking of the model zoo for one target bundle.
    Rank {
        #[arg(long)]
        target: PathBuf,
        /// Open-source bundle directories.
        #[arg(long, num_args = 1.., required = true)]
        sources: Vec<PathBuf>,
        /// Where to write the JSON result.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Leave-one-dataset-out benchmark over a universe directory.
    Bench {
        universe: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a synthetic universe.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// JSON file with generator settings.
        #[arg(long)]
        synth_config: Option<PathBuf>,
        /// Start from the strongly class-dependent gap preset.
        #[arg(long)]
        heterogeneous: bool,
        /// Write CSV matrices instead of SWAB-MAT.
        #[arg(long)]
        csv: bool,
    },
    /// Solve the transport problem between two class-name embedding files.
    Ot {
        source: PathBuf,
        target: PathBuf,
        /// Ship only `--mass-fraction` of the mass.
        #[arg(long)]
        partial: bool,
        /// Write the plan (SWAB-MAT plus JSON sidecar).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OtArg {
    Exact,
    Sinkhorn,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BranchArg {
    Swab,
    #[value(name = "swab-m")]
    SwabM,
    #[value(name = "swab-c")]
    SwabC,
    #[value(name = "avg-rank")]
    AvgRank,
    Inb,
    Modelgpt,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GapLevelArg {
    #[value(name = "class_mean")]
    ClassMean,
    #[value(name = "dataset_mean")]
    DatasetMean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PlanArg {
    Partial,
    Full,
}

/// Flags mirroring [`RunConfig`]; each one overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda_filter: Option<f64>,
    #[arg(long)]
    pub mass_fraction: Option<f64>,
    #[arg(long)]
    pub exponentiate_cost: Option<bool>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Comma-separated seeds or ranges, e.g. `1-10` or `1,4,9`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, value_enum)]
    pub ot_method: Option<OtArg>,
    #[arg(long)]
    pub sinkhorn_epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
    #[arg(long, value_enum)]
    pub gap_level: Option<GapLevelArg>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long, value_enum)]
    pub capability_plan: Option<PlanArg>,
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("seed range {part} is empty");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse()?),
        }
    }
    Ok(out)
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => read_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.lambda_filter {
            c.lambda_filter = v;
        }
        if let Some(v) = self.mass_fraction {
            c.mass_fraction = v;
        }
        if let Some(v) = self.exponentiate_cost {
            c.exponentiate_cost = v;
        }
        if let Some(v) = self.noise_sigma {
            c.noise_sigma = v;
        }
        if let Some(s) = &self.seeds {
            c.seeds = parse_seeds(s).with_context(|| format!("invalid --seeds {s:?}"))?;
        }
        if let Some(v) = self.ot_method {
            c.ot_method = match v {
                OtArg::Exact => OtMethod::Exact,
                OtArg::Sinkhorn => OtMethod::Sinkhorn,
            };
        }
        if let Some(v) = self.sinkhorn_epsilon {
            c.sinkhorn.epsilon = Some(v);
        }
        if let Some(v) = self.branch {
            c.branch = match v {
                BranchArg::Swab => Branch::Swab,
                BranchArg::SwabM => Branch::SwabM,
                BranchArg::SwabC => Branch::SwabC,
                BranchArg::AvgRank => Branch::AvgRank,
                BranchArg::Inb => Branch::Inb,
                BranchArg::Modelgpt => Branch::ModelGpt,
            };
        }
        if let Some(v) = self.gap_level {
            c.gap_level = match v {
                GapLevelArg::ClassMean => GapLevel::ClassMean,
                GapLevelArg::DatasetMean => GapLevel::DatasetMean,
            };
        }
        if let Some(v) = self.ridge {
            c.ridge = v;
        }
        if let Some(v) = self.capability_plan {
            c.capability_plan = match v {
                PlanArg::Partial => CapabilityPlan::Partial,
                PlanArg::Full => CapabilityPlan::Full,
            };
        }
        c.validate()?;
        Ok(c)
    }
}
