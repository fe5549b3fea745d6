use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap_bridge::GapLevel;
use crate::ranker::DEFAULT_RIDGE;
use crate::transport::{OtMethod, SinkhornParams};

/// Which prediction a run reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Borda ensemble of the gap-corrected learning branch and the
    /// transferred class rankings.
    #[default]
    #[serde(rename = "swab")]
    Swab,
    /// Learning branch on gap-corrected texts.
    #[serde(rename = "swab-m")]
    SwabM,
    /// Transferred class rankings.
    #[serde(rename = "swab-c")]
    SwabC,
    /// Unweighted average of class rankings over every source class.
    #[serde(rename = "avg-rank")]
    AvgRank,
    /// ImageNet accuracy.
    #[serde(rename = "inb")]
    Inb,
    /// Learning branch on uncorrected texts.
    #[serde(rename = "modelgpt")]
    ModelGpt,
}

impl Branch {
    pub const ALL: [Branch; 6] =
        [Branch::Swab, Branch::SwabM, Branch::SwabC, Branch::AvgRank, Branch::Inb, Branch::ModelGpt];

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Swab => "swab",
            Branch::SwabM => "swab-m",
            Branch::SwabC => "swab-c",
            Branch::AvgRank => "avg-rank",
            Branch::Inb => "inb",
            Branch::ModelGpt => "modelgpt",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown branch {s:?}")))
    }
}

/// Plan used to carry class rankings to the target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapabilityPlan {
    #[default]
    Partial,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Weight of the learning branch in the Borda ensemble.
    pub alpha: f64,
    /// Source classes need a cosine above this to some target class.
    pub lambda_filter: f64,
    pub mass_fraction: f64,
    pub exponentiate_cost: bool,
    /// Std of the Gaussian noise added to target captions.
    pub noise_sigma: f64,
    pub seeds: Vec<u64>,
    pub ot_method: OtMethod,
    pub sinkhorn: SinkhornParams,
    pub branch: Branch,
    pub gap_level: GapLevel,
    pub ridge: f64,
    pub capability_plan: CapabilityPlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            lambda_filter: 0.5,
            mass_fraction: 0.9,
            exponentiate_cost: true,
            noise_sigma: 0.1,
            seeds: (1..=10).collect(),
            ot_method: OtMethod::Exact,
            sinkhorn: SinkhornParams::default(),
            branch: Branch::Swab,
            gap_level: GapLevel::ClassMean,
            ridge: DEFAULT_RIDGE,
            capability_plan: CapabilityPlan::Partial,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("lambda_filter", self.lambda_filter)?;
        if !(self.mass_fraction > 0.0 && self.mass_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!("mass_fraction = {} outside (0, 1]", self.mass_fraction)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_sigma = {} must be >= 0", self.noise_sigma)));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidConfig(format!("ridge = {} must be >= 0", self.ridge)));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if let Some(e) = self.sinkhorn.epsilon {
            if !(e > 0.0) {
                return Err(Error::InvalidConfig(format!("sinkhorn epsilon {e} must be positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"branch\":\"swab\""));
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), c);
        let partial: RunConfig = serde_json::from_str(r#"{"alpha": 1.0, "branch": "swab-m"}"#).unwrap();
        assert_eq!(partial.alpha, 1.0);
        assert_eq!(partial.branch, Branch::SwabM);
        assert_eq!(partial.seeds, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_out_of_range() {
        for bad in [
            RunConfig { alpha: 1.5, ..Default::default() },
            RunConfig { mass_fraction: 0.0, ..Default::default() },
            RunConfig { seeds: vec![], ..Default::default() },
            RunConfig { noise_sigma: -0.1, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"alfa": 1}"#).is_err());
    }

    #[test]
    fn branch_names() {
        for b in Branch::ALL {
            assert_eq!(b.as_str().parse::<Branch>().unwrap(), b);
        }
    }
}
