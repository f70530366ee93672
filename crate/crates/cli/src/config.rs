//! Resolved run configurations. These are echoed verbatim into every report
//! and are sufficient to reproduce a run.

use citest_core::index::{IndexModel, IndexSpec};
use citest_core::simulate::{DgpSpec, SimSettings};
use citest_core::TestConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZKindName {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThetaMode {
    Known { theta: Vec<f64> },
    Probit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: String,
    pub y: String,
    pub z: String,
    pub x: Vec<String>,
    pub z_kind: ZKindName,
    pub theta: ThetaMode,
    pub test: TestConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.test.validate()?;
        if self.x.is_empty() {
            return Err(CliError::Config(
                "at least one covariate column (--x) is required".into(),
            ));
        }
        if let ThetaMode::Known { theta } = &self.theta {
            if theta.len() != self.x.len() + 1 {
                return Err(CliError::Config(format!(
                    "--theta needs {} values (intercept + {} covariates), got {}",
                    self.x.len() + 1,
                    self.x.len(),
                    theta.len()
                )));
            }
        }
        if self.theta == ThetaMode::Probit && self.z_kind != ZKindName::Discrete {
            return Err(CliError::Config(
                "--estimate-theta probit needs --z-kind discrete".into(),
            ));
        }
        Ok(())
    }

    pub fn index_spec(&self) -> IndexSpec {
        match &self.theta {
            ThetaMode::Known { theta } => IndexSpec::known(IndexModel::linear(), theta.clone()),
            ThetaMode::Probit => IndexSpec::probit(IndexModel::linear()),
        }
    }
}

/// Intercept 0 and unit slopes: the index is the sum of the covariates.
pub fn default_theta(covariates: usize) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(std::iter::repeat_n(1.0, covariates))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub preset: Option<String>,
    pub designs: Vec<DgpSpec>,
    pub settings: SimSettings,
    pub reps: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.reps == 0 {
            return Err(CliError::Config("--reps must be at least 1".into()));
        }
        if self.bootstrap == 0 {
            return Err(CliError::Config("--bootstrap must be at least 1".into()));
        }
        if self.designs.is_empty() {
            return Err(CliError::Config("no design selected".into()));
        }
        self.settings.validate()?;
        Ok(())
    }
}

/// Parse `"v1,v2,..."` into finite reals.
pub fn parse_theta(text: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Config("--theta is empty".into()));
    }
    text.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::Config(format!("--theta entry {part:?} is not a finite number"))
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn theta_lists() {
        assert_eq!(parse_theta("0, 1,-2.5").unwrap(), vec![0.0, 1.0, -2.5]);
        assert!(parse_theta("").is_err());
        assert!(parse_theta("1,,2").is_err());
        assert!(parse_theta("1,inf").is_err());
        assert_eq!(default_theta(2), vec![0.0, 1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn theta_round_trips(v in proptest::collection::vec(-1e6f64..1e6, 1..8)) {
            let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            prop_assert_eq!(parse_theta(&text).unwrap(), v);
        }
    }
}
