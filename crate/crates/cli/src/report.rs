//! The structured output document.

use citest_core::simulate::SimReport;
use citest_core::transform::{Degeneracy, SmoothingTarget};
use citest_core::TestResult;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SimConfig};

pub const TOOL: &str = "citest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "details", rename_all = "snake_case")]
pub enum Run {
    Test {
        config: RunConfig,
        result: TestResult,
    },
    Simulate {
        config: SimConfig,
        report: SimReport,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub run: Run,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn test(config: RunConfig, result: TestResult) -> Self {
        let warnings = result.warnings.iter().map(describe_degeneracy).collect();
        Self::new(Run::Test { config, result }, warnings)
    }

    pub fn simulate(config: SimConfig, report: SimReport) -> Self {
        let mut warnings = Vec::new();
        for cell in &report.cells {
            if cell.failures > 0 {
                warnings.push(format!(
                    "{} h=({}, {}) {} {}: {} of {} replications failed: {}",
                    cell.design.label(),
                    cell.bandwidths.h_z,
                    cell.bandwidths.h_y,
                    cell.beta.short_name(),
                    cell.functional.short_name(),
                    cell.failures,
                    report.reps,
                    cell.failure_messages.join("; ")
                ));
            }
        }
        Self::new(Run::Simulate { config, report }, warnings)
    }

    fn new(run: Run, warnings: Vec<String>) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            run,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn target_name(t: SmoothingTarget) -> &'static str {
    match t {
        SmoothingTarget::Y => "Y",
        SmoothingTarget::Z => "Z",
        SmoothingTarget::Propensity => "propensity",
    }
}

pub fn describe_degeneracy(d: &Degeneracy) -> String {
    match d {
        Degeneracy::EmptyKernelWindow {
            target,
            observations,
        } => format!(
            "empty kernel window while smoothing {} for {} observation(s); uniform weights used",
            target_name(*target),
            observations
        ),
        Degeneracy::PropensityClamped { observations } => {
            format!("propensity estimate clamped for {observations} observation(s)")
        }
    }
}
