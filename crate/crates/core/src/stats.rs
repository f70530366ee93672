//! Scalar functionals of a process evaluated on a grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::process::ProcessValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `sup |nu|`
    Ks2,
    /// `(int nu^2)^{1/2}`
    Cm2,
    /// `sup nu`, possibly negative
    Ks1,
    /// `(int max(nu, 0)^2)^{1/2}`
    Cm1,
}

impl Functional {
    pub const ALL: [Functional; 4] = [
        Functional::Ks2,
        Functional::Cm2,
        Functional::Ks1,
        Functional::Cm1,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Functional::Ks2 => "ks2",
            Functional::Cm2 => "cm2",
            Functional::Ks1 => "ks1",
            Functional::Cm1 => "cm1",
        }
    }

    /// Evaluate on raw grid values. Cramér–von Mises variants use the
    /// midpoint rule with weight `cell_volume` per grid point.
    pub fn eval(self, values: &[f64], cell_volume: f64) -> Result<f64> {
        if values.is_empty() {
            return invalid("cannot apply a functional to an empty grid");
        }
        Ok(match self {
            Functional::Ks2 => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Functional::Ks1 => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Functional::Cm2 => (cell_volume * values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            Functional::Cm1 => {
                let pos: f64 = values.iter().map(|v| v.max(0.0).powi(2)).sum();
                (cell_volume * pos).sqrt()
            }
        })
    }
}

pub fn apply_functional(pv: &ProcessValues, f: Functional) -> Result<f64> {
    f.eval(&pv.values, pv.grid.cell_volume())
}
