//! Wild-bootstrap calibration and the end-to-end test.
//!
//! The transforms are computed once; every bootstrap draw only reweights the
//! per-observation summands with two-point multipliers. Draw `b` reads its
//! multipliers from its own ChaCha stream, so results do not depend on the
//! order in which draws are evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::index::IndexSpec;
use crate::process::{
    EvalGrid, ProcessValues, SummandTable, DEFAULT_CONTINUOUS_RESOLUTION,
    DEFAULT_DISCRETE_RESOLUTION,
};
use crate::stats::Functional;
use crate::transform::{
    rosenblatt_transform, Bandwidth, Degeneracy, Kernel, Sample, TransformedSample, ZTransform,
};
use crate::weights::BetaFamily;

pub const DEFAULT_SEED: u64 = 0x005e_edc1_7e57;
pub const DEFAULT_BOOTSTRAP: usize = 2000;

const SQRT5: f64 = 2.236_067_977_499_79;
/// Lower point of the two-point multiplier law, `-(sqrt 5 - 1) / 2`.
pub const MULTIPLIER_LOW: f64 = -(SQRT5 - 1.0) / 2.0;
/// Upper point, `(sqrt 5 + 1) / 2`.
pub const MULTIPLIER_HIGH: f64 = (SQRT5 + 1.0) / 2.0;
/// Mass on the lower point, `(sqrt 5 + 1) / (2 sqrt 5)`.
pub const MULTIPLIER_LOW_MASS: f64 = (SQRT5 + 1.0) / (2.0 * SQRT5);

/// `B x n` matrix of two-point multipliers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierDraws {
    pub n: usize,
    pub b: usize,
    pub seed: u64,
    pub omega: Vec<f64>,
}

impl MultiplierDraws {
    pub fn row(&self, b: usize) -> &[f64] {
        &self.omega[b * self.n..(b + 1) * self.n]
    }
}

/// Multipliers for bootstrap draw `b`. Identical to row `b` of
/// [`draw_multipliers`] with the same seed.
pub fn multiplier_row(n: usize, seed: u64, b: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < MULTIPLIER_LOW_MASS {
                MULTIPLIER_LOW
            } else {
                MULTIPLIER_HIGH
            }
        })
        .collect()
}

pub fn draw_multipliers(n: usize, b: usize, seed: u64) -> Result<MultiplierDraws> {
    if n == 0 || b == 0 {
        return invalid("multiplier draws need n >= 1 and B >= 1");
    }
    let omega = (0..b)
        .flat_map(|row| multiplier_row(n, seed, row))
        .collect();
    Ok(MultiplierDraws { n, b, seed, omega })
}

/// Bootstrap process `n^{-1/2} sum_i omega_i * summand_i(r)` for either kind of `Z`.
pub fn bootstrap_process(
    ts: &TransformedSample,
    family: BetaFamily,
    grid: &EvalGrid,
    omega_row: &[f64],
) -> Result<ProcessValues> {
    if omega_row.len() != ts.len() {
        return invalid(format!(
            "multiplier row has length {}, sample has {}",
            omega_row.len(),
            ts.len()
        ));
    }
    let table = SummandTable::build(ts, family, grid)?;
    Ok(ProcessValues {
        values: table.aggregate(Some(omega_row))?,
        grid: grid.clone(),
        n: ts.len(),
    })
}

/// `inf { t : #{b : T*_b <= t} / B >= 1 - alpha }`, i.e. the order statistic
/// of rank `ceil(B (1 - alpha))`.
pub fn critical_value(bootstrap_stats: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if bootstrap_stats.is_empty() {
        return invalid("need at least one bootstrap statistic");
    }
    let mut sorted = bootstrap_stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[critical_rank(sorted.len(), alpha) - 1])
}

/// One-based rank used by [`critical_value`].
fn critical_rank(b: usize, alpha: f64) -> usize {
    let target = b as f64 * (1.0 - alpha);
    // guard against 0.95 * 100 landing a hair above 95
    let rank = (target - 1e-9 * b as f64).ceil() as usize;
    rank.clamp(1, b)
}

/// Add-one bootstrap p-value `(1 + #{b : T*_b >= T}) / (B + 1)`.
pub fn p_value(statistic: f64, bootstrap_stats: &[f64]) -> Result<f64> {
    if bootstrap_stats.is_empty() {
        return invalid("need at least one bootstrap statistic");
    }
    let exceed = bootstrap_stats.iter().filter(|t| **t >= statistic).count();
    Ok((1 + exceed) as f64 / (bootstrap_stats.len() + 1) as f64)
}

/// Observed statistics and their bootstrap replicates, one entry per functional.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub functionals: Vec<Functional>,
    pub statistics: Vec<f64>,
    /// `bootstrap[f][b]`
    pub bootstrap: Vec<Vec<f64>>,
}

impl Calibration {
    pub fn critical_value(&self, f: usize, alpha: f64) -> Result<f64> {
        critical_value(&self.bootstrap[f], alpha)
    }

    pub fn rejects(&self, f: usize, alpha: f64) -> Result<bool> {
        Ok(self.statistics[f] > self.critical_value(f, alpha)?)
    }

    pub fn p_value(&self, f: usize) -> Result<f64> {
        p_value(self.statistics[f], &self.bootstrap[f])
    }
}

/// Evaluate the observed statistics and `b` bootstrap replicates for a
/// transformed sample. Bootstrap draws run in parallel on the current rayon
/// pool; the result does not depend on the number of threads.
pub fn calibrate(
    ts: &TransformedSample,
    family: BetaFamily,
    grid: &EvalGrid,
    functionals: &[Functional],
    b: usize,
    seed: u64,
) -> Result<Calibration> {
    if b == 0 {
        return invalid("bootstrap size must be at least 1");
    }
    if functionals.is_empty() {
        return invalid("no functional requested");
    }
    let table = SummandTable::build(ts, family, grid)?;
    let vol = grid.cell_volume();
    let eval_all = |values: &[f64]| -> Result<Vec<f64>> {
        functionals.iter().map(|f| f.eval(values, vol)).collect()
    };

    let statistics = eval_all(&table.aggregate(None)?)?;
    let n = ts.len();
    let per_draw: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map_init(
            || vec![0.0; table.points()],
            |buf, row| {
                let omega = multiplier_row(n, seed, row);
                table.aggregate_into(Some(&omega), buf)?;
                eval_all(buf)
            },
        )
        .collect::<Result<_>>()?;

    let bootstrap = (0..functionals.len())
        .map(|f| per_draw.iter().map(|d| d[f]).collect())
        .collect();
    Ok(Calibration {
        functionals: functionals.to_vec(),
        statistics,
        bootstrap,
    })
}

/// Default grid for a transformed sample: midpoints on each axis, with the
/// support as the `z` axis for discrete `Z`.
pub fn default_grid(ts: &TransformedSample, resolution: Option<usize>) -> Result<EvalGrid> {
    match &ts.z {
        ZTransform::Continuous { .. } => {
            EvalGrid::continuous(resolution.unwrap_or(DEFAULT_CONTINUOUS_RESOLUTION))
        }
        ZTransform::Discrete { support, .. } => {
            EvalGrid::discrete(resolution.unwrap_or(DEFAULT_DISCRETE_RESOLUTION), support)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub beta: BetaFamily,
    pub functional: Functional,
    pub kernel: Kernel,
    /// Bandwidth for `Y_hat`.
    pub h_y: Bandwidth,
    /// Bandwidth for `Z_hat` (continuous `Z`) or the propensities (discrete `Z`).
    pub h_z: Bandwidth,
    /// Points per grid axis; `None` picks 10 (continuous) or 20 (discrete).
    pub grid_resolution: Option<usize>,
    pub bootstrap: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        let bw = Bandwidth {
            constant: 1.0,
            exponent: Bandwidth::DEFAULT_EXPONENT,
        };
        Self {
            beta: BetaFamily::Exponential,
            functional: Functional::Ks2,
            kernel: Kernel::Quartic,
            h_y: bw,
            h_z: bw,
            grid_resolution: None,
            bootstrap: DEFAULT_BOOTSTRAP,
            alpha: 0.05,
            seed: DEFAULT_SEED,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bootstrap == 0 {
            return invalid("bootstrap size must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.grid_resolution == Some(0) {
            return invalid("grid resolution must be at least 1");
        }
        Bandwidth::new(self.h_y.constant, self.h_y.exponent)?;
        Bandwidth::new(self.h_z.constant, self.h_z.exponent)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub bootstrap: usize,
    pub n: usize,
    /// Index parameter actually used (given or estimated).
    pub theta: Vec<f64>,
    pub h_y: f64,
    pub h_z: f64,
    pub grid_points: usize,
    pub config: TestConfig,
    pub warnings: Vec<Degeneracy>,
}

/// Full pipeline: index values, Rosenblatt transforms, process, statistic,
/// bootstrap critical value and p-value.
pub fn run_test(sample: &Sample, index: &IndexSpec, config: &TestConfig) -> Result<TestResult> {
    config.validate()?;
    let (theta, index_values) = index.resolve(sample.z(), sample.x())?;
    let ts = rosenblatt_transform(sample, &index_values, config.kernel, config.h_y, config.h_z)?;
    let grid = default_grid(&ts, config.grid_resolution)?;
    let cal = calibrate(
        &ts,
        config.beta,
        &grid,
        &[config.functional],
        config.bootstrap,
        config.seed,
    )?;
    let critical_value = cal.critical_value(0, config.alpha)?;
    let statistic = cal.statistics[0];
    let n = sample.len();
    Ok(TestResult {
        statistic,
        critical_value,
        p_value: cal.p_value(0)?,
        reject: statistic > critical_value,
        alpha: config.alpha,
        bootstrap: config.bootstrap,
        n,
        theta,
        h_y: config.h_y.resolve(n),
        h_z: config.h_z.resolve(n),
        grid_points: grid.len(),
        config: config.clone(),
        warnings: ts.warnings,
    })
}
