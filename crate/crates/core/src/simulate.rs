//! Monte Carlo designs and the rejection-rate harness.
//!
//! Continuous designs (`A*`, `B*`): `X ~ U[0,1]`, `Z = aX + (1-a)eta` with
//! `eta ~ U[0,1]`, index `lambda(X) = X`. Binary designs (`C`, `D*`):
//! `X1 ~ U[0,1] + 0.2`, `X2 ~ U[0,1] - 0.2`, `lambda = 0.5 (X1 + X2)`,
//! `Z = 1{lambda > eta}` with `eta ~ N(0,1)`; `theta` is re-estimated by
//! probit maximum likelihood in every replication.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{calibrate, default_grid};
use crate::error::{invalid, Result};
use crate::index::{IndexModel, IndexSpec};
use crate::normal;
use crate::rng::substream_seed;
use crate::stats::Functional;
use crate::transform::{rosenblatt_transform, Bandwidth, Kernel, Sample, ZKind};
use crate::weights::BetaFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DgpName {
    A1,
    A2,
    B1,
    B2,
    B3,
    B4,
    C,
    D1,
    D2,
}

impl DgpName {
    pub const ALL: [DgpName; 9] = [
        DgpName::A1,
        DgpName::A2,
        DgpName::B1,
        DgpName::B2,
        DgpName::B3,
        DgpName::B4,
        DgpName::C,
        DgpName::D1,
        DgpName::D2,
    ];

    pub fn is_binary(self) -> bool {
        matches!(self, DgpName::C | DgpName::D1 | DgpName::D2)
    }

    pub fn uses_kappa(self) -> bool {
        matches!(self, DgpName::D1 | DgpName::D2)
    }

    /// Whether the design satisfies conditional independence.
    pub fn is_null(self) -> bool {
        matches!(self, DgpName::A1 | DgpName::A2 | DgpName::C)
    }
}

impl fmt::Display for DgpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for DgpName {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpName::ALL
            .into_iter()
            .find(|d| d.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::InvalidInput(format!("unknown design {s:?}")))
    }
}

/// A design and its parameters. `a` is set exactly for continuous designs,
/// `kappa` exactly for `D1`/`D2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: DgpName,
    pub a: Option<f64>,
    pub kappa: Option<f64>,
    pub n: usize,
}

/// `theta_0` of the binary designs (intercept first).
pub const BINARY_THETA: [f64; 3] = [0.0, 1.0, 1.0];
pub const BINARY_INDEX_SCALE: f64 = 0.5;

impl DgpSpec {
    pub fn new(name: DgpName, a: Option<f64>, kappa: Option<f64>, n: usize) -> Result<Self> {
        if n < 2 {
            return invalid("simulated sample size must be at least 2");
        }
        match (name.is_binary(), a) {
            (false, None) => return invalid(format!("design {name} needs the mixing weight a")),
            (true, Some(_)) => return invalid(format!("design {name} does not take a")),
            (false, Some(v)) if !(0.0..=1.0).contains(&v) => {
                return invalid("a must lie in [0, 1]")
            }
            _ => {}
        }
        match (name.uses_kappa(), kappa) {
            (true, None) => return invalid(format!("design {name} needs kappa")),
            (false, Some(_)) => return invalid(format!("design {name} does not take kappa")),
            (true, Some(k)) if !k.is_finite() => return invalid("kappa must be finite"),
            _ => {}
        }
        Ok(Self { name, a, kappa, n })
    }

    pub fn continuous(name: DgpName, a: f64, n: usize) -> Result<Self> {
        Self::new(name, Some(a), None, n)
    }

    pub fn binary(name: DgpName, kappa: Option<f64>, n: usize) -> Result<Self> {
        Self::new(name, None, kappa, n)
    }

    /// How the test obtains the index for this design.
    pub fn index_spec(&self) -> IndexSpec {
        if self.name.is_binary() {
            IndexSpec::probit(IndexModel::LinearScaled {
                scale: BINARY_INDEX_SCALE,
            })
        } else {
            IndexSpec::known(IndexModel::linear(), vec![0.0, 1.0])
        }
    }

    pub fn label(&self) -> String {
        match (self.a, self.kappa) {
            (Some(a), _) => format!("{} a={a}", self.name),
            (_, Some(k)) => format!("{} kappa={k}", self.name),
            _ => self.name.to_string(),
        }
    }
}

fn phi_scaled(v: f64) -> f64 {
    normal::cdf(v / 0.2f64.sqrt())
}

/// Draw one sample of the design. Deterministic in `seed`.
pub fn generate(dgp: &DgpSpec, seed: u64) -> Result<Sample> {
    let n = dgp.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    if let Some(a) = dgp.a {
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            let xi: f64 = rng.random();
            let eta: f64 = rng.random();
            let eps: f64 = rng.sample(StandardNormal);
            let zi = a * xi + (1.0 - a) * eta;
            let yi = match dgp.name {
                DgpName::A1 => phi_scaled(xi - 0.5) + eps,
                DgpName::A2 => (5.0 * xi).sin() + eps,
                DgpName::B1 => phi_scaled(xi - 0.5) + phi_scaled(zi - 0.5) + eps,
                DgpName::B2 => phi_scaled(xi - 0.5) + (5.0 * zi).sin() + eps,
                DgpName::B3 => (5.0 * xi).sin() + phi_scaled(zi - 0.5) + eps,
                DgpName::B4 => phi_scaled(xi - 0.5) * (5.0 * zi).sin() + eps,
                _ => unreachable!("binary design with a"),
            };
            x.push(xi);
            z.push(zi);
            y.push(yi);
        }
        let x = Array2::from_shape_vec((n, 1), x).expect("n x 1");
        return Sample::new(y, z, x, ZKind::Continuous);
    }

    let kappa = dgp.kappa.unwrap_or(0.0);
    let mut x = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let x1 = rng.random::<f64>() + 0.2;
        let x2 = rng.random::<f64>() - 0.2;
        let eta: f64 = rng.sample(StandardNormal);
        let eps: f64 = rng.sample(StandardNormal);
        let lambda =
            BINARY_INDEX_SCALE * (BINARY_THETA[0] + BINARY_THETA[1] * x1 + BINARY_THETA[2] * x2);
        let zi = if lambda > eta { 1.0 } else { 0.0 };
        let s = zi * (1.0 + x1.abs() + x2.abs());
        let yi = match dgp.name {
            DgpName::C => 2.0 * phi_scaled(lambda) + eps,
            DgpName::D1 => 0.5 * lambda + kappa * s + eps,
            DgpName::D2 => 2.0 * phi_scaled(lambda + kappa * s) + eps,
            _ => unreachable!("continuous design without a"),
        };
        x.push(x1);
        x.push(x2);
        z.push(zi);
        y.push(yi);
    }
    let x = Array2::from_shape_vec((n, 2), x).expect("n x 2");
    Sample::new(
        y,
        z,
        x,
        ZKind::Discrete {
            support: vec![0.0, 1.0],
        },
    )
}

/// Bandwidth constants for one cell; both scale `n^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPair {
    /// `Z_hat` or propensity smoothing.
    pub h_z: f64,
    /// `Y_hat` smoothing.
    pub h_y: f64,
}

impl BandwidthPair {
    pub fn equal(c: f64) -> Self {
        Self { h_z: c, h_y: c }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub bandwidths: Vec<BandwidthPair>,
    pub exponent: f64,
    pub betas: Vec<BetaFamily>,
    pub functionals: Vec<Functional>,
    pub levels: Vec<f64>,
    pub grid_resolution: Option<usize>,
    pub kernel: Kernel,
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty()
            || self.betas.is_empty()
            || self.functionals.is_empty()
            || self.levels.is_empty()
        {
            return invalid(
                "simulation settings need at least one bandwidth, family, functional and level",
            );
        }
        for bw in &self.bandwidths {
            Bandwidth::new(bw.h_z, self.exponent)?;
            Bandwidth::new(bw.h_y, self.exponent)?;
        }
        if let Some(a) = self.levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return invalid(format!("level {a} is outside (0, 1)"));
        }
        if self.grid_resolution == Some(0) {
            return invalid("grid resolution must be at least 1");
        }
        Ok(())
    }
}

/// Rejection rates of one `(design, bandwidths, family, functional)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub design: DgpSpec,
    pub bandwidths: BandwidthPair,
    pub beta: BetaFamily,
    pub functional: Functional,
    pub levels: Vec<f64>,
    pub rejections: Vec<usize>,
    /// `rejections / completed` per level
    pub rates: Vec<f64>,
    /// `sqrt(rate (1 - rate) / completed)` per level
    pub mc_se: Vec<f64>,
    pub completed: usize,
    pub failures: usize,
    /// Replications whose transforms needed a degeneracy fallback.
    pub degenerate: usize,
    /// Distinct failure messages, at most a few.
    pub failure_messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub reps: usize,
    pub bootstrap: usize,
    pub master_seed: u64,
    pub settings: SimSettings,
    pub cells: Vec<SimCell>,
}

const MAX_FAILURE_MESSAGES: usize = 5;

enum RepOutcome {
    Done {
        rejects: Vec<bool>,
        degenerate: bool,
    },
    Failed(String),
}

/// One replication of one design: returns an outcome for every
/// `(bandwidths, family, functional)` cell of the design, in report order.
fn replicate(
    dgp: &DgpSpec,
    settings: &SimSettings,
    bootstrap: usize,
    data_seed: u64,
    boot_seed: u64,
) -> Vec<RepOutcome> {
    let per_bw = settings.betas.len() * settings.functionals.len();
    let cells = settings.bandwidths.len() * per_bw;
    let fail_all = |msg: String| {
        (0..cells)
            .map(|_| RepOutcome::Failed(msg.clone()))
            .collect()
    };

    let sample = match generate(dgp, data_seed) {
        Ok(s) => s,
        Err(e) => return fail_all(e.to_string()),
    };
    let (_, index_values) = match dgp.index_spec().resolve(sample.z(), sample.x()) {
        Ok(v) => v,
        Err(e) => return fail_all(e.to_string()),
    };

    let mut out = Vec::with_capacity(cells);
    for bw in &settings.bandwidths {
        let h_z = Bandwidth {
            constant: bw.h_z,
            exponent: settings.exponent,
        };
        let h_y = Bandwidth {
            constant: bw.h_y,
            exponent: settings.exponent,
        };
        let prepared = rosenblatt_transform(&sample, &index_values, settings.kernel, h_y, h_z)
            .and_then(|ts| default_grid(&ts, settings.grid_resolution).map(|g| (ts, g)));
        let (ts, grid) = match prepared {
            Ok(v) => v,
            Err(e) => {
                out.extend((0..per_bw).map(|_| RepOutcome::Failed(e.to_string())));
                continue;
            }
        };
        let degenerate = !ts.warnings.is_empty();
        for &beta in &settings.betas {
            let cal = calibrate(
                &ts,
                beta,
                &grid,
                &settings.functionals,
                bootstrap,
                boot_seed,
            );
            for f in 0..settings.functionals.len() {
                let outcome = cal.as_ref().map_err(|e| e.to_string()).and_then(|cal| {
                    settings
                        .levels
                        .iter()
                        .map(|&a| cal.rejects(f, a).map_err(|e| e.to_string()))
                        .collect::<std::result::Result<Vec<bool>, String>>()
                });
                out.push(match outcome {
                    Ok(rejects) => RepOutcome::Done {
                        rejects,
                        degenerate,
                    },
                    Err(msg) => RepOutcome::Failed(msg),
                });
            }
        }
    }
    out
}

/// Run `reps` replications of every design and tabulate rejection rates.
///
/// Replication `r` of design `d` draws its data from stream
/// `(master_seed, d, r, 0)` and its multipliers from `(master_seed, d, r, 1)`;
/// all bandwidth/family/functional cells of a design share that replication.
/// Per-replication errors are counted in the cell, not propagated.
pub fn rejection_table(
    designs: &[DgpSpec],
    settings: &SimSettings,
    reps: usize,
    bootstrap: usize,
    master_seed: u64,
) -> Result<SimReport> {
    if reps == 0 {
        return invalid("replication count must be at least 1");
    }
    if bootstrap == 0 {
        return invalid("bootstrap size must be at least 1");
    }
    if designs.is_empty() {
        return invalid("no designs requested");
    }
    settings.validate()?;

    let mut cells = Vec::new();
    for (d, dgp) in designs.iter().enumerate() {
        let outcomes: Vec<Vec<RepOutcome>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let data_seed = substream_seed(master_seed, &[d as u64, r as u64, 0]);
                let boot_seed = substream_seed(master_seed, &[d as u64, r as u64, 1]);
                replicate(dgp, settings, bootstrap, data_seed, boot_seed)
            })
            .collect();

        let mut c = 0;
        for bw in &settings.bandwidths {
            for &beta in &settings.betas {
                for &functional in &settings.functionals {
                    let mut cell = SimCell {
                        design: *dgp,
                        bandwidths: *bw,
                        beta,
                        functional,
                        levels: settings.levels.clone(),
                        rejections: vec![0; settings.levels.len()],
                        rates: Vec::new(),
                        mc_se: Vec::new(),
                        completed: 0,
                        failures: 0,
                        degenerate: 0,
                        failure_messages: Vec::new(),
                    };
                    for rep in &outcomes {
                        match &rep[c] {
                            RepOutcome::Done {
                                rejects,
                                degenerate,
                            } => {
                                cell.completed += 1;
                                cell.degenerate += usize::from(*degenerate);
                                for (count, hit) in cell.rejections.iter_mut().zip(rejects) {
                                    *count += usize::from(*hit);
                                }
                            }
                            RepOutcome::Failed(msg) => {
                                cell.failures += 1;
                                if cell.failure_messages.len() < MAX_FAILURE_MESSAGES
                                    && !cell.failure_messages.contains(msg)
                                {
                                    cell.failure_messages.push(msg.clone());
                                }
                            }
                        }
                    }
                    let done = cell.completed.max(1) as f64;
                    cell.rates = cell.rejections.iter().map(|k| *k as f64 / done).collect();
                    cell.mc_se = cell
                        .rates
                        .iter()
                        .map(|p| (p * (1.0 - p) / done).sqrt())
                        .collect();
                    cells.push(cell);
                    c += 1;
                }
            }
        }
    }

    Ok(SimReport {
        reps,
        bootstrap,
        master_seed,
        settings: settings.clone(),
        cells,
    })
}

pub const PRESET_NAMES: [&str; 5] = ["table1", "table2", "table3", "table4", "table5"];
pub const PRESET_CONSTANTS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Designs and settings laid out like the published simulation tables, at
/// sample size `n`, with the KS functional and both weight families.
pub fn preset(name: &str, n: usize) -> Result<(Vec<DgpSpec>, SimSettings)> {
    let equal: Vec<BandwidthPair> = PRESET_CONSTANTS
        .iter()
        .map(|c| BandwidthPair::equal(*c))
        .collect();
    let crossed: Vec<BandwidthPair> = PRESET_CONSTANTS
        .iter()
        .flat_map(|h1| {
            PRESET_CONSTANTS
                .iter()
                .map(move |h2| BandwidthPair { h_z: *h1, h_y: *h2 })
        })
        .collect();
    let all_levels = vec![0.01, 0.05, 0.10];
    let five = vec![0.05];

    let continuous = |names: &[DgpName]| -> Result<Vec<DgpSpec>> {
        let mut out = Vec::new();
        for &d in names {
            for a in [0.2, 0.5] {
                out.push(DgpSpec::continuous(d, a, n)?);
            }
        }
        Ok(out)
    };
    let kappas = |d: DgpName| -> Result<Vec<DgpSpec>> {
        [0.5, 1.0]
            .iter()
            .map(|k| DgpSpec::binary(d, Some(*k), n))
            .collect()
    };

    let (designs, bandwidths, levels) = match name.to_ascii_lowercase().as_str() {
        "table1" => (continuous(&[DgpName::A1, DgpName::A2])?, equal, all_levels),
        "table2" => (
            continuous(&[DgpName::B1, DgpName::B2, DgpName::B3, DgpName::B4])?,
            equal,
            five,
        ),
        "table3" => (
            vec![DgpSpec::binary(DgpName::C, None, n)?],
            crossed,
            all_levels,
        ),
        "table4" => (kappas(DgpName::D1)?, crossed, five),
        "table5" => (kappas(DgpName::D2)?, crossed, five),
        other => {
            return invalid(format!(
                "unknown preset {other:?}; expected one of {PRESET_NAMES:?}"
            ))
        }
    };
    Ok((
        designs,
        SimSettings {
            bandwidths,
            exponent: Bandwidth::DEFAULT_EXPONENT,
            betas: vec![BetaFamily::Exponential, BetaFamily::Indicator],
            functionals: vec![Functional::Ks2],
            levels,
            grid_resolution: None,
            kernel: Kernel::Quartic,
        },
    ))
}
