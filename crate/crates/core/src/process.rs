//! Feasible empirical processes evaluated on a rectangular grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::transform::{TransformedSample, ZTransform};
use crate::weights::{beta_eval, gamma_perp, BetaFamily, GridPoint};

/// Default points per axis with continuous `Z` (10^3 points in total).
pub const DEFAULT_CONTINUOUS_RESOLUTION: usize = 10;
/// Default points per axis of `(u, y)` with discrete `Z` (20^2 per support point).
pub const DEFAULT_DISCRETE_RESOLUTION: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "points", rename_all = "snake_case")]
pub enum ZAxis {
    /// Points in `[0, 1]` at which `gamma_perp_z` is evaluated.
    Continuous(Vec<f64>),
    /// The support of a discrete `Z`.
    Discrete(Vec<f64>),
}

impl ZAxis {
    pub fn points(&self) -> &[f64] {
        match self {
            ZAxis::Continuous(p) | ZAxis::Discrete(p) => p,
        }
    }
}

/// Product grid over `(u, y, z)`. Values are stored with `z` varying fastest,
/// then `y`, then `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    u: Vec<f64>,
    y: Vec<f64>,
    z: ZAxis,
}

fn midpoints(g: usize) -> Vec<f64> {
    (1..=g)
        .map(|k| (2 * k - 1) as f64 / (2 * g) as f64)
        .collect()
}

fn check_axis(name: &str, points: &[f64], unit: bool) -> Result<()> {
    if points.is_empty() {
        return invalid(format!("grid axis {name} is empty"));
    }
    if points.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid(format!("grid axis {name} must be strictly increasing"));
    }
    if unit && points.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return invalid(format!("grid axis {name} must lie in [0, 1]"));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return invalid(format!("grid axis {name} has a non-finite point"));
    }
    Ok(())
}

impl EvalGrid {
    pub fn new(u: Vec<f64>, y: Vec<f64>, z: ZAxis) -> Result<Self> {
        check_axis("u", &u, true)?;
        check_axis("y", &y, true)?;
        match &z {
            ZAxis::Continuous(p) => check_axis("z", p, true)?,
            ZAxis::Discrete(p) => check_axis("z", p, false)?,
        }
        Ok(Self { u, y, z })
    }

    /// `g` midpoints `(2k - 1) / (2g)` on each of the three axes.
    pub fn continuous(g: usize) -> Result<Self> {
        if g == 0 {
            return invalid("grid resolution must be at least 1");
        }
        Self::new(midpoints(g), midpoints(g), ZAxis::Continuous(midpoints(g)))
    }

    /// `g` midpoints on the `u` and `y` axes, `z` running over `support`.
    pub fn discrete(g: usize, support: &[f64]) -> Result<Self> {
        if g == 0 {
            return invalid("grid resolution must be at least 1");
        }
        Self::new(
            midpoints(g),
            midpoints(g),
            ZAxis::Discrete(support.to_vec()),
        )
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &ZAxis {
        &self.z
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.z, ZAxis::Discrete(_))
    }

    pub fn len(&self) -> usize {
        self.u.len() * self.y.len() * self.z.points().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one grid point: the `(u, y, z)` cell volume for
    /// continuous `Z`, the `(u, y)` cell area for discrete `Z` (the support is
    /// summed, not integrated).
    pub fn cell_volume(&self) -> f64 {
        let uy = (self.u.len() * self.y.len()) as f64;
        match &self.z {
            ZAxis::Continuous(p) => 1.0 / (uy * p.len() as f64),
            ZAxis::Discrete(_) => 1.0 / uy,
        }
    }

    pub fn flat_index(&self, iu: usize, iy: usize, iz: usize) -> usize {
        (iu * self.y.len() + iy) * self.z.points().len() + iz
    }

    pub fn point(&self, flat: usize) -> GridPoint {
        let gz = self.z.points().len();
        let gy = self.y.len();
        let iz = flat % gz;
        let iy = (flat / gz) % gy;
        let iu = flat / (gz * gy);
        GridPoint::new(self.u[iu], self.y[iy], self.z.points()[iz])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessValues {
    pub values: Vec<f64>,
    pub grid: EvalGrid,
    pub n: usize,
}

impl ProcessValues {
    pub fn at(&self, iu: usize, iy: usize, iz: usize) -> f64 {
        self.values[self.grid.flat_index(iu, iy, iz)]
    }
}

/// Per-observation summands of the process at every grid point, so that the
/// feasible process and each bootstrap draw are weighted column sums of the
/// same table.
#[derive(Debug, Clone)]
pub struct SummandTable {
    n: usize,
    points: usize,
    // row-major n x points
    data: Vec<f64>,
}

impl SummandTable {
    /// Build the table for the transformed sample. Uses the continuous
    /// summand `beta_u(U) gamma_perp_z(Z) gamma_perp_y(Y)` or the
    /// standardized discrete summand depending on the sample.
    pub fn build(ts: &TransformedSample, family: BetaFamily, grid: &EvalGrid) -> Result<Self> {
        match (&ts.z, grid.z()) {
            (ZTransform::Continuous { z_hat }, ZAxis::Continuous(zs)) => Ok(Self::continuous(
                &ts.u_hat, &ts.y_hat, z_hat, family, grid, zs,
            )),
            (
                ZTransform::Discrete {
                    support,
                    z_index,
                    p_hat,
                },
                ZAxis::Discrete(zs),
            ) => {
                if zs != support {
                    return invalid("grid support differs from the sample support");
                }
                Self::discrete(
                    &ts.u_hat,
                    &ts.y_hat,
                    z_index,
                    p_hat,
                    support.len(),
                    family,
                    grid,
                )
            }
            _ => invalid("grid kind does not match the kind of Z in the transformed sample"),
        }
    }

    fn continuous(
        u_hat: &[f64],
        y_hat: &[f64],
        z_hat: &[f64],
        family: BetaFamily,
        grid: &EvalGrid,
        zs: &[f64],
    ) -> Self {
        let n = u_hat.len();
        let beta = factor_table(grid.u(), u_hat, |u, obs| beta_eval(family, obs, u));
        let gz = factor_table(zs, z_hat, gamma_perp);
        let gy = factor_table(grid.y(), y_hat, gamma_perp);
        let (nu, ny, nz) = (grid.u().len(), grid.y().len(), zs.len());
        let points = nu * ny * nz;
        let mut data = vec![0.0; n * points];
        for i in 0..n {
            let row = &mut data[i * points..(i + 1) * points];
            let mut p = 0;
            for iu in 0..nu {
                let b = beta[iu * n + i];
                for iy in 0..ny {
                    let y = gy[iy * n + i];
                    for iz in 0..nz {
                        row[p] = b * gz[iz * n + i] * y;
                        p += 1;
                    }
                }
            }
        }
        Self { n, points, data }
    }

    fn discrete(
        u_hat: &[f64],
        y_hat: &[f64],
        z_index: &[usize],
        p_hat: &[f64],
        k: usize,
        family: BetaFamily,
        grid: &EvalGrid,
    ) -> Result<Self> {
        let n = u_hat.len();
        if let Some(bad) = p_hat.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Invariant(format!("propensity {bad} outside (0, 1)")));
        }
        let beta = factor_table(grid.u(), u_hat, |u, obs| beta_eval(family, obs, u));
        let gy = factor_table(grid.y(), y_hat, gamma_perp);
        let (nu, ny) = (grid.u().len(), grid.y().len());
        let points = nu * ny * k;
        let mut data = vec![0.0; n * points];
        for i in 0..n {
            // standardized residual 1{Z_i = z} - p over sqrt(p - p^2), per support point
            let resid: Vec<(f64, f64)> = (0..k)
                .map(|c| {
                    let p = p_hat[i * k + c];
                    let hit = if z_index[i] == c { 1.0 } else { 0.0 };
                    (hit - p, (p - p * p).sqrt())
                })
                .collect();
            let row = &mut data[i * points..(i + 1) * points];
            let mut at = 0;
            for iu in 0..nu {
                let b = beta[iu * n + i];
                for iy in 0..ny {
                    let y = gy[iy * n + i];
                    for &(r, sd) in &resid {
                        row[at] = b * r * y / sd;
                        at += 1;
                    }
                }
            }
        }
        Ok(Self { n, points, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// `n^{-1/2} sum_i w_i * summand_i(r)` for every grid point `r`, with
    /// `w_i = 1` when `weights` is `None`. Observations are added in
    /// ascending order.
    pub fn aggregate_into(&self, weights: Option<&[f64]>, out: &mut [f64]) -> Result<()> {
        if out.len() != self.points {
            return invalid("output buffer has the wrong length");
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        match weights {
            None => {
                for row in self.data.chunks_exact(self.points) {
                    out.iter_mut().zip(row).for_each(|(o, s)| *o += s);
                }
            }
            Some(w) => {
                if w.len() != self.n {
                    return invalid(format!(
                        "multiplier row has length {}, expected {}",
                        w.len(),
                        self.n
                    ));
                }
                for (row, &wi) in self.data.chunks_exact(self.points).zip(w) {
                    out.iter_mut().zip(row).for_each(|(o, s)| *o += wi * s);
                }
            }
        }
        let root_n = (self.n as f64).sqrt();
        out.iter_mut().for_each(|v| *v /= root_n);
        Ok(())
    }

    pub fn aggregate(&self, weights: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.points];
        self.aggregate_into(weights, &mut out)?;
        Ok(out)
    }
}

/// `table[a * n + i] = f(axis[a], obs[i])`
fn factor_table(axis: &[f64], obs: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(axis.len() * obs.len());
    for &a in axis {
        out.extend(obs.iter().map(|&o| f(a, o)));
    }
    out
}

/// `nu_hat(u, y, z) = n^{-1/2} sum_i beta_u(U_i) gamma_perp_z(Z_i) gamma_perp_y(Y_i)`.
pub fn feasible_process(
    ts: &TransformedSample,
    family: BetaFamily,
    grid: &EvalGrid,
) -> Result<ProcessValues> {
    if !matches!(ts.z, ZTransform::Continuous { .. }) {
        return invalid("feasible_process needs a continuous-Z transformed sample");
    }
    let table = SummandTable::build(ts, family, grid)?;
    Ok(ProcessValues {
        values: table.aggregate(None)?,
        grid: grid.clone(),
        n: ts.len(),
    })
}

/// Standardized process for discrete `Z`:
/// `n^{-1/2} sum_i beta_u(U_i) (1{Z_i = z} - p_i) gamma_perp_y(Y_i) / sqrt(p_i - p_i^2)`
/// with `p_i = p_hat_{z, i}(U_i)`.
pub fn discrete_process(
    ts: &TransformedSample,
    family: BetaFamily,
    grid: &EvalGrid,
) -> Result<ProcessValues> {
    if !matches!(ts.z, ZTransform::Discrete { .. }) {
        return invalid("discrete_process needs a discrete-Z transformed sample");
    }
    let table = SummandTable::build(ts, family, grid)?;
    Ok(ProcessValues {
        values: table.aggregate(None)?,
        grid: grid.clone(),
        n: ts.len(),
    })
}
