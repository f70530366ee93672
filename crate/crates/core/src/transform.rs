//! Empirical Rosenblatt transforms.
//!
//! Every observation is mapped to leave-one-out estimates of
//! `U = F(index)`, `F(Y | U)` and either `F(Z | U)` (continuous `Z`) or the
//! propensities `P(Z = z | U)` (discrete `Z`). Indicators and ranks are the
//! only way the raw data enter, so the output is invariant under strictly
//! increasing transforms of `y`, `z` and the index values.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Propensities are clamped into `[PROPENSITY_CLAMP, 1 - PROPENSITY_CLAMP]`.
pub const PROPENSITY_CLAMP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZKind {
    Continuous,
    /// `support` is sorted and free of duplicates.
    Discrete {
        support: Vec<f64>,
    },
}

/// Observed rows `(y_i, z_i, x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    y: Vec<f64>,
    z: Vec<f64>,
    x: Array2<f64>,
    z_kind: ZKind,
}

impl Sample {
    pub fn new(y: Vec<f64>, z: Vec<f64>, x: Array2<f64>, z_kind: ZKind) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return invalid(format!("need at least 2 observations, got {n}"));
        }
        if z.len() != n || x.nrows() != n {
            return invalid(format!(
                "column lengths disagree: y={n}, z={}, x rows={}",
                z.len(),
                x.nrows()
            ));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return invalid(format!("y[{i}] is not finite"));
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return invalid(format!("z[{i}] is not finite"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("x contains a non-finite entry");
        }
        if let ZKind::Discrete { support } = &z_kind {
            if support.is_empty() {
                return invalid("discrete support is empty");
            }
            if support.windows(2).any(|w| !(w[0] < w[1])) {
                return invalid("discrete support must be strictly increasing");
            }
            if let Some(i) = z.iter().position(|v| support_index(support, *v).is_none()) {
                return invalid(format!("z[{i}] = {} is not in the discrete support", z[i]));
            }
        }
        Ok(Self { y, z, x, z_kind })
    }

    /// Discrete sample whose support is the set of distinct observed `z` values.
    pub fn discrete(y: Vec<f64>, z: Vec<f64>, x: Array2<f64>) -> Result<Self> {
        let mut support: Vec<f64> = z.iter().copied().filter(|v| v.is_finite()).collect();
        support.sort_by(f64::total_cmp);
        support.dedup();
        Self::new(y, z, x, ZKind::Discrete { support })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn z_kind(&self) -> &ZKind {
        &self.z_kind
    }
}

pub(crate) fn support_index(support: &[f64], value: f64) -> Option<usize> {
    support.iter().position(|s| *s == value)
}

/// Smoothing kernels supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `(15/16)(1 - u^2)^2` on `|u| <= 1`.
    #[default]
    Quartic,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Quartic => quartic_kernel(u),
        }
    }

    pub fn support_radius(self) -> f64 {
        1.0
    }

    /// `K(x / h) / h`.
    pub fn scaled(self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }
}

/// Quartic (biweight) kernel.
pub fn quartic_kernel(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        let t = 1.0 - u * u;
        0.9375 * t * t
    } else {
        0.0
    }
}

/// Bandwidth rule `h = constant * n^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub constant: f64,
    pub exponent: f64,
}

impl Bandwidth {
    pub const DEFAULT_EXPONENT: f64 = 0.2;

    pub fn new(constant: f64, exponent: f64) -> Result<Self> {
        if !(constant.is_finite() && constant > 0.0) {
            return invalid(format!(
                "bandwidth constant must be positive, got {constant}"
            ));
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return invalid(format!(
                "bandwidth exponent must be positive, got {exponent}"
            ));
        }
        Ok(Self { constant, exponent })
    }

    pub fn with_default_exponent(constant: f64) -> Result<Self> {
        Self::new(constant, Self::DEFAULT_EXPONENT)
    }

    pub fn resolve(&self, n: usize) -> f64 {
        self.constant * (n as f64).powf(-self.exponent)
    }
}

/// Which smoother fell back to uniform weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingTarget {
    Y,
    Z,
    Propensity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Degeneracy {
    /// No other observation had positive kernel weight; uniform weights were used.
    EmptyKernelWindow {
        target: SmoothingTarget,
        observations: usize,
    },
    /// Raw propensity estimates fell outside the clamp interval.
    PropensityClamped { observations: usize },
}

/// A kernel-weighted estimate and whether it needed the uniform-weight fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEstimate {
    pub value: f64,
    pub fallback: bool,
}

/// Leave-one-out empirical CDF of `values` evaluated at `values[i]`:
/// `#{j != i : values[j] <= values[i]} / (n - 1)`.
pub fn ecdf_leave_one_out(values: &[f64], i: usize) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return invalid(format!("leave-one-out ECDF needs n >= 2, got {n}"));
    }
    if i >= n {
        return invalid(format!("index {i} out of range for {n} values"));
    }
    let v = values[i];
    let count = values
        .iter()
        .enumerate()
        .filter(|&(j, w)| j != i && *w <= v)
        .count();
    Ok(count as f64 / (n - 1) as f64)
}

/// [`ecdf_leave_one_out`] for every index at once, in `O(n log n)`.
pub fn leave_one_out_ecdf(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return invalid(format!("leave-one-out ECDF needs n >= 2, got {n}"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return invalid("NaN in ECDF input");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let denom = (n - 1) as f64;
    Ok(values
        .iter()
        .map(|v| {
            // includes the observation itself
            let at_or_below = sorted.partition_point(|w| w <= v);
            (at_or_below - 1) as f64 / denom
        })
        .collect())
}

fn check_smoothing_args(
    responses: &[f64],
    u_hat: &[f64],
    h: f64,
    leave_out: Option<usize>,
) -> Result<()> {
    if responses.len() != u_hat.len() {
        return invalid(format!(
            "response and u_hat lengths disagree: {} vs {}",
            responses.len(),
            u_hat.len()
        ));
    }
    if !(h.is_finite() && h > 0.0) {
        return invalid(format!("bandwidth must be positive, got {h}"));
    }
    let pool = match leave_out {
        Some(i) if i < responses.len() => responses.len() - 1,
        Some(i) => return invalid(format!("leave-out index {i} out of range")),
        None => responses.len(),
    };
    if pool == 0 {
        return invalid("no observations left to smooth over");
    }
    Ok(())
}

/// Kernel-weighted share of the pool `j != leave_out` for which `hit(j)` holds.
fn weighted_share(
    n: usize,
    at: f64,
    u_hat: &[f64],
    kernel: Kernel,
    h: f64,
    leave_out: Option<usize>,
    hit: impl Fn(usize) -> bool,
) -> KernelEstimate {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in (0..n).filter(|&j| Some(j) != leave_out) {
        let w = kernel.scaled(u_hat[j] - at, h);
        den += w;
        if hit(j) {
            num += w;
        }
    }
    if den > 0.0 {
        return KernelEstimate {
            value: num / den,
            fallback: false,
        };
    }
    let pool = (0..n).filter(|&j| Some(j) != leave_out);
    let size = pool.clone().count() as f64;
    let hits = pool.filter(|&j| hit(j)).count() as f64;
    KernelEstimate {
        value: hits / size,
        fallback: true,
    }
}

/// Leave-one-out kernel estimate of `P(Y <= y | U = u)`:
/// `sum_{j != i} 1{Y_j <= y} K_h(u_j - u) / sum_{j != i} K_h(u_j - u)`.
pub fn kernel_conditional_cdf(
    y: f64,
    u: f64,
    responses: &[f64],
    u_hat: &[f64],
    kernel: Kernel,
    h: f64,
    leave_out: Option<usize>,
) -> Result<KernelEstimate> {
    check_smoothing_args(responses, u_hat, h, leave_out)?;
    Ok(weighted_share(
        responses.len(),
        u,
        u_hat,
        kernel,
        h,
        leave_out,
        |j| responses[j] <= y,
    ))
}

/// Leave-one-out kernel estimate of `P(Z = z | U = u)`, clamped into
/// `[PROPENSITY_CLAMP, 1 - PROPENSITY_CLAMP]`. Both numerator and denominator
/// exclude `leave_out`.
#[allow(clippy::too_many_arguments)]
pub fn kernel_propensity(
    z: f64,
    u: f64,
    z_codes: &[f64],
    u_hat: &[f64],
    support: &[f64],
    kernel: Kernel,
    h: f64,
    leave_out: Option<usize>,
) -> Result<KernelEstimate> {
    if support_index(support, z).is_none() {
        return invalid(format!("{z} is not in the discrete support"));
    }
    check_smoothing_args(z_codes, u_hat, h, leave_out)?;
    let raw = weighted_share(z_codes.len(), u, u_hat, kernel, h, leave_out, |j| {
        z_codes[j] == z
    });
    Ok(KernelEstimate {
        value: clamp_propensity(raw.value),
        fallback: raw.fallback,
    })
}

fn clamp_propensity(p: f64) -> f64 {
    p.clamp(PROPENSITY_CLAMP, 1.0 - PROPENSITY_CLAMP)
}

/// The part of a transformed sample that depends on the kind of `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZTransform {
    Continuous {
        z_hat: Vec<f64>,
    },
    Discrete {
        support: Vec<f64>,
        /// Position of each `Z_i` in `support`.
        z_index: Vec<usize>,
        /// Row-major `n x support.len()`; entry `(i, k)` is `p_hat_{z_k, i}(U_i)`.
        p_hat: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedSample {
    pub u_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub z: ZTransform,
    pub warnings: Vec<Degeneracy>,
}

fn check_unit(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(i) => invalid(format!("{name}[{i}] = {} is outside [0, 1]", v[i])),
        None => Ok(()),
    }
}

impl TransformedSample {
    /// Assemble a continuous-case sample from precomputed transforms.
    pub fn continuous(u_hat: Vec<f64>, y_hat: Vec<f64>, z_hat: Vec<f64>) -> Result<Self> {
        let n = u_hat.len();
        if n == 0 || y_hat.len() != n || z_hat.len() != n {
            return invalid("transformed columns must be nonempty and of equal length");
        }
        check_unit("u_hat", &u_hat)?;
        check_unit("y_hat", &y_hat)?;
        check_unit("z_hat", &z_hat)?;
        Ok(Self {
            u_hat,
            y_hat,
            z: ZTransform::Continuous { z_hat },
            warnings: Vec::new(),
        })
    }

    /// Assemble a discrete-case sample from precomputed transforms. `p_hat`
    /// is row-major `n x support.len()` and must lie strictly inside `(0, 1)`.
    pub fn discrete(
        u_hat: Vec<f64>,
        y_hat: Vec<f64>,
        support: Vec<f64>,
        z_index: Vec<usize>,
        p_hat: Vec<f64>,
    ) -> Result<Self> {
        let n = u_hat.len();
        let k = support.len();
        if n == 0 || y_hat.len() != n || z_index.len() != n || p_hat.len() != n * k || k == 0 {
            return invalid("discrete transformed columns have inconsistent sizes");
        }
        check_unit("u_hat", &u_hat)?;
        check_unit("y_hat", &y_hat)?;
        if z_index.iter().any(|&c| c >= k) {
            return invalid("z index outside the support");
        }
        if p_hat.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return invalid("propensities must lie strictly inside (0, 1)");
        }
        Ok(Self {
            u_hat,
            y_hat,
            z: ZTransform::Discrete {
                support,
                z_index,
                p_hat,
            },
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.u_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_hat.is_empty()
    }
}

/// Compute `(U_hat, Y_hat, Z_hat)` or `(U_hat, Y_hat, p_hat)` for a sample.
///
/// `h_z` is the bandwidth for `Z_hat` in the continuous case and for the
/// propensities in the discrete case.
pub fn rosenblatt_transform(
    sample: &Sample,
    index_values: &[f64],
    kernel: Kernel,
    h_y: Bandwidth,
    h_z: Bandwidth,
) -> Result<TransformedSample> {
    let n = sample.len();
    if index_values.len() != n {
        return invalid(format!(
            "index values have length {}, sample has {n} rows",
            index_values.len()
        ));
    }
    if index_values.iter().any(|v| !v.is_finite()) {
        return invalid("index values must be finite");
    }
    let hy = h_y.resolve(n);
    let hz = h_z.resolve(n);
    let u_hat = leave_one_out_ecdf(index_values)?;

    let mut warnings = Vec::new();
    let mut smooth = |target: SmoothingTarget, responses: &[f64], h: f64| -> Result<Vec<f64>> {
        let mut fallbacks = 0;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let est = kernel_conditional_cdf(
                responses[i],
                u_hat[i],
                responses,
                &u_hat,
                kernel,
                h,
                Some(i),
            )?;
            fallbacks += usize::from(est.fallback);
            out.push(est.value);
        }
        if fallbacks > 0 {
            warnings.push(Degeneracy::EmptyKernelWindow {
                target,
                observations: fallbacks,
            });
        }
        Ok(out)
    };

    let y_hat = smooth(SmoothingTarget::Y, sample.y(), hy)?;
    let z = match sample.z_kind() {
        ZKind::Continuous => ZTransform::Continuous {
            z_hat: smooth(SmoothingTarget::Z, sample.z(), hz)?,
        },
        ZKind::Discrete { support } => {
            let k = support.len();
            let z_codes = sample.z();
            let z_index: Vec<usize> = z_codes
                .iter()
                .map(|v| support_index(support, *v).expect("validated by Sample::new"))
                .collect();
            let mut p_hat = Vec::with_capacity(n * k);
            let mut fallbacks = 0;
            let mut clamped = 0;
            for i in 0..n {
                let mut row_clamped = false;
                for &s in support {
                    let raw = weighted_share(n, u_hat[i], &u_hat, kernel, hz, Some(i), |j| {
                        z_codes[j] == s
                    });
                    fallbacks += usize::from(raw.fallback && s == support[0]);
                    let p = clamp_propensity(raw.value);
                    row_clamped |= p != raw.value;
                    p_hat.push(p);
                }
                clamped += usize::from(row_clamped);
            }
            if fallbacks > 0 {
                warnings.push(Degeneracy::EmptyKernelWindow {
                    target: SmoothingTarget::Propensity,
                    observations: fallbacks,
                });
            }
            if clamped > 0 {
                warnings.push(Degeneracy::PropensityClamped {
                    observations: clamped,
                });
            }
            ZTransform::Discrete {
                support: support.clone(),
                z_index,
                p_hat,
            }
        }
    };

    Ok(TransformedSample {
        u_hat,
        y_hat,
        z,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xcol(v: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
    }

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf_leave_one_out(&[3.0, 1.0, 2.0], 0).unwrap(), 1.0);
        assert_eq!(ecdf_leave_one_out(&[3.0, 1.0, 2.0], 1).unwrap(), 0.0);
        assert_eq!(ecdf_leave_one_out(&[5.0, 5.0, 1.0], 0).unwrap(), 1.0);
        assert!(ecdf_leave_one_out(&[1.0], 0).is_err());
        assert!(ecdf_leave_one_out(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn sorted_ecdf_matches_pointwise() {
        let v = [0.4, 0.1, 0.4, 0.9, -2.0, 0.4, 7.0];
        let all = leave_one_out_ecdf(&v).unwrap();
        for (i, a) in all.iter().enumerate() {
            assert_eq!(*a, ecdf_leave_one_out(&v, i).unwrap());
        }
    }

    #[test]
    fn quartic_kernel_values() {
        assert_eq!(quartic_kernel(0.0), 0.9375);
        assert_eq!(quartic_kernel(1.0), 0.0);
        assert_eq!(quartic_kernel(-1.0), 0.0);
        assert_eq!(quartic_kernel(1.5), 0.0);
        assert_eq!(Kernel::Quartic.support_radius(), 1.0);
    }

    #[test]
    fn quartic_kernel_integrates_to_one() {
        // Composite Simpson; exact for the degree-4 polynomial up to rounding.
        let m = 2000;
        let step = 2.0 / m as f64;
        let mut acc = quartic_kernel(-1.0) + quartic_kernel(1.0);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * quartic_kernel(-1.0 + k as f64 * step);
        }
        assert_abs_diff_eq!(acc * step / 3.0, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn quartic_kernel_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let u: f64 = rng.random_range(-1.5..1.5);
            assert_eq!(quartic_kernel(u), quartic_kernel(-u));
        }
    }

    #[test]
    fn conditional_cdf_equal_weights_is_plain_ecdf() {
        let u = [0.5; 4];
        let y = [1.0, 2.0, 3.0, 9.0];
        let est = kernel_conditional_cdf(2.0, 0.5, &y, &u, Kernel::Quartic, 0.2, Some(3)).unwrap();
        assert_abs_diff_eq!(est.value, 2.0 / 3.0, epsilon = 1e-15);
        assert!(!est.fallback);
        assert_eq!(
            kernel_conditional_cdf(0.0, 0.5, &y, &u, Kernel::Quartic, 0.2, None)
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            kernel_conditional_cdf(9.0, 0.5, &y, &u, Kernel::Quartic, 0.2, None)
                .unwrap()
                .value,
            1.0
        );
    }

    #[test]
    fn conditional_cdf_hand_weighted() {
        // j in {0,1,2}: scaled distances -0.25, 0.25, 3.25 -> the third is outside the window.
        let u_hat = [0.1, 0.2, 0.8, 0.9];
        let y = [1.0, 2.0, 3.0, 4.0];
        let est =
            kernel_conditional_cdf(1.0, 0.15, &y, &u_hat, Kernel::Quartic, 0.2, Some(3)).unwrap();
        let k = |d: f64| {
            let t = 1.0 - d * d;
            if d.abs() <= 1.0 {
                15.0 / 16.0 * t * t / 0.2
            } else {
                0.0
            }
        };
        let w = [
            k((0.1 - 0.15) / 0.2),
            k((0.2 - 0.15) / 0.2),
            k((0.8 - 0.15) / 0.2),
        ];
        let expected = w[0] / (w[0] + w[1] + w[2]);
        assert_abs_diff_eq!(est.value, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(est.value, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn conditional_cdf_falls_back_when_window_empty() {
        let u_hat = [0.0, 0.1, 0.9];
        let y = [1.0, 2.0, 3.0];
        let est =
            kernel_conditional_cdf(2.0, 0.5, &y, &u_hat, Kernel::Quartic, 0.05, Some(0)).unwrap();
        assert!(est.fallback);
        assert_eq!(est.value, 0.5);
    }

    #[test]
    fn smoothing_rejects_bad_arguments() {
        assert!(
            kernel_conditional_cdf(0.0, 0.5, &[1.0], &[0.5, 0.2], Kernel::Quartic, 0.1, None)
                .is_err()
        );
        assert!(
            kernel_conditional_cdf(0.0, 0.5, &[1.0], &[0.5], Kernel::Quartic, 0.0, None).is_err()
        );
        assert!(
            kernel_conditional_cdf(0.0, 0.5, &[1.0], &[0.5], Kernel::Quartic, 0.1, Some(0))
                .is_err()
        );
    }

    #[test]
    fn propensity_examples() {
        let u = [0.3; 4];
        let z = [1.0, 1.0, 0.0, 0.0];
        let support = [0.0, 1.0];
        let p =
            kernel_propensity(1.0, 0.3, &z, &u, &support, Kernel::Quartic, 0.2, Some(3)).unwrap();
        assert_abs_diff_eq!(p.value, 2.0 / 3.0, epsilon = 1e-15);

        let ones = [1.0; 4];
        let p = kernel_propensity(1.0, 0.3, &ones, &u, &support, Kernel::Quartic, 0.2, Some(0))
            .unwrap();
        assert_eq!(p.value, 1.0 - PROPENSITY_CLAMP);
        let p = kernel_propensity(0.0, 0.3, &ones, &u, &support, Kernel::Quartic, 0.2, Some(0))
            .unwrap();
        assert_eq!(p.value, PROPENSITY_CLAMP);

        assert!(kernel_propensity(2.0, 0.3, &z, &u, &support, Kernel::Quartic, 0.2, None).is_err());
    }

    #[test]
    fn propensity_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 15;
        let u: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let z: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_bool(0.4) as u8))
            .collect();
        for i in 0..n {
            let got = kernel_propensity(
                1.0,
                u[i],
                &z,
                &u,
                &[0.0, 1.0],
                Kernel::Quartic,
                0.2,
                Some(i),
            )
            .unwrap();
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = (u[j] - u[i]) / 0.2;
                let w = if d.abs() <= 1.0 {
                    0.9375 * (1.0 - d * d).powi(2) / 0.2
                } else {
                    0.0
                };
                den += w;
                if z[j] == 1.0 {
                    num += w;
                }
            }
            let want = (num / den).clamp(PROPENSITY_CLAMP, 1.0 - PROPENSITY_CLAMP);
            assert_abs_diff_eq!(got.value, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_observations_give_binary_u_hat() {
        let s = Sample::new(
            vec![1.0, 2.0],
            vec![0.3, 0.1],
            xcol(&[0.0, 1.0]),
            ZKind::Continuous,
        )
        .unwrap();
        let bw = Bandwidth::with_default_exponent(1.0).unwrap();
        let ts = rosenblatt_transform(&s, &[0.2, 0.7], Kernel::Quartic, bw, bw).unwrap();
        assert_eq!(ts.u_hat, vec![0.0, 1.0]);
    }

    #[test]
    fn transform_matches_straight_line_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10;
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let idx: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let s = Sample::new(y.clone(), z.clone(), xcol(&idx), ZKind::Continuous).unwrap();
        let bw = Bandwidth::new(0.8, 0.2).unwrap();
        let h = 0.8 * (n as f64).powf(-0.2);
        let ts = rosenblatt_transform(&s, &idx, Kernel::Quartic, bw, bw).unwrap();

        let mut u = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                if j != i && idx[j] <= idx[i] {
                    u[i] += 1.0 / (n as f64 - 1.0);
                }
            }
        }
        for i in 0..n {
            assert_abs_diff_eq!(ts.u_hat[i], u[i], epsilon = 1e-14);
            let mut num_y = 0.0;
            let mut num_z = 0.0;
            let mut den = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = (u[j] - u[i]) / h;
                let w = if d.abs() <= 1.0 {
                    15.0 / 16.0 * (1.0 - d * d).powi(2) / h
                } else {
                    0.0
                };
                den += w;
                if y[j] <= y[i] {
                    num_y += w;
                }
                if z[j] <= z[i] {
                    num_z += w;
                }
            }
            assert_abs_diff_eq!(ts.y_hat[i], num_y / den, epsilon = 1e-13);
            match &ts.z {
                ZTransform::Continuous { z_hat } => {
                    assert_abs_diff_eq!(z_hat[i], num_z / den, epsilon = 1e-13)
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn discrete_transform_shapes_and_clamp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let z: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
        let idx: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let s = Sample::discrete(y, z, xcol(&idx)).unwrap();
        let bw = Bandwidth::with_default_exponent(1.0).unwrap();
        let ts = rosenblatt_transform(&s, &idx, Kernel::Quartic, bw, bw).unwrap();
        match &ts.z {
            ZTransform::Discrete {
                support,
                z_index,
                p_hat,
            } => {
                assert_eq!(support, &vec![0.0, 1.0, 2.0]);
                assert_eq!(z_index.len(), n);
                assert_eq!(p_hat.len(), 3 * n);
                assert!(p_hat
                    .iter()
                    .all(|p| (PROPENSITY_CLAMP..=1.0 - PROPENSITY_CLAMP).contains(p)));
            }
            _ => panic!("expected discrete"),
        }
    }

    #[test]
    fn small_bandwidth_records_warning() {
        let n = 20;
        let idx: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let s = Sample::new(idx.clone(), idx.clone(), xcol(&idx), ZKind::Continuous).unwrap();
        // h = 1e-3 is far below the rank spacing 1/19.
        let bw = Bandwidth::new(1e-3, 1e-9).unwrap();
        let ts = rosenblatt_transform(&s, &idx, Kernel::Quartic, bw, bw).unwrap();
        assert!(ts.warnings.iter().any(|w| matches!(
            w,
            Degeneracy::EmptyKernelWindow {
                target: SmoothingTarget::Y,
                observations: 20
            }
        )));
    }

    #[test]
    fn population_transform_is_identity_under_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let true_cdf = |y: f64, _u: f64| y.clamp(0.0, 1.0);
        for _ in 0..200 {
            let (y, u): (f64, f64) = (rng.random(), rng.random());
            assert_eq!(true_cdf(y, u), y);
        }
    }

    #[test]
    fn sample_validation() {
        let x = xcol(&[0.0, 1.0]);
        assert!(Sample::new(vec![1.0], vec![1.0], xcol(&[0.0]), ZKind::Continuous).is_err());
        assert!(Sample::new(
            vec![1.0, f64::NAN],
            vec![1.0, 2.0],
            x.clone(),
            ZKind::Continuous
        )
        .is_err());
        assert!(Sample::new(
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            x.clone(),
            ZKind::Discrete { support: vec![1.0] }
        )
        .is_err());
        assert!(Sample::new(vec![1.0, 2.0], vec![1.0], x, ZKind::Continuous).is_err());
    }

    proptest! {
        #[test]
        fn distinct_values_give_uniform_ranks(mut v in proptest::collection::hash_set(-1000i32..1000, 2..40)
            .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>())) {
            let n = v.len();
            let ranks = leave_one_out_ecdf(&v).unwrap();
            let mut scaled: Vec<usize> = ranks.iter().map(|r| (r * (n - 1) as f64).round() as usize).collect();
            scaled.sort_unstable();
            prop_assert_eq!(scaled, (0..n).collect::<Vec<_>>());
            v.sort_by(f64::total_cmp);
        }

        #[test]
        fn conditional_cdf_is_monotone_in_y(
            data in proptest::collection::vec((0.0f64..1.0, -5.0f64..5.0), 3..25),
            at in 0.0f64..1.0,
            h in 0.05f64..1.0,
            y1 in -6.0f64..6.0,
            y2 in -6.0f64..6.0,
        ) {
            let (u, r): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
            let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
            let a = kernel_conditional_cdf(lo, at, &r, &u, Kernel::Quartic, h, Some(0)).unwrap().value;
            let b = kernel_conditional_cdf(hi, at, &r, &u, Kernel::Quartic, h, Some(0)).unwrap().value;
            prop_assert!(a <= b);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        }
    }
}
