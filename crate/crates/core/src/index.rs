//! Single-index models `lambda_theta(x)` and probit maximum likelihood.
//!
//! `theta` always carries an intercept in position 0, so for `d` covariates
//! it has length `d + 1`.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::normal;

type IndexFn = dyn Fn(&[f64], ArrayView1<'_, f64>) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum IndexModel {
    /// `scale * (theta_0 + theta_1 x_1 + ... + theta_d x_d)`
    LinearScaled { scale: f64 },
    /// Arbitrary index; cannot be fitted by [`probit_mle`].
    Custom(Arc<IndexFn>),
}

impl fmt::Debug for IndexModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexModel::LinearScaled { scale } => f
                .debug_struct("LinearScaled")
                .field("scale", scale)
                .finish(),
            IndexModel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl IndexModel {
    pub fn linear() -> Self {
        IndexModel::LinearScaled { scale: 1.0 }
    }

    pub fn eval_row(&self, theta: &[f64], x: ArrayView1<'_, f64>) -> f64 {
        match self {
            IndexModel::LinearScaled { scale } => {
                let lin = theta[1..]
                    .iter()
                    .zip(x.iter())
                    .fold(theta[0], |acc, (t, v)| acc + t * v);
                scale * lin
            }
            IndexModel::Custom(f) => f(theta, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThetaSpec {
    Known { theta: Vec<f64> },
    ProbitMle(ProbitOptions),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbitOptions {
    /// Starting point; `None` means the zero vector.
    pub init: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProbitOptions {
    fn default() -> Self {
        Self {
            init: None,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// How the index values of a sample are obtained.
#[derive(Debug, Clone)]
pub struct IndexSpec {
    pub model: IndexModel,
    pub theta: ThetaSpec,
}

impl IndexSpec {
    pub fn known(model: IndexModel, theta: Vec<f64>) -> Self {
        Self {
            model,
            theta: ThetaSpec::Known { theta },
        }
    }

    pub fn probit(model: IndexModel) -> Self {
        Self {
            model,
            theta: ThetaSpec::ProbitMle(ProbitOptions::default()),
        }
    }

    /// Resolve `theta` (fitting it when requested) and evaluate the index.
    pub fn resolve(&self, z: &[f64], x: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let theta = match &self.theta {
            ThetaSpec::Known { theta } => theta.clone(),
            ThetaSpec::ProbitMle(opts) => probit_mle(z, x, &self.model, opts)?.theta,
        };
        let values = eval_index(&self.model, &theta, x)?;
        Ok((theta, values))
    }
}

pub fn eval_index(model: &IndexModel, theta: &[f64], x: &Array2<f64>) -> Result<Vec<f64>> {
    if let IndexModel::LinearScaled { .. } = model {
        if theta.len() != x.ncols() + 1 {
            return invalid(format!(
                "theta has length {}, expected {} (intercept + {} covariates)",
                theta.len(),
                x.ncols() + 1,
                x.ncols()
            ));
        }
    }
    let out: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|row| model.eval_row(theta, row))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return invalid("index evaluated to a non-finite value");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbitFit {
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub score_norm: f64,
}

const LIKELIHOOD_CLAMP: f64 = 1e-12;
/// Relative slack when comparing log-likelihoods in the line search.
const LL_ROUNDING: f64 = 1e-13;

/// Probit log-likelihood `sum z log Phi(eta) + (1 - z) log(1 - Phi(eta))`
/// with `eta = lambda_theta(x)`; probabilities are clamped into
/// `[1e-12, 1 - 1e-12]`.
pub fn probit_log_likelihood(z: &[f64], eta: &[f64]) -> f64 {
    z.iter()
        .zip(eta)
        .map(|(&zi, &e)| {
            let p = if zi == 1.0 {
                normal::cdf(e)
            } else {
                normal::sf(e)
            };
            p.clamp(LIKELIHOOD_CLAMP, 1.0 - LIKELIHOOD_CLAMP).ln()
        })
        .sum()
}

/// Score and Hessian of the probit log-likelihood with respect to `theta`,
/// for a linear index `scale * (theta . (1, x))`.
fn score_and_hessian(z: &[f64], x: &Array2<f64>, scale: f64, eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = x.ncols() + 1;
    let mut score = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut row = vec![0.0; d];
    for (i, xi) in x.rows().into_iter().enumerate() {
        row[0] = 1.0;
        row[1..]
            .iter_mut()
            .zip(xi.iter())
            .for_each(|(r, v)| *r = *v);
        let e = eta[i];
        let dens = normal::pdf(e);
        // First and second derivative of the per-observation log-likelihood in eta.
        let (g, h) = if z[i] == 1.0 {
            let mills = dens / normal::cdf(e);
            (mills, -mills * (mills + e))
        } else {
            let mills = dens / normal::sf(e);
            (-mills, -mills * (mills - e))
        };
        let (g, h) = if g.is_finite() && h.is_finite() {
            (g, h)
        } else {
            (0.0, 0.0)
        };
        for a in 0..d {
            score[a] += scale * g * row[a];
            for b in 0..d {
                hess[a * d + b] += scale * scale * h * row[a] * row[b];
            }
        }
    }
    (score, hess)
}

/// Solve `A x = b` for symmetric positive definite `A` (row-major) by Cholesky.
fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let diag = a[i * d + i] - s;
                if !(diag > 0.0) {
                    return None;
                }
                l[i * d + i] = diag.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * d + i];
    }
    Some(x)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Probit maximum likelihood by Newton's method with step halving.
///
/// `z` must be 0/1 with both values present. Converges when the score's
/// sup-norm falls below `opts.tol`, or when the Newton step is smaller than
/// `opts.tol` relative to `1 + |theta|_inf`.
pub fn probit_mle(
    z: &[f64],
    x: &Array2<f64>,
    model: &IndexModel,
    opts: &ProbitOptions,
) -> Result<ProbitFit> {
    let scale = match model {
        IndexModel::LinearScaled { scale } => *scale,
        IndexModel::Custom(_) => return invalid("probit MLE needs a linear index model"),
    };
    if !(scale.is_finite() && scale != 0.0) {
        return invalid("index scale must be finite and nonzero");
    }
    if z.len() != x.nrows() {
        return invalid(format!(
            "z has length {}, x has {} rows",
            z.len(),
            x.nrows()
        ));
    }
    if z.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return invalid("probit response must be coded 0/1");
    }
    if z.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateResponse(0));
    }
    if z.iter().all(|v| *v == 1.0) {
        return Err(Error::DegenerateResponse(1));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return invalid("probit options need tol > 0 and max_iter >= 1");
    }
    let d = x.ncols() + 1;
    let mut theta = opts.init.clone().unwrap_or_else(|| vec![0.0; d]);
    if theta.len() != d {
        return invalid(format!(
            "initial theta has length {}, expected {d}",
            theta.len()
        ));
    }

    let mut eta = eval_index(model, &theta, x)?;
    let mut loglik = probit_log_likelihood(z, &eta);
    let mut score_norm = f64::INFINITY;
    let mut iterations = opts.max_iter;
    for iter in 0..=opts.max_iter {
        let (score, hess) = score_and_hessian(z, x, scale, &eta);
        score_norm = sup_norm(&score);
        if score_norm < opts.tol {
            return Ok(ProbitFit {
                theta,
                log_likelihood: loglik,
                iterations: iter,
                score_norm,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let neg_hess: Vec<f64> = hess.iter().map(|h| -h).collect();
        // Fall back to a scaled gradient step if the Hessian is numerically singular.
        let (step, newton) = match cholesky_solve(&neg_hess, &score) {
            Some(step) => (step, true),
            None => (score.iter().map(|s| 1e-2 * s).collect(), false),
        };
        let theta_scale = 1.0 + sup_norm(&theta);
        if newton && sup_norm(&step) < opts.tol * theta_scale {
            return Ok(ProbitFit {
                theta,
                log_likelihood: loglik,
                iterations: iter,
                score_norm,
            });
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let cand_eta = eval_index(model, &cand, x)?;
            let cand_ll = probit_log_likelihood(z, &cand_eta);
            if cand_ll >= loglik - LL_ROUNDING * (1.0 + loglik.abs()) {
                theta = cand;
                eta = cand_eta;
                loglik = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            iterations = iter + 1;
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations,
        score_norm,
        last: theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn zero_theta_gives_zero_index() {
        let x = array![[1.0, 2.0], [3.0, -4.0]];
        assert_eq!(
            eval_index(&IndexModel::linear(), &[0.0; 3], &x).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn design_means_give_zero() {
        let x = array![[0.2, -0.2]];
        let v = eval_index(
            &IndexModel::LinearScaled { scale: 0.5 },
            &[0.0, 1.0, 1.0],
            &x,
        )
        .unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn matches_dot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Array2::from_shape_fn((30, 4), |_| rng.random_range(-2.0..2.0));
        let theta: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = eval_index(&IndexModel::LinearScaled { scale: 0.7 }, &theta, &x).unwrap();
        for (i, g) in got.iter().enumerate() {
            let mut s = theta[0];
            for j in 0..4 {
                s += theta[j + 1] * x[[i, j]];
            }
            assert_abs_diff_eq!(*g, 0.7 * s, epsilon = 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let x = array![[1.0, 2.0]];
        assert!(eval_index(&IndexModel::linear(), &[0.0, 1.0], &x).is_err());
    }

    #[test]
    fn custom_model() {
        let m = IndexModel::Custom(Arc::new(|t: &[f64], x: ArrayView1<'_, f64>| {
            (t[0] * x[0]).tanh()
        }));
        let x = array![[0.5], [1.0]];
        let v = eval_index(&m, &[2.0], &x).unwrap();
        assert_abs_diff_eq!(v[1], 2f64.tanh());
        assert!(probit_mle(&[0.0, 1.0], &x, &m, &ProbitOptions::default()).is_err());
    }

    #[test]
    fn intercept_only_closed_form() {
        let z = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let x = Array2::<f64>::zeros((10, 0));
        let model = IndexModel::LinearScaled { scale: 0.5 };
        let fit = probit_mle(&z, &x, &model, &ProbitOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.theta[0], normal::quantile(0.6) / 0.5, epsilon = 1e-8);
    }

    #[test]
    fn degenerate_responses() {
        let x = array![[1.0], [2.0]];
        let m = IndexModel::linear();
        assert_eq!(
            probit_mle(&[0.0, 0.0], &x, &m, &ProbitOptions::default()),
            Err(Error::DegenerateResponse(0))
        );
        assert_eq!(
            probit_mle(&[1.0, 1.0], &x, &m, &ProbitOptions::default()),
            Err(Error::DegenerateResponse(1))
        );
        assert!(probit_mle(&[1.0, 0.5], &x, &m, &ProbitOptions::default()).is_err());
    }

    #[test]
    fn separation_does_not_converge() {
        let x = array![[-1.0], [-0.5], [0.5], [1.0]];
        let opts = ProbitOptions {
            max_iter: 15,
            ..ProbitOptions::default()
        };
        match probit_mle(&[0.0, 0.0, 1.0, 1.0], &x, &IndexModel::linear(), &opts) {
            Err(Error::NonConvergence { last, .. }) => assert!(last[1] > 1.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn fit_beats_truth_and_has_small_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 300;
        let x = Array2::from_shape_fn((n, 2), |(_, j)| {
            rng.random::<f64>() + if j == 0 { 0.2 } else { -0.2 }
        });
        let truth = [0.0, 1.0, 1.0];
        let model = IndexModel::LinearScaled { scale: 0.5 };
        let eta = eval_index(&model, &truth, &x).unwrap();
        let z: Vec<f64> = eta
            .iter()
            .map(|e| {
                let noise: f64 = rng.sample(StandardNormal);
                f64::from(u8::from(*e > noise))
            })
            .collect();
        let fit = probit_mle(&z, &x, &model, &ProbitOptions::default()).unwrap();
        assert!(fit.score_norm < 1e-8);
        assert!(fit.log_likelihood >= probit_log_likelihood(&z, &eta));
    }
}
