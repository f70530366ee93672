//! Weight functions of the test process and the covariance kernel of its
//! Gaussian limit.
//!
//! Both weight families shipped here (`1{U <= u}` and `exp(U u)`) are known
//! to make the moment restriction over all `(u, y, z)` equivalent to
//! conditional independence. That is a population property and is not
//! checked at runtime.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaFamily {
    /// `beta_u(U) = 1{U <= u}`
    Indicator,
    /// `beta_u(U) = exp(U u)`
    Exponential,
}

impl BetaFamily {
    pub fn eval(self, big_u: f64, u: f64) -> f64 {
        beta_eval(self, big_u, u)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            BetaFamily::Indicator => "ind",
            BetaFamily::Exponential => "exp",
        }
    }
}

pub fn beta_eval(family: BetaFamily, big_u: f64, u: f64) -> f64 {
    match family {
        BetaFamily::Indicator => {
            if big_u <= u {
                1.0
            } else {
                0.0
            }
        }
        BetaFamily::Exponential => (big_u * u).exp(),
    }
}

/// `gamma_z(t) = z exp(t z)`.
pub fn gamma(z: f64, t: f64) -> f64 {
    z * (t * z).exp()
}

/// Centered exponential weight `z exp(t z) - (exp(z) - 1)`; integrates to 0 over `t in [0, 1]`.
pub fn gamma_perp(z: f64, t: f64) -> f64 {
    gamma(z, t) - z.exp_m1()
}

/// `(e^s - 1) / s` with its limit 1 at `s = 0`.
fn exp_ratio(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        s.exp_m1() / s
    }
}

/// `<gamma_perp_{z1}, gamma_perp_{z2}>` in `L2[0, 1]`.
pub fn gamma_perp_inner(z1: f64, z2: f64) -> f64 {
    let s = z1 + z2;
    let cross = if s == 0.0 {
        0.0
    } else {
        z1 * z2 * exp_ratio(s)
    };
    cross - z1.exp_m1() * z2.exp_m1()
}

/// `<beta_{u1}, beta_{u2}>` in `L2[0, 1]`.
pub fn beta_inner(family: BetaFamily, u1: f64, u2: f64) -> f64 {
    match family {
        BetaFamily::Indicator => u1.min(u2),
        BetaFamily::Exponential => exp_ratio(u1 + u2),
    }
}

/// Grid point `(u, y, z)` of the process. For discrete `Z`, `z` is a support label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub u: f64,
    pub y: f64,
    pub z: f64,
}

impl GridPoint {
    pub fn new(u: f64, y: f64, z: f64) -> Self {
        Self { u, y, z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    Continuous,
    /// Standardized process with discrete `Z`: different support points are
    /// treated as uncorrelated.
    Discrete,
}

/// Covariance kernel of the limiting Gaussian process.
pub fn covariance_kernel(
    r1: GridPoint,
    r2: GridPoint,
    family: BetaFamily,
    variant: KernelVariant,
) -> f64 {
    let base = beta_inner(family, r1.u, r2.u) * gamma_perp_inner(r1.y, r2.y);
    match variant {
        KernelVariant::Continuous => base * gamma_perp_inner(r1.z, r2.z),
        KernelVariant::Discrete => {
            if r1.z == r2.z {
                base
            } else {
                0.0
            }
        }
    }
}
