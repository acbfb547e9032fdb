//! Confidence intervals for the criticality parameter μ from ln(Z_{n0+n}/Z_{n0}).
//!
//! σ is treated as known. Both intervals are centred at μ̂ = ln(Z_{n0+n}/Z_{n0})/n
//! with half-width Δ = (σ/√n)·c(κ):
//!
//! * normal quantile: c(κ) = Φ⁻¹(1 − κ/2), admissible while |ln κ| = o(n^{1/3});
//! * MDP width: c(κ) = √(2|ln(κ/2)|), for κ → 0 with |ln κ| = o(n).

use serde::{Deserialize, Serialize};

use crate::environment::EnvMoments;
use crate::error::{Error, Result};
use crate::stats::normal_quantile;

/// κ at or above which the MDP width is outside its small-risk regime.
pub const MDP_KAPPA_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    NormalQuantile,
    MdpWidth,
}

impl CiMethod {
    /// Width constant c(κ), so that Δ = c(κ)·σ/√n.
    pub fn width_constant(self, kappa: f64) -> Result<f64> {
        check_kappa(kappa)?;
        match self {
            CiMethod::NormalQuantile => normal_quantile(1.0 - kappa / 2.0),
            CiMethod::MdpWidth => Ok((2.0 * (kappa / 2.0).ln().abs()).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub a_n: f64,
    pub b_n: f64,
    pub delta_n: f64,
    pub kappa: f64,
    pub method: CiMethod,
    pub n: usize,
    pub mu_hat: f64,
    pub warnings: Vec<String>,
}

impl ConfidenceInterval {
    pub fn contains(&self, mu: f64) -> bool {
        self.a_n <= mu && mu <= self.b_n
    }

    pub fn width(&self) -> f64 {
        self.b_n - self.a_n
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Domain(format!(
            "kappa must be in (0, 1), got {kappa}"
        )));
    }
    Ok(())
}

/// μ̂ = (ln Z_{n0+n} − ln Z_{n0}) / n.
pub fn estimate_mu(ln_z_n0: f64, ln_z_n0n: f64, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    Ok((ln_z_n0n - ln_z_n0) / n as f64)
}

pub fn confidence_interval(
    mu_hat: f64,
    sigma: f64,
    n: usize,
    kappa: f64,
    method: CiMethod,
) -> Result<ConfidenceInterval> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
    }
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let c = method.width_constant(kappa)?;
    let delta_n = sigma / (n as f64).sqrt() * c;
    let mut warnings = Vec::new();
    let abs_ln_kappa = kappa.ln().abs();
    match method {
        CiMethod::NormalQuantile => {
            let limit = (n as f64).cbrt();
            if abs_ln_kappa > limit {
                warnings.push(format!(
                    "|ln kappa| = {abs_ln_kappa:.4} exceeds n^(1/3) = {limit:.4}; normal-quantile interval outside its regime"
                ));
            }
        }
        CiMethod::MdpWidth => {
            if kappa >= MDP_KAPPA_WARN {
                warnings.push(format!(
                    "kappa = {kappa} is not small; MDP-width interval assumes kappa -> 0"
                ));
            }
            if abs_ln_kappa > n as f64 {
                warnings.push(format!("|ln kappa| = {abs_ln_kappa:.4} exceeds n = {n}"));
            }
        }
    }
    Ok(ConfidenceInterval {
        a_n: mu_hat - delta_n,
        b_n: mu_hat + delta_n,
        delta_n,
        kappa,
        method,
        n,
        mu_hat,
        warnings,
    })
}

pub fn ci_normal(mu_hat: f64, sigma: f64, n: usize, kappa: f64) -> Result<ConfidenceInterval> {
    confidence_interval(mu_hat, sigma, n, kappa, CiMethod::NormalQuantile)
}

pub fn ci_mdp(mu_hat: f64, sigma: f64, n: usize, kappa: f64) -> Result<ConfidenceInterval> {
    confidence_interval(mu_hat, sigma, n, kappa, CiMethod::MdpWidth)
}

/// Interval with σ taken from the environment's moments.
pub fn ci_from_moments(
    mu_hat: f64,
    moments: &EnvMoments,
    n: usize,
    kappa: f64,
    method: CiMethod,
) -> Result<ConfidenceInterval> {
    confidence_interval(mu_hat, moments.sigma(), n, kappa, method)
}
