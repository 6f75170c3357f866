//! Masked-load model: an Ornstein–Uhlenbeck process with compound
//! Poisson jumps whose absolute sizes are Gamma distributed,
//!
//! ```text
//! dx = γ(μ − x) dt + σ₁ dW + J dq
//! ```
//!
//! plus the filter-based estimator that recovers its parameters from a
//! sampled path.

mod estimate;
mod ks;
mod simulate;

pub use estimate::{
    detect_jumps, estimate_gamma_rate, estimate_params, fit_jump_distribution, residual_filter,
    EstimationReport, JumpDetection, JumpFit, Profile,
};
pub use ks::{ks_critical_value, ks_statistic, ks_test, KsResult, ReferenceCdf};
pub use simulate::{simulate_em, simulate_em_with, simulate_exact, simulate_exact_with, Innovations};

use crate::error::{Error, Result};

/// Full parameter vector Θ = [γ, μ, μ₁, σ₁, k, θ, λ].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    /// Mean-reversion rate, 1/s.
    pub gamma: f64,
    /// Long-term mean, W.
    pub mu: f64,
    /// Drift of the Wiener increments, W/s.
    pub mu1: f64,
    /// Diffusion, W/√s.
    pub sigma1: f64,
    /// Gamma shape of jump sizes.
    pub k: f64,
    /// Gamma scale of jump sizes, W.
    pub theta: f64,
    /// Jump intensity, 1/s.
    pub lambda: f64,
}

pub const PARAM_NAMES: [&str; 7] = ["gamma", "mu", "mu1", "sigma1", "k", "theta", "lambda"];

impl OuParams {
    /// Jump-free process.
    pub fn diffusion(gamma: f64, mu: f64, sigma1: f64) -> Self {
        Self {
            gamma,
            mu,
            mu1: 0.0,
            sigma1,
            k: 1.0,
            theta: 1.0,
            lambda: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.to_array();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite OU parameters {self:?}")));
        }
        if !(self.gamma > 0.0 && self.sigma1 > 0.0 && self.k > 0.0 && self.theta > 0.0) {
            return Err(Error::invalid(format!(
                "OU parameters need gamma, sigma1, k, theta > 0: {self:?}"
            )));
        }
        if self.lambda < 0.0 {
            return Err(Error::invalid(format!("negative jump intensity {}", self.lambda)));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.gamma,
            self.mu,
            self.mu1,
            self.sigma1,
            self.k,
            self.theta,
            self.lambda,
        ]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            gamma: v[0],
            mu: v[1],
            mu1: v[2],
            sigma1: v[3],
            k: v[4],
            theta: v[5],
            lambda: v[6],
        }
    }

    /// Stationary variance of the jump-free diffusion, σ₁²/(2γ).
    pub fn stationary_variance(&self) -> f64 {
        self.sigma1 * self.sigma1 / (2.0 * self.gamma)
    }
}

/// A detected or simulated jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    /// Index of the first sample that contains the jump.
    pub index: usize,
    /// Signed size, W.
    pub magnitude: f64,
}
