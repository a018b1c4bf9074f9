use crate::distributions::{GammaParams, NormalParams};
use crate::error::{Error, Result};

/// Normal noise `(mu, sigma)` plus gamma signal with shape `k` and scale
/// `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalGammaParams {
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
    pub theta: f64,
}

impl NormalGammaParams {
    pub fn new(mu: f64, sigma: f64, k: f64, theta: f64) -> Result<Self> {
        NormalParams::new(mu, sigma)?;
        GammaParams::new(k, theta)?;
        Ok(Self { mu, sigma, k, theta })
    }

    pub fn noise(&self) -> NormalParams {
        NormalParams { mu: self.mu, sigma: self.sigma }
    }

    pub fn signal(&self) -> GammaParams {
        GammaParams { shape: self.k, scale: self.theta }
    }

    /// Same parameters with the shape raised by one, the denominator-free
    /// form of `s f(s)` used by the conditional-expectation correction.
    pub fn with_next_shape(&self) -> Self {
        Self { k: self.k + 1.0, ..*self }
    }

    pub fn signal_mean(&self) -> f64 {
        self.k * self.theta
    }
}

impl From<NormexpParams> for NormalGammaParams {
    fn from(p: NormexpParams) -> Self {
        Self { mu: p.mu, sigma: p.sigma, k: 1.0, theta: p.alpha }
    }
}

/// Normal noise plus exponential signal with mean `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormexpParams {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
}

impl NormexpParams {
    pub fn new(mu: f64, sigma: f64, alpha: f64) -> Result<Self> {
        NormalParams::new(mu, sigma)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param(format!("exponential mean must be positive, got {alpha}")));
        }
        Ok(Self { mu, sigma, alpha })
    }

    pub fn noise(&self) -> NormalParams {
        NormalParams { mu: self.mu, sigma: self.sigma }
    }
}
