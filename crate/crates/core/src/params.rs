use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Model constants. The spatial dimension is carried by the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Mass squared m² > 0.
    pub m2: f64,
    /// Noise intensity ε ≥ 0.
    pub eps: f64,
    /// Regularity exponent of the state space 𝒞^α, α ∈ (−2/3, −1/2).
    pub alpha: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { m2: 1.0, eps: 0.0, alpha: -0.6 }
    }
}

impl ModelParams {
    pub fn new(m2: f64, eps: f64, alpha: f64) -> Result<Self> {
        let p = ModelParams { m2, eps, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn with_eps(self, eps: f64) -> Self {
        ModelParams { eps, ..self }
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.m2 > 0.0 && self.m2.is_finite()) {
            v.push(format!("m2 must be positive (got {})", self.m2));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            v.push(format!("eps must be >= 0 (got {})", self.eps));
        }
        if !(self.alpha > -2.0 / 3.0 && self.alpha < -0.5) {
            v.push(format!("alpha must lie in (-2/3, -1/2) (got {})", self.alpha));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(v.join("; ")))
        }
    }

    /// Default path-weight exponent η = −3α/8.
    pub fn default_eta(&self) -> f64 {
        -3.0 * self.alpha / 8.0
    }
}
