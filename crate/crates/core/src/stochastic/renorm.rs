//! Mass counterterms of the Galerkin-truncated dynamics.
//!
//! C1 is the stationary variance Σ_k ρ̂_κ(k)²/(2λ_k) of the linear field Z at
//! ε = 1. C2 (d = 3 only) is the mean of ((m² − Δ)⁻¹-weighted) space-time
//! pairings of the Wick square :Z²: of the stationary OU process, estimated by
//! Monte Carlo:
//!
//!   C2 = E ∫₀^∞ ⟨e^{t(Δ−m²)} :Z²:(s − t), :Z²:(s)⟩ dt.
//!
//! The lag t is drawn from Exp(m²) and reweighted, and Z(s) is obtained from
//! Z(s − t) by the exact OU transition.

use super::noise::{unit_modes, NoiseSpec};
use crate::error::{Error, Result};
use crate::field::dealias::Dealiaser;
use crate::field::{C64, ZERO};
use rand::Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormConstants {
    pub c1: f64,
    pub c2: f64,
    /// Monte Carlo standard error of c2 (0 when c2 is not estimated).
    pub c2_stderr: f64,
    pub d: usize,
    pub n: usize,
    pub kappa: f64,
    pub m2: f64,
}

impl RenormConstants {
    /// No counterterms.
    pub fn none(spec: &NoiseSpec, m2: f64) -> Self {
        RenormConstants { c1: 0.0, c2: 0.0, c2_stderr: 0.0, d: spec.grid.d(), n: spec.grid.n(), kappa: spec.kappa, m2 }
    }

    /// m² − 3ε²C1 + 9ε⁴C2.
    pub fn mass(&self, m2: f64, eps: f64) -> f64 {
        let e2 = eps * eps;
        m2 - 3.0 * e2 * self.c1 + 9.0 * e2 * e2 * self.c2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenormOptions {
    pub c2_samples: usize,
    pub seed: u64,
}

impl Default for RenormOptions {
    fn default() -> Self {
        RenormOptions { c2_samples: 20_000, seed: 0x5eed_c2 }
    }
}

fn lambda(k2: i64, m2: f64) -> f64 {
    4.0 * PI * PI * k2 as f64 + m2
}

pub fn c1(spec: &NoiseSpec, m2: f64) -> f64 {
    let g = spec.grid;
    let rho = spec.symbol();
    (0..g.len()).map(|i| rho[i] * rho[i] / (2.0 * lambda(g.k2(i), m2))).sum()
}

pub fn renorm_constants(spec: &NoiseSpec, m2: f64, opts: &RenormOptions) -> Result<RenormConstants> {
    if !(m2 > 0.0) {
        return Err(Error::InvalidArgument(format!("m2 must be positive (got {m2})")));
    }
    let c1 = c1(spec, m2);
    let (c2, c2_stderr) = if spec.grid.d() == 3 {
        c2_monte_carlo(spec, m2, opts.c2_samples, opts.seed)?
    } else {
        (0.0, 0.0)
    };
    Ok(RenormConstants { c1, c2, c2_stderr, d: spec.grid.d(), n: spec.grid.n(), kappa: spec.kappa, m2 })
}

/// Mean and standard error of the C2 estimator over `samples` draws.
pub fn c2_monte_carlo(spec: &NoiseSpec, m2: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let g = spec.grid;
    let rho = spec.symbol();
    let lam: Vec<f64> = (0..g.len()).map(|i| lambda(g.k2(i), m2)).collect();
    let stat_sd: Vec<f64> = (0..g.len()).map(|i| rho[i] / (2.0 * lam[i]).sqrt()).collect();
    let wick = c1(spec, m2);
    let mut dealias = Dealiaser::new(g);
    let pad = g.with_n(dealias.padded_n())?;
    let lam_q: Vec<f64> = (0..pad.len()).map(|q| lambda(pad.k2(q), m2)).collect();
    let rate = Exp::new(m2).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let base = NoiseSpec { seed, ..*spec };
    let mut rng = base.rng();
    let mut g0 = vec![ZERO; g.len()];
    let mut g1 = vec![ZERO; g.len()];
    let (mut sum, mut sum2) = (0.0, 0.0);
    for s in 0..samples {
        unit_modes(g, &mut rng, 3 * s as u64, &mut g0);
        unit_modes(g, &mut rng, 3 * s as u64 + 1, &mut g1);
        rng.set_word_pos(((3 * s as u128) + 2) << 36);
        let t: f64 = rng.sample(rate);
        let z0: Vec<C64> = g0.iter().zip(&stat_sd).map(|(a, b)| a * b).collect();
        let z1: Vec<C64> = (0..g.len())
            .map(|i| {
                let e = (-lam[i] * t).exp();
                z0[i] * e + g1[i] * (stat_sd[i] * (1.0 - e * e).sqrt())
            })
            .collect();
        let (_, mut w0) = dealias.padded_spectrum(&z0, |x| x * x);
        let (_, mut w1) = dealias.padded_spectrum(&z1, |x| x * x);
        w0[0] -= wick;
        w1[0] -= wick;
        let pairing: f64 = (0..pad.len())
            .map(|q| (-(lam_q[q] - m2) * t).exp() * (w0[q] * w1[q].conj()).re)
            .sum();
        // density of t is m² e^{−m² t}
        let x = pairing / m2;
        sum += x;
        sum2 += x * x;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
