//! Tails of the invariant measure: μ̂_ε(𝒮 > θ) and its exponential rate in θ.
//!
//! The finite-ε prefactor of μ_ε(𝒮 > θ) is a power of ε whose θ-dependence
//! does not change with ε, so the rate is read off from differences across ε
//! at fixed θ: ln μ̂ = −R(θ)/ε² + b(θ) fitted over the ensembles, then R is
//! regressed on θ.

use super::fit::{weighted_line, RatePoint};
use crate::action::action;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stochastic::{sample_invariant_map, NoiseSpec, RenormConstants, SamplerOptions};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TailOptions {
    /// At least two distinct intensities.
    pub eps_values: Vec<f64>,
    pub sampler: SamplerOptions,
    /// θ enters the slope fit only if every ensemble has this many exceedances.
    pub min_count: u64,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            eps_values: vec![0.45, 0.35],
            sampler: SamplerOptions { n_samples: 1_000_000, thinning: 10, ..SamplerOptions::default() },
            min_count: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub epsilon: f64,
    pub theta: f64,
    pub n_samples: u64,
    pub count: u64,
    pub mu_hat: f64,
    /// −ε² ln μ̂
    pub rate_point: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub rows: Vec<TailRow>,
    /// (θ, R(θ)) for every θ usable in all ensembles.
    pub difference_rates: Vec<(f64, f64)>,
    /// Slope of R(θ) against θ; the rate 2𝒮 predicts 2.
    pub slope: Option<f64>,
    /// Slope of −ε² ln μ̂ against θ within each ensemble, prefactor included.
    pub per_eps_slopes: Vec<(f64, Option<f64>)>,
}

/// Exceedance counts of precomputed action values; `actions[e]` belongs to `eps_values[e]`.
pub fn tail_table(eps_values: &[f64], actions: &[Vec<f64>], theta_grid: &[f64], min_count: u64) -> Result<TailTable> {
    if eps_values.len() != actions.len() {
        return Err(Error::InvalidArgument("one action ensemble per epsilon".into()));
    }
    let mut rows = Vec::new();
    for (&eps, s) in eps_values.iter().zip(actions) {
        let n = s.len() as u64;
        if n == 0 {
            return Err(Error::InsufficientData(format!("empty ensemble at epsilon {eps}")));
        }
        for &theta in theta_grid {
            let count = s.iter().filter(|&&x| x > theta).count() as u64;
            let mu_hat = count as f64 / n as f64;
            rows.push(TailRow { epsilon: eps, theta, n_samples: n, count, mu_hat, rate_point: -eps * eps * mu_hat.ln() });
        }
    }
    let at = |e: usize, t: usize| &rows[e * theta_grid.len() + t];
    let mut difference_rates = Vec::new();
    let mut rate_weights = Vec::new();
    for t in 0..theta_grid.len() {
        let pts: Vec<RatePoint> =
            (0..eps_values.len()).map(|e| RatePoint::from_counts(eps_values[e], at(e, t).count, at(e, t).n_samples)).collect();
        if (0..eps_values.len()).any(|e| at(e, t).count < min_count.max(1)) {
            continue;
        }
        let x: Vec<f64> = pts.iter().map(|p| 1.0 / (p.epsilon * p.epsilon)).collect();
        let y: Vec<f64> = pts.iter().map(|p| -p.p_hat.ln()).collect();
        let w: Vec<f64> = pts.iter().map(|p| p.weight).collect();
        if let Some((r, _)) = weighted_line(&x, &y, &w) {
            let mx = x.iter().sum::<f64>() / x.len() as f64;
            let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
            let var = w.iter().map(|a| 1.0 / a).sum::<f64>() / sxx;
            difference_rates.push((theta_grid[t], r));
            rate_weights.push(1.0 / var);
        }
    }
    let slope = {
        let x: Vec<f64> = difference_rates.iter().map(|p| p.0).collect();
        let y: Vec<f64> = difference_rates.iter().map(|p| p.1).collect();
        weighted_line(&x, &y, &rate_weights).map(|(s, _)| s)
    };
    let per_eps_slopes = (0..eps_values.len())
        .map(|e| {
            let used: Vec<&TailRow> =
                (0..theta_grid.len()).map(|t| at(e, t)).filter(|r| r.count >= min_count.max(1)).collect();
            let x: Vec<f64> = used.iter().map(|r| r.theta).collect();
            let y: Vec<f64> = used.iter().map(|r| r.rate_point).collect();
            let w: Vec<f64> = used.iter().map(|r| r.count as f64 / (r.epsilon.powi(4) * (1.0 - r.mu_hat).max(1e-300))).collect();
            (eps_values[e], weighted_line(&x, &y, &w).map(|(s, _)| s))
        })
        .collect();
    Ok(TailTable { rows, difference_rates, slope, per_eps_slopes })
}

/// Samples the invariant measure at every ε of `opts` (intensity of `params`
/// is overridden) and tabulates μ̂_ε(𝒮 > θ).
pub fn invariant_tail_experiment(
    params: &ModelParams,
    spec: &NoiseSpec,
    constants: &RenormConstants,
    theta_grid: &[f64],
    opts: &TailOptions,
) -> Result<TailTable> {
    if opts.eps_values.len() < 2 {
        return Err(Error::InsufficientData("tails need ensembles for at least 2 epsilons".into()));
    }
    let mut actions = Vec::with_capacity(opts.eps_values.len());
    for &eps in &opts.eps_values {
        let p = ModelParams { eps, ..*params };
        actions.push(sample_invariant_map(&p, spec, constants, &opts.sampler, |f| action(f, &p))?);
    }
    tail_table(&opts.eps_values, &actions, theta_grid, opts.min_count)
}

/// CSV with columns epsilon, theta, mu_hat, rate_point.
pub fn write_tail_csv<W: Write>(w: &mut W, rows: &[TailRow]) -> Result<()> {
    writeln!(w, "epsilon,theta,mu_hat,rate_point")?;
    for r in rows {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", r.epsilon, r.theta, r.mu_hat, r.rate_point)?;
    }
    Ok(())
}
