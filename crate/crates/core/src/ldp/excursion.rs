//! Excursion sets: paths that start in the closed 𝒞^α ball of radius ρ and
//! stay outside the λ-ball at every integer time 1, …, n̄.

use super::fit::weighted_line;
use crate::error::{Error, Result};
use crate::field::{BesovEvaluator, Field, ZERO};
use crate::params::ModelParams;
use crate::path::Path;
use crate::stochastic::{NoiseSpec, SpdeStepper};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionSpec {
    pub rho: f64,
    pub lambda: f64,
    pub n_bar: usize,
    /// Action level the excursion set is attached to; carried into reports.
    pub theta: f64,
    pub alpha: f64,
}

impl ExcursionSpec {
    pub fn new(rho: f64, lambda: f64, n_bar: usize, theta: f64, alpha: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if !(rho > 0.0) {
            bad.push(format!("rho must be positive (got {rho})"));
        }
        if !(lambda >= 0.0) {
            bad.push(format!("lambda must be >= 0 (got {lambda})"));
        }
        if n_bar < 1 {
            bad.push("n_bar must be >= 1".to_string());
        }
        if !(theta > 0.0) {
            bad.push(format!("theta must be positive (got {theta})"));
        }
        if bad.is_empty() {
            Ok(ExcursionSpec { rho, lambda, n_bar, theta, alpha })
        } else {
            Err(Error::InvalidArgument(bad.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionReport {
    pub n_paths: usize,
    /// Fraction of paths with ‖v(0)‖ ≤ ρ.
    pub start_fraction: f64,
    /// Fraction of all paths in the excursion set for horizon n, n = 1..=n̄.
    pub frequency: Vec<f64>,
    /// Among starters, fraction with ‖v(j)‖ ≥ λ at time j, j = 1..=n̄.
    pub hit_pattern: Vec<f64>,
    /// exp of the slope of ln frequency against n, if at least two are positive.
    pub geometric_ratio: Option<f64>,
    pub theta: f64,
}

impl ExcursionReport {
    /// Frequency at horizon n̄.
    pub fn final_frequency(&self) -> f64 {
        *self.frequency.last().expect("n_bar >= 1")
    }
}

/// Statistics of paths recorded at integer times (frame j at time j).
pub fn excursion_statistics(paths: &[Path], spec: &ExcursionSpec) -> Result<ExcursionReport> {
    if paths.is_empty() {
        return Err(Error::InsufficientData("no paths".into()));
    }
    let mut eval = BesovEvaluator::hoelder(paths[0].grid(), spec.alpha);
    let mut starters = 0usize;
    // survive[n-1]: starters outside B_λ at every time 1..=n
    let mut survive = vec![0usize; spec.n_bar];
    let mut outside = vec![0usize; spec.n_bar];
    for p in paths {
        if p.len() < spec.n_bar + 1 || (p.dt() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("paths must be recorded at integer times up to n_bar".into()));
        }
        if eval.eval(p.first().coeffs()) > spec.rho {
            continue;
        }
        starters += 1;
        let mut alive = true;
        for j in 1..=spec.n_bar {
            let far = eval.eval(p.frame(j).coeffs()) >= spec.lambda;
            if far {
                outside[j - 1] += 1;
            }
            alive &= far;
            if alive {
                survive[j - 1] += 1;
            }
        }
    }
    let n = paths.len() as f64;
    let frequency: Vec<f64> = survive.iter().map(|&c| c as f64 / n).collect();
    let hit_pattern = outside.iter().map(|&c| if starters > 0 { c as f64 / starters as f64 } else { 0.0 }).collect();
    let pos: Vec<(f64, f64)> =
        frequency.iter().enumerate().filter(|(_, f)| **f > 0.0).map(|(i, f)| ((i + 1) as f64, f.ln())).collect();
    let geometric_ratio = if pos.len() >= 2 {
        let x: Vec<f64> = pos.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pos.iter().map(|p| p.1).collect();
        weighted_line(&x, &y, &vec![1.0; x.len()]).map(|(s, _)| s.exp())
    } else {
        None
    };
    Ok(ExcursionReport {
        n_paths: paths.len(),
        start_fraction: starters as f64 / n,
        frequency,
        hit_pattern,
        geometric_ratio,
        theta: spec.theta,
    })
}

/// Langevin paths from each start, recorded at integer times 0..=n_bar.
/// Start i uses noise stream `noise.stream + i`.
pub fn excursion_ensemble(
    params: &ModelParams,
    noise: &NoiseSpec,
    starts: &[Field],
    n_bar: usize,
    dt: f64,
) -> Result<Vec<Path>> {
    let per_unit = (1.0 / dt).round() as usize;
    if per_unit == 0 || ((per_unit as f64) * dt - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("1/dt must be an integer (dt = {dt})")));
    }
    let g = noise.grid;
    starts
        .par_iter()
        .enumerate()
        .map(|(i, z)| -> Result<Path> {
            let spec = noise.with_stream(noise.stream.wrapping_add(i as u64));
            let mut st = SpdeStepper::with_mass(&spec, dt, params.m2, params.eps, true)?;
            let mut u = z.coeffs().to_vec();
            let mut next = vec![ZERO; g.len()];
            let mut frames = vec![z.clone()];
            let mut index = 0u64;
            for _ in 0..n_bar {
                for _ in 0..per_unit {
                    st.step(&u, index, &mut next)?;
                    index += 1;
                    std::mem::swap(&mut u, &mut next);
                }
                frames.push(Field::spectral_unchecked(g, u.clone()));
            }
            Path::new(0.0, 1.0, frames)
        })
        .collect()
}
