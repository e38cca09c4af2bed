//! 𝒞^α distance from a field to the sublevel set {𝒮 ≤ θ}.
//!
//! The feasible set is star-shaped around 0 (𝒮(tφ) is increasing in t ≥ 0), so
//! any φ can be pulled back to the boundary along the ray through it. The search
//! starts from the radial retraction of z and then descends a softmax-smoothed
//! version of the 𝒞^α distance, retracting after every step and keeping the
//! best point measured in the exact norm.

use crate::action::action;
use crate::error::{Error, Result};
use crate::field::dealias::Dealiaser;
use crate::field::{BesovEvaluator, Field, NormSpec, C64, ZERO};
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SublevelOptions {
    pub max_iter: usize,
    /// Relative improvement below which the smoothing is tightened.
    pub rel_tol: f64,
}

impl Default for SublevelOptions {
    fn default() -> Self {
        SublevelOptions { max_iter: 400, rel_tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct SublevelDistance {
    pub distance: f64,
    /// The closest feasible point found.
    pub minimizer: Field,
    pub iterations: usize,
    /// True when the iteration budget ran out before the smoothing reached
    /// its final level; `distance` is then the best value seen.
    pub stalled: bool,
}

/// 𝒮(φ) = a + b with a the quadratic part and b the quartic part.
fn split_action(dealias: &mut Dealiaser, phi: &Field, m2: f64) -> (f64, f64) {
    let g = phi.grid();
    let a: f64 = phi
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| 0.5 * (4.0 * PI * PI * g.k2(i) as f64 + m2) * c.norm_sqr())
        .sum();
    let b = 0.25 * dealias.mean_of(phi.coeffs(), |x| x * x * x * x);
    (a, b)
}

/// Largest t ∈ [0, 1] with 𝒮(tφ) ≤ θ; 𝒮(tφ) = a t² + b t⁴.
fn retraction_factor(a: f64, b: f64, theta: f64) -> f64 {
    if a + b <= theta {
        return 1.0;
    }
    let t2 = if b > 0.0 {
        (2.0 * theta) / (a + (a * a + 4.0 * b * theta).sqrt())
    } else {
        theta / a
    };
    t2.sqrt().min(1.0)
}

struct Objective {
    hoelder: BesovEvaluator,
    /// (weight 2^{jα}, indices of block j)
    blocks: Vec<(f64, Vec<usize>)>,
    grid: crate::field::GridSpec,
}

impl Objective {
    fn exact(&mut self, e: &[C64]) -> f64 {
        self.hoelder.eval(e)
    }

    /// Descent direction for the log-sum-exp smoothing at temperature τ of
    /// max_{j,x} ±2^{jα}Δ_j e(x), as coefficients.
    fn direction(&self, e: &[C64], tau: f64) -> Vec<C64> {
        let g = self.grid;
        let mut parts: Vec<(f64, Vec<f64>)> = Vec::with_capacity(self.blocks.len());
        let mut top = f64::NEG_INFINITY;
        for (w, idx) in &self.blocks {
            let mut c = vec![ZERO; g.len()];
            for &i in idx {
                c[i] = e[i];
            }
            let v: Vec<f64> = Field::spectral_unchecked(g, c).values().iter().map(|x| w * x).collect();
            top = v.iter().fold(top, |m, x| m.max(x.abs()));
            parts.push((*w, v));
        }
        let mut z = 0.0;
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(parts.len());
        for (w, v) in &parts {
            let gr: Vec<f64> = v
                .iter()
                .map(|x| {
                    let p = ((x - top) / tau).exp();
                    let q = ((-x - top) / tau).exp();
                    z += p + q;
                    w * (p - q)
                })
                .collect();
            grads.push(gr);
        }
        let mut out = vec![ZERO; g.len()];
        for ((_, idx), gr) in self.blocks.iter().zip(grads) {
            let f = Field::from_values(g, gr).expect("grid length");
            let c = f.coeffs();
            for &i in idx {
                out[i] -= c[i] / z;
            }
        }
        out
    }
}

pub fn sublevel_distance(z: &Field, theta: f64, params: &ModelParams) -> Result<SublevelDistance> {
    sublevel_distance_with(z, theta, params, &SublevelOptions::default())
}

pub fn sublevel_distance_with(
    z: &Field,
    theta: f64,
    params: &ModelParams,
    opts: &SublevelOptions,
) -> Result<SublevelDistance> {
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be positive (got {theta})")));
    }
    let grid = z.grid();
    if action(z, params) <= theta {
        return Ok(SublevelDistance { distance: 0.0, minimizer: z.clone(), iterations: 0, stalled: false });
    }
    let mut dealias = Dealiaser::new(grid);
    let retract = |dealias: &mut Dealiaser, phi: Field| {
        let (a, b) = split_action(dealias, &phi, params.m2);
        let t = retraction_factor(a, b, theta);
        phi.scale(t)
    };
    let hoelder = BesovEvaluator::hoelder(grid, params.alpha);
    let mut blocks = Vec::new();
    for j in -1..=40 {
        let idx = hoelder.block_indices(j).to_vec();
        if !idx.is_empty() {
            blocks.push((2f64.powf(j as f64 * params.alpha), idx));
        }
    }
    let mut obj = Objective { hoelder, blocks, grid };

    let mut best = retract(&mut dealias, z.clone());
    let mut best_d = obj.exact(z.sub(&best).coeffs());
    let mut best_h1 = best.norm(NormSpec::Sobolev(1.0))?;

    let mut tau = 0.05 * best_d;
    let tau_min = 1e-6 * best_d;
    let mut step = 0.5 * best_d;
    let mut it = 0;
    while it < opts.max_iter && tau > tau_min && best_d > 0.0 {
        it += 1;
        let e = z.sub(&best);
        let dir = obj.direction(e.coeffs(), tau);
        let dn = obj.exact(&dir);
        if dn == 0.0 {
            break;
        }
        let mut improved = false;
        let mut s = step / dn;
        for _ in 0..20 {
            let trial_e: Vec<C64> = e.coeffs().iter().zip(&dir).map(|(a, b)| a + b * s).collect();
            let phi = z.sub(&Field::spectral_unchecked(grid, trial_e));
            let phi = retract(&mut dealias, phi);
            let d = obj.exact(z.sub(&phi).coeffs());
            let h1 = phi.norm(NormSpec::Sobolev(1.0))?;
            let tie = (d - best_d).abs() <= 1e-14 * best_d;
            if d < best_d * (1.0 - opts.rel_tol) || (tie && h1 < best_h1) {
                best = phi;
                best_d = d;
                best_h1 = h1;
                step = (2.0 * s * dn).min(best_d);
                improved = true;
                break;
            }
            s *= 0.5;
        }
        if !improved {
            tau *= 0.5;
            step = 0.5 * best_d;
        }
    }
    Ok(SublevelDistance { distance: best_d, minimizer: best, iterations: it, stalled: tau > tau_min && best_d > 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retraction_hits_the_level() {
        let (a, b, th) = (2.0, 3.0, 1.0);
        let t = retraction_factor(a, b, th);
        assert!((a * t * t + b * t.powi(4) - th).abs() < 1e-14);
        assert_eq!(retraction_factor(0.1, 0.1, 1.0), 1.0);
    }
}
