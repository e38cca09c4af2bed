//! Controls that bring every start in a 𝒞^α ball close to a target, with a
//! budget of 𝒱(z) + γ/2.
//!
//! The control is zero for a waiting time T₀ (the free flow shrinks the start
//! towards 0) and then replays a certificate h̄ for z. T₀ is found by doubling
//! until a seeded Monte Carlo sample of starts all land within δ/2 of z.

use super::certificate::{quasipotential_certificate, Certificate};
use super::nonlinear::ControlOptions;
use crate::action::action;
use crate::error::{Error, Result};
use crate::field::sample::{band_limited, normalized, SpectrumShape};
use crate::field::{BesovEvaluator, Field, NormSpec};
use crate::params::ModelParams;
use crate::path::Control;
use crate::skeleton::{SkeletonSolver, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowerBoundOptions {
    /// Number of sampled starts y.
    pub samples: usize,
    pub seed: u64,
    /// Horizon T̄ and local segment of the certificate.
    pub t_bar: f64,
    pub eps_seg: f64,
    pub dt: f64,
    /// First nonzero waiting time; T₀ = 0 is always tried first.
    pub t0_start: f64,
    pub t0_cap: f64,
    pub control: ControlOptions,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        LowerBoundOptions {
            samples: 50,
            seed: 0,
            t_bar: 8.0,
            eps_seg: 0.05,
            dt: 1e-3,
            t0_start: 0.25,
            t0_cap: 64.0,
            control: ControlOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LowerBoundControl {
    /// h₀ on [0, T₀ + T̄].
    pub control: Control,
    pub t0: f64,
    pub t_bar: f64,
    pub certificate: Certificate,
    /// 𝒞^α endpoint error for each sampled start at the accepted T₀.
    pub endpoint_errors: Vec<f64>,
}

impl LowerBoundControl {
    pub fn horizon(&self) -> f64 {
        self.t0 + self.t_bar
    }

    pub fn worst_error(&self) -> f64 {
        self.endpoint_errors.iter().fold(0.0, |m, e| m.max(*e))
    }
}

/// Start number `i` of the sample: a rough band-limited field with 𝒞^α norm
/// ρ·U^{1/4}, so most of the mass sits near the sphere of radius ρ.
pub fn sample_start(z: &Field, rho: f64, alpha: f64, seed: u64, i: usize) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    let y = band_limited(z.grid(), SpectrumShape::Rough { alpha }, &mut rng);
    let u: f64 = rng.random();
    normalized(&y, NormSpec::Hoelder(alpha), rho * u.powf(0.25))
}

pub fn lower_bound_control(
    z: &Field,
    rho: f64,
    delta: f64,
    gamma: f64,
    params: &ModelParams,
    opts: &LowerBoundOptions,
) -> Result<LowerBoundControl> {
    if !(rho >= 0.0 && delta > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need rho >= 0, delta > 0, gamma > 0 (got {rho}, {delta}, {gamma})"
        )));
    }
    let cert = quasipotential_certificate(z, opts.eps_seg, opts.t_bar, opts.dt, params, &opts.control)?;
    let budget = 2.0 * action(z, params) + gamma / 2.0;
    if cert.cost > budget {
        return Err(Error::BudgetExceeded { cost: cert.cost, budget });
    }
    let grid = z.grid();
    let alpha = params.alpha;
    let starts: Vec<Field> = (0..opts.samples)
        .map(|i| sample_start(z, rho, alpha, opts.seed, i))
        .collect();

    let mut t0 = 0.0;
    let mut worst = f64::INFINITY;
    while t0 <= opts.t0_cap {
        let h0 = cert.control.delayed(t0)?;
        let nsteps = h0.steps();
        let errors: Vec<f64> = starts
            .par_iter()
            .map(|y| -> Result<f64> {
                let mut solver = SkeletonSolver::new(grid, params, opts.dt, &SolverOptions { scheme: opts.control.scheme, ..Default::default() })?;
                let end = solver.endpoint(y, Some(&h0), nsteps)?;
                let mut hoelder = BesovEvaluator::hoelder(grid, alpha);
                Ok(hoelder.eval(end.sub(z).coeffs()))
            })
            .collect::<Result<_>>()?;
        worst = errors.iter().fold(0.0, |m: f64, e| m.max(*e));
        if worst <= delta / 2.0 {
            return Ok(LowerBoundControl {
                control: h0,
                t0,
                t_bar: opts.t_bar,
                certificate: cert,
                endpoint_errors: errors,
            });
        }
        t0 = if t0 == 0.0 { opts.t0_start } else { 2.0 * t0 };
    }
    Err(Error::HorizonExhausted { t0, worst })
}
