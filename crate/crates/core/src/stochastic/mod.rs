//! Galerkin-truncated Langevin dynamics
//!
//!   ∂ₜu − Δu = −u³ − (m² − 3ε²C1 + 9ε⁴C2)u + εξ_κ,
//!
//! stepped by exponential Euler with the exact per-mode OU noise increment.

pub mod cdfi;
pub mod noise;
pub mod renorm;

pub use cdfi::{cdfi_check, default_ic, CdfiOptions, CdfiReport};
pub use noise::{noise_increment, NoiseSpec};
pub use renorm::{c1, c2_monte_carlo, renorm_constants, RenormConstants, RenormOptions};

use crate::action::action;
use crate::error::{Error, Result};
use crate::field::dealias::Dealiaser;
use crate::field::norm::lp_of_values;
use crate::field::{Field, GridSpec, C64, ZERO};
use crate::params::ModelParams;
use crate::semigroup::phi1;
use crate::skeleton::stepper::all_finite;
use noise::unit_modes;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Exponential Euler stepper for one noise stream.
pub struct SpdeStepper {
    grid: GridSpec,
    dt: f64,
    mass: f64,
    lam: Vec<f64>,
    decay: Vec<f64>,
    b1: Vec<f64>,
    /// ε ρ̂_κ(k) √((1 − e^{−2λ̃dt})/(2λ̃)) per mode.
    noise_sd: Vec<f64>,
    cubic: bool,
    dealias: Dealiaser,
    rng: ChaCha8Rng,
    unit: Vec<C64>,
    nl: Vec<C64>,
}

impl SpdeStepper {
    /// `mass` is the (possibly renormalized, possibly negative) linear coefficient.
    pub fn with_mass(spec: &NoiseSpec, dt: f64, mass: f64, eps: f64, cubic: bool) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive (got {dt})")));
        }
        let g = spec.grid;
        let rho = spec.symbol();
        let n = g.len();
        let lam: Vec<f64> = (0..n).map(|i| 4.0 * PI * PI * g.k2(i) as f64 + mass).collect();
        let (mut decay, mut b1, mut noise_sd) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for &l in &lam {
            let z = -l * dt;
            decay.push(z.exp());
            b1.push(dt * phi1(z));
            noise_sd.push(eps * rho[decay.len() - 1] * (dt * phi1(2.0 * z)).sqrt());
        }
        Ok(SpdeStepper {
            grid: g,
            dt,
            mass,
            lam,
            decay,
            b1,
            noise_sd,
            cubic,
            dealias: Dealiaser::new(g),
            rng: spec.rng(),
            unit: vec![ZERO; n],
            nl: vec![ZERO; n],
        })
    }

    pub fn new(spec: &NoiseSpec, dt: f64, params: &ModelParams, constants: &RenormConstants) -> Result<Self> {
        Self::with_mass(spec, dt, constants.mass(params.m2, params.eps), params.eps, true)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Switches to another noise stream of the same seed.
    pub(crate) fn set_stream(&mut self, stream: u64) {
        self.rng.set_stream(stream);
    }

    /// The linear coefficient in use.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// One step from `u` using the noise of step `index`.
    pub fn step(&mut self, u: &[C64], index: u64, out: &mut [C64]) -> Result<()> {
        if self.cubic {
            self.dealias.cube(u, &mut self.nl);
        }
        unit_modes(self.grid, &mut self.rng, index, &mut self.unit);
        for i in 0..out.len() {
            let cube = if self.cubic { self.nl[i] } else { ZERO };
            out[i] = u[i] * self.decay[i] - cube * self.b1[i] + self.unit[i] * self.noise_sd[i];
        }
        if !all_finite(out) {
            return Err(Error::Blowup { t: (index + 1) as f64 * self.dt });
        }
        Ok(())
    }
}

impl SpdeStepper {
    /// Like [`step`](Self::step), but the drift is advanced by exponential
    /// Euler substeps h with h · 3 max|u|² ≤ `stiffness` before the noise of
    /// the step is added. With a single substep this is exactly `step`.
    pub(crate) fn step_substepped(&mut self, u: &[C64], index: u64, stiffness: f64, out: &mut [C64]) -> Result<()> {
        out.copy_from_slice(u);
        let mut left = self.dt;
        while left > 0.0 {
            let sup = if self.cubic {
                self.dealias.padded_values(out).iter().fold(0.0, |m: f64, x| m.max(x.abs()))
            } else {
                0.0
            };
            let h_max = if sup > 0.0 { stiffness / (3.0 * sup * sup) } else { f64::INFINITY };
            let h = if h_max >= left { left } else { h_max.max(left * 1e-12) };
            let whole = h == left;
            if self.cubic {
                self.dealias.cube(out, &mut self.nl);
            }
            for i in 0..out.len() {
                let cube = if self.cubic { self.nl[i] } else { ZERO };
                let (e, b) = if whole && left == self.dt {
                    (self.decay[i], self.b1[i])
                } else {
                    let z = -self.lam[i] * h;
                    (z.exp(), h * phi1(z))
                };
                out[i] = out[i] * e - cube * b;
            }
            left = if whole { 0.0 } else { left - h };
        }
        unit_modes(self.grid, &mut self.rng, index, &mut self.unit);
        for i in 0..out.len() {
            out[i] += self.unit[i] * self.noise_sd[i];
        }
        if !all_finite(out) {
            return Err(Error::Blowup { t: (index + 1) as f64 * self.dt });
        }
        Ok(())
    }
}

pub fn step_spde(
    state: &Field,
    dt: f64,
    params: &ModelParams,
    spec: &NoiseSpec,
    constants: &RenormConstants,
    index: u64,
) -> Result<Field> {
    let mut st = SpdeStepper::new(spec, dt, params, constants)?;
    let mut out = vec![ZERO; state.grid().len()];
    st.step(state.coeffs(), index, &mut out)?;
    Ok(Field::spectral_unchecked(state.grid(), out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    pub dt: f64,
    /// Burn-in time before the first sample.
    pub burn_in: f64,
    pub n_samples: usize,
    /// Steps between retained samples.
    pub thinning: usize,
    /// Independent chains (streams); samples are split evenly and concatenated
    /// in chain order, so the output does not depend on the worker count.
    pub chains: usize,
    pub renormalize: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions { dt: 5e-3, burn_in: 5.0, n_samples: 1000, thinning: 20, chains: 8, renormalize: false }
    }
}

impl SamplerOptions {
    fn burn_steps(&self) -> usize {
        (self.burn_in / self.dt).round() as usize
    }

    fn per_chain(&self, c: usize) -> usize {
        let base = self.n_samples / self.chains;
        base + usize::from(c < self.n_samples % self.chains)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.burn_in >= 0.0 && self.thinning >= 1 && self.chains >= 1) {
            return Err(Error::InvalidArgument(
                "sampler needs dt > 0, burn_in >= 0, thinning >= 1, chains >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn chain_mass(params: &ModelParams, opts: &SamplerOptions, constants: &RenormConstants) -> f64 {
    if opts.renormalize {
        constants.mass(params.m2, params.eps)
    } else {
        params.m2
    }
}

/// Runs every chain from 0 and maps each retained sample through `f`. Chain c
/// uses stream `spec.stream + c`.
pub fn sample_invariant_map<T: Send>(
    params: &ModelParams,
    spec: &NoiseSpec,
    constants: &RenormConstants,
    opts: &SamplerOptions,
    f: impl Fn(&Field) -> T + Sync,
) -> Result<Vec<T>> {
    opts.validate()?;
    let mass = chain_mass(params, opts, constants);
    let g = spec.grid;
    let chains: Vec<Vec<T>> = (0..opts.chains)
        .into_par_iter()
        .map(|c| -> Result<Vec<T>> {
            let stream_spec = spec.with_stream(spec.stream.wrapping_add(c as u64));
            let mut st = SpdeStepper::with_mass(&stream_spec, opts.dt, mass, params.eps, true)?;
            let want = opts.per_chain(c);
            let mut out = Vec::with_capacity(want);
            let mut u = vec![ZERO; g.len()];
            let mut next = vec![ZERO; g.len()];
            let mut index = 0u64;
            let total = opts.burn_steps() + want * opts.thinning;
            for s in 1..=total {
                st.step(&u, index, &mut next)?;
                index += 1;
                std::mem::swap(&mut u, &mut next);
                if s > opts.burn_steps() && (s - opts.burn_steps()) % opts.thinning == 0 {
                    out.push(f(&Field::spectral_unchecked(g, u.clone())));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chains.into_iter().flatten().collect())
}

pub fn sample_invariant(
    params: &ModelParams,
    spec: &NoiseSpec,
    constants: &RenormConstants,
    opts: &SamplerOptions,
) -> Result<Vec<Field>> {
    sample_invariant_map(params, spec, constants, opts, |f| f.clone())
}

/// One NDJSON record per snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStats {
    pub t: f64,
    pub l2: f64,
    pub l4: f64,
    pub action: f64,
    pub zero_mode: f64,
}

impl SnapshotStats {
    pub fn of(t: f64, u: &Field, params: &ModelParams) -> Self {
        SnapshotStats {
            t,
            l2: u.l2_norm(),
            l4: lp_of_values(u.values(), 4.0),
            action: action(u, params),
            zero_mode: u.coeffs()[0].re,
        }
    }
}

pub fn write_ndjson<W: Write>(w: &mut W, records: &[SnapshotStats]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_substep_is_a_plain_step() {
        let g = GridSpec::new(1, 16).unwrap();
        let spec = NoiseSpec::new(g, 0.0, 5, 0).unwrap();
        let u = Field::cosine(g, &[2], 0.3);
        let mut a = SpdeStepper::with_mass(&spec, 1e-3, 1.0, 0.5, true).unwrap();
        let mut b = SpdeStepper::with_mass(&spec, 1e-3, 1.0, 0.5, true).unwrap();
        let mut x = vec![ZERO; g.len()];
        let mut y = vec![ZERO; g.len()];
        a.step(u.coeffs(), 3, &mut x).unwrap();
        b.step_substepped(u.coeffs(), 3, 0.5, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn substeps_tame_huge_data() {
        let g = GridSpec::new(1, 16).unwrap();
        let spec = NoiseSpec::new(g, 0.0, 5, 0).unwrap();
        let u = Field::constant(g, 1e4);
        let mut st = SpdeStepper::with_mass(&spec, 1e-2, 1.0, 0.0, true).unwrap();
        let mut out = vec![ZERO; g.len()];
        st.step_substepped(u.coeffs(), 0, 0.1, &mut out).unwrap();
        // u' = −u³ − u from 10⁴: close to 1/√(2t) after t = 0.01
        let want = 1.0 / (2.0f64 * 1e-2).sqrt();
        assert!((out[0].re - want).abs() < 0.05 * want, "{}", out[0].re);
    }
}
