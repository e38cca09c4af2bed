//! Linear endpoint map 𝓛_T, its adjoint and pseudo-inverse, nonlinear exact
//! controllability, certificates and the lower-bound control construction.
//!
//! Controls are piecewise constant on the solver grid, so 𝓛_T is the exact
//! Duhamel integral of a step function:
//! (𝓛_T h)^(k) = Σ_j e^{−(T−s_{j+1})λ_k} (1 − e^{−λ_k Δt})/λ_k · ĥ_j(k).
//! Its adjoint with respect to Σ_j Δt⟨·,·⟩ multiplies ψ̂(k) by the step averages
//! of e^{−(T−s)λ_k}, and the pseudo-inverse divides by the matching discrete
//! Gramian, so 𝓛_T 𝓛⁺_T = I holds to rounding.

pub mod certificate;
pub mod gmres;
pub mod lower_bound;
pub mod nonlinear;
pub mod sublevel;

pub use certificate::{quasipotential_certificate, Certificate, CertificateSummary};
pub use lower_bound::{lower_bound_control, sample_start, LowerBoundControl, LowerBoundOptions};
pub use nonlinear::{nonlinear_control_to, ControlMethod, ControlOptions};
pub use sublevel::{sublevel_distance, sublevel_distance_with, SublevelDistance, SublevelOptions};

use crate::error::{Error, Result};
use crate::field::{Field, GridSpec, C64, ZERO};
use crate::path::{step_count, Control};
use crate::semigroup::phi1;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct LinearEndpointSymbol {
    grid: GridSpec,
    m2: f64,
    horizon: f64,
    dt: f64,
    steps: usize,
    lambda: Vec<f64>,
    decay: Vec<f64>,
    /// Step average of e^{−(s_{j+1}−s)λ} over one step: φ₁(−λΔt).
    avg: Vec<f64>,
    gramian: Vec<f64>,
    gramian_discrete: Vec<f64>,
}

impl LinearEndpointSymbol {
    pub fn new(grid: GridSpec, m2: f64, horizon: f64, dt: f64) -> Result<Self> {
        if !(m2 > 0.0) {
            return Err(Error::InvalidArgument(format!("m2 must be positive (got {m2})")));
        }
        let steps = step_count(horizon, dt)?;
        if steps == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let n = grid.len();
        let (mut lambda, mut decay, mut avg) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let (mut gramian, mut gramian_discrete) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let lam = 4.0 * PI * PI * grid.k2(i) as f64 + m2;
            let x = lam * dt;
            let a = phi1(-x);
            lambda.push(lam);
            decay.push((-x).exp());
            avg.push(a);
            gramian.push(-(-2.0 * horizon * lam).exp_m1() / (2.0 * lam));
            // Σ_{i<N} e^{−2ix} = (1 − e^{−2Nx})/(1 − e^{−2x})
            let geo = if x > 0.0 {
                (-2.0 * steps as f64 * x).exp_m1() / (-2.0 * x).exp_m1()
            } else {
                steps as f64
            };
            gramian_discrete.push(dt * a * a * geo);
        }
        Ok(LinearEndpointSymbol { grid, m2, horizon, dt, steps, lambda, decay, avg, gramian, gramian_discrete })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Continuum Gramian γ_k = (1 − e^{−2Tλ_k})/(2λ_k).
    pub fn gramian(&self) -> &[f64] {
        &self.gramian
    }

    /// Gramian of the piecewise-constant discretization.
    pub fn gramian_discrete(&self) -> &[f64] {
        &self.gramian_discrete
    }

    /// Step-average gain of frame j on mode i.
    fn gain(&self, i: usize, j: usize) -> f64 {
        self.avg[i] * (-((self.steps - 1 - j) as f64) * self.lambda[i] * self.dt).exp()
    }

    fn check_control(&self, h: &Control) -> Result<()> {
        if h.grid() != self.grid {
            return Err(Error::GridMismatch(self.grid.to_string(), h.grid().to_string()));
        }
        if h.steps() != self.steps || (h.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::InvalidArgument(format!(
                "control has {} steps of {}, expected {} of {}",
                h.steps(),
                h.dt(),
                self.steps,
                self.dt
            )));
        }
        Ok(())
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch(self.grid.to_string(), f.grid().to_string()));
        }
        Ok(())
    }

    /// Build a control whose frame j has coefficients gain(i, j)·c[i]; the
    /// trailing frame carries c itself (the gain at s = T).
    fn modulated(&self, c: &[C64]) -> Control {
        let mut frames = Vec::with_capacity(self.steps + 1);
        for j in 0..self.steps {
            let f: Vec<C64> = c.iter().enumerate().map(|(i, v)| v * self.gain(i, j)).collect();
            frames.push(Field::spectral_unchecked(self.grid, f));
        }
        frames.push(Field::spectral_unchecked(self.grid, c.to_vec()));
        Control::new(0.0, self.dt, frames).expect("non-empty")
    }
}

pub fn linear_endpoint(sym: &LinearEndpointSymbol, h: &Control) -> Result<Field> {
    sym.check_control(h)?;
    let mut acc = vec![ZERO; sym.grid.len()];
    for j in 0..sym.steps {
        let hj = h.frames()[j].coeffs();
        for i in 0..acc.len() {
            acc[i] = acc[i] * sym.decay[i] + hj[i] * (sym.dt * sym.avg[i]);
        }
    }
    Ok(Field::spectral_unchecked(sym.grid, acc))
}

pub fn linear_adjoint(sym: &LinearEndpointSymbol, psi: &Field) -> Result<Control> {
    sym.check_field(psi)?;
    Ok(sym.modulated(psi.coeffs()))
}

/// Minimum-norm control steering 0 to φ; zero maps to the zero control.
pub fn linear_pseudoinverse(sym: &LinearEndpointSymbol, phi: &Field) -> Result<Control> {
    sym.check_field(phi)?;
    let c: Vec<C64> = phi
        .coeffs()
        .iter()
        .zip(&sym.gramian_discrete)
        .map(|(v, g)| v / g)
        .collect();
    Ok(sym.modulated(&c))
}

/// ‖𝓛⁺_T φ‖_{L²L²} of the time-continuous operator: (Σ_k |φ̂(k)|²/γ_k)^{1/2}.
pub fn pseudoinverse_norm_continuum(sym: &LinearEndpointSymbol, phi: &Field) -> f64 {
    phi.coeffs()
        .iter()
        .zip(&sym.gramian)
        .map(|(v, g)| v.norm_sqr() / g)
        .sum::<f64>()
        .sqrt()
}

/// ‖𝓛*_T ψ‖_{L²L²} of the time-continuous operator: (Σ_k γ_k|ψ̂(k)|²)^{1/2}.
pub fn adjoint_norm_continuum(sym: &LinearEndpointSymbol, psi: &Field) -> f64 {
    psi.coeffs()
        .iter()
        .zip(&sym.gramian)
        .map(|(v, g)| v.norm_sqr() * g)
        .sum::<f64>()
        .sqrt()
}
