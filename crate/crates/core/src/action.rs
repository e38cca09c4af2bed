//! The action 𝒮(φ) = ½‖∇φ‖² + (m²/2)‖φ‖² + ¼‖φ‖⁴_{L⁴}, its gradient, gradient
//! flows, and the dynamic rate functional.

use crate::error::{Error, Result};
use crate::field::dealias::Dealiaser;
use crate::field::{Field, C64, ZERO};
use crate::params::ModelParams;
use crate::path::{step_count, Path};
use crate::skeleton::{SkeletonSolver, SolverOptions};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub fn action(phi: &Field, params: &ModelParams) -> f64 {
    let g = phi.grid();
    let c = phi.coeffs();
    let mut quad = 0.0;
    for (i, v) in c.iter().enumerate() {
        quad += (4.0 * PI * PI * g.k2(i) as f64 + params.m2) * v.norm_sqr();
    }
    let quartic = Dealiaser::new(g).mean_of(c, |x| x * x * x * x);
    0.5 * quad + 0.25 * quartic
}

/// D𝒮(φ) = −Δφ + m²φ + P(φ³).
pub fn action_gradient(phi: &Field, params: &ModelParams) -> Field {
    let mut d = Dealiaser::new(phi.grid());
    Field::spectral_unchecked(phi.grid(), gradient_coeffs(&mut d, phi.coeffs(), params.m2))
}

pub(crate) fn gradient_coeffs(d: &mut Dealiaser, c: &[C64], m2: f64) -> Vec<C64> {
    let g = d.grid();
    let mut out = vec![ZERO; c.len()];
    d.cube(c, &mut out);
    for (i, v) in out.iter_mut().enumerate() {
        *v += c[i] * (4.0 * PI * PI * g.k2(i) as f64 + m2);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    Down,
    Up,
}

/// Values beyond this in the up-flow count as blowup.
pub const OVERFLOW_GUARD: f64 = 1e8;

/// ∂ₜv = ∓D𝒮(v). Down uses the exponential integrator, up uses explicit RK4.
pub fn gradient_flow(
    phi: &Field,
    horizon: f64,
    dt: f64,
    direction: FlowDirection,
    params: &ModelParams,
) -> Result<Path> {
    let n = step_count(horizon, dt)?;
    match direction {
        FlowDirection::Down => {
            SkeletonSolver::new(phi.grid(), params, dt, &SolverOptions::default())?.path(phi, None, n)
        }
        FlowDirection::Up => {
            let g = phi.grid();
            let mut d = Dealiaser::new(g);
            let mut v = phi.coeffs().to_vec();
            let mut frames = vec![phi.clone()];
            let axpy = |a: &[C64], s: f64, b: &[C64]| -> Vec<C64> {
                a.iter().zip(b).map(|(x, y)| x + y * s).collect()
            };
            for j in 0..n {
                let k1 = gradient_coeffs(&mut d, &v, params.m2);
                let k2 = gradient_coeffs(&mut d, &axpy(&v, dt / 2.0, &k1), params.m2);
                let k3 = gradient_coeffs(&mut d, &axpy(&v, dt / 2.0, &k2), params.m2);
                let k4 = gradient_coeffs(&mut d, &axpy(&v, dt, &k3), params.m2);
                for i in 0..v.len() {
                    v[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
                }
                let big = v.iter().any(|c| !(c.norm() <= OVERFLOW_GUARD));
                if big {
                    return Err(Error::Blowup { t: (j + 1) as f64 * dt });
                }
                frames.push(Field::spectral_unchecked(g, v.clone()));
            }
            Path::new(0.0, dt, frames)
        }
    }
}

/// Centered differences inside, one-sided at the two ends.
fn time_derivative(v: &Path, j: usize) -> Field {
    let dt = v.dt();
    let n = v.steps();
    if j == 0 {
        v.frame(1).sub(v.frame(0)).scale(1.0 / dt)
    } else if j == n {
        v.frame(n).sub(v.frame(n - 1)).scale(1.0 / dt)
    } else {
        v.frame(j + 1).sub(v.frame(j - 1)).scale(0.5 / dt)
    }
}

/// h = ∂ₜv − Δv + v³ + m²v at every frame.
pub fn reconstruct_control(v: &Path, params: &ModelParams) -> Result<Path> {
    if v.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 frames".into()));
    }
    let mut d = Dealiaser::new(v.grid());
    let frames = (0..v.len())
        .map(|j| {
            let grad = gradient_coeffs(&mut d, v.frame(j).coeffs(), params.m2);
            let dv = time_derivative(v, j);
            let c = dv.coeffs().iter().zip(&grad).map(|(a, b)| a + b).collect();
            Field::spectral_unchecked(v.grid(), c)
        })
        .collect();
    Path::new(v.t0(), v.dt(), frames)
}

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    dt * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

/// ½∫‖∂ₜv − Δv + v³ + m²v‖² dt.
pub fn rate_functional(v: &Path, params: &ModelParams) -> Result<f64> {
    let h = reconstruct_control(v, params)?;
    let sq: Vec<f64> = h.frames().iter().map(|f| f.l2_norm().powi(2)).collect();
    Ok(0.5 * trapezoid(&sq, v.dt()))
}

/// |𝒮(v(T)) − 𝒮(v(0)) − ∫⟨D𝒮(v), ∂ₜv⟩ dt|.
pub fn chain_rule_check(v: &Path, params: &ModelParams) -> Result<f64> {
    if v.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 frames".into()));
    }
    let pairing: Vec<f64> = (0..v.len())
        .map(|j| action_gradient(v.frame(j), params).inner(&time_derivative(v, j)))
        .collect();
    let lhs = action(v.last(), params) - action(v.first(), params);
    Ok((lhs - trapezoid(&pairing, v.dt())).abs())
}

/// ∫‖D𝒮(v)‖² dt by the trapezoid rule.
pub fn gradient_energy(v: &Path, params: &ModelParams) -> f64 {
    let sq: Vec<f64> = v
        .frames()
        .iter()
        .map(|f| action_gradient(f, params).l2_norm().powi(2))
        .collect();
    trapezoid(&sq, v.dt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    #[test]
    fn constant_action_and_gradient() {
        let g = GridSpec::new(2, 8).unwrap();
        let p = ModelParams { m2: 1.7, ..Default::default() };
        let c = 0.9;
        let f = Field::constant(g, c);
        assert!((action(&f, &p) - (p.m2 * c * c / 2.0 + c.powi(4) / 4.0)).abs() < 1e-14);
        let dg = action_gradient(&f, &p);
        for v in dg.values() {
            assert!((v - (p.m2 * c + c * c * c)).abs() < 1e-13);
        }
    }

    #[test]
    fn cosine_action() {
        let g = GridSpec::new(1, 16).unwrap();
        let p = ModelParams::default();
        let a = 0.7;
        let f = Field::cosine(g, &[1], a);
        let want = a * a * PI * PI + p.m2 * a * a / 4.0 + 3.0 * a.powi(4) / 32.0;
        assert!((action(&f, &p) - want).abs() < 1e-13);
    }

    #[test]
    fn zero_is_the_minimizer() {
        let g = GridSpec::new(1, 8).unwrap();
        let p = ModelParams::default();
        assert_eq!(action(&Field::zeros(g), &p), 0.0);
        assert!(action(&Field::cosine(g, &[3], 1e-6), &p) > 0.0);
        assert_eq!(action_gradient(&Field::zeros(g), &p).l2_norm(), 0.0);
    }

    #[test]
    fn constant_path_has_zero_chain_rule_residual() {
        let g = GridSpec::new(1, 8).unwrap();
        let p = ModelParams::default();
        let v = Path::new(0.0, 0.1, vec![Field::cosine(g, &[1], 0.3); 5]).unwrap();
        assert!(chain_rule_check(&v, &p).unwrap() < 1e-15);
        assert!(rate_functional(&Path::new(0.0, 0.1, vec![Field::zeros(g); 4]).unwrap(), &p).unwrap() == 0.0);
    }
}
