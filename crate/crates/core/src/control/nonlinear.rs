//! Exact controllability of the skeleton dynamics from 0.
//!
//! Solve f(φ) := w^{𝓛⁺φ,0}(T) = target. Damped Picard steps φ ← φ + ω(target − f(φ))
//! bring the residual below a switch level, then Newton steps use GMRES on the
//! tangent-linear of the discrete solver.

use super::certificate::Certificate;
use super::gmres::gmres;
use super::{linear_pseudoinverse, LinearEndpointSymbol};
use crate::error::{Error, Result};
use crate::field::{Field, NormSpec, C64, ZERO};
use crate::params::ModelParams;
use crate::path::{step_count, Control};
use crate::skeleton::{SkeletonSolver, SolverOptions, TimeScheme};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ControlMethod {
    /// Damped Picard only.
    Picard,
    /// Damped Picard, then Newton–Krylov below `switch_tol`.
    #[default]
    Newton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlOptions {
    pub method: ControlMethod,
    pub damping: f64,
    pub switch_tol: f64,
    /// Stop when the H¹ endpoint residual is below this.
    pub tol: f64,
    pub max_iter: usize,
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    /// Time scheme of the skeleton solver the control is built for.
    pub scheme: TimeScheme,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions {
            method: ControlMethod::Newton,
            damping: 0.5,
            switch_tol: 1e-2,
            tol: 1e-9,
            max_iter: 50,
            gmres_tol: 1e-10,
            gmres_restart: 40,
            scheme: TimeScheme::Etd2,
        }
    }
}

struct Problem<'a> {
    sym: LinearEndpointSymbol,
    solver: SkeletonSolver,
    target: &'a Field,
    steps: usize,
}

impl Problem<'_> {
    fn control(&self, phi: &[C64]) -> Control {
        let f = Field::spectral_unchecked(self.sym.grid(), phi.to_vec());
        linear_pseudoinverse(&self.sym, &f).expect("grid checked")
    }

    /// Endpoint and the trajectory (needed for the tangent-linear).
    fn forward(&mut self, phi: &[C64], keep: bool) -> Result<(Vec<C64>, Vec<Vec<C64>>)> {
        let h = self.control(phi);
        let mut traj = Vec::new();
        let end = self.solver.run(
            &vec![ZERO; phi.len()],
            Some(&h),
            self.steps,
            |_, w| {
                if keep {
                    traj.push(w.to_vec())
                }
            },
        )?;
        Ok((end, traj))
    }

    fn residual(&self, end: &[C64]) -> (Vec<C64>, f64) {
        let r: Vec<C64> = self.target.coeffs().iter().zip(end).map(|(a, b)| a - b).collect();
        let n = Field::spectral_unchecked(self.sym.grid(), r.clone())
            .norm(NormSpec::Sobolev(1.0))
            .expect("valid");
        (r, n)
    }

    /// δw(T) for δφ along the stored trajectory.
    fn tangent(&mut self, traj: &[Vec<C64>], dphi: &[C64]) -> Vec<C64> {
        let dh = self.control(dphi);
        let st = self.solver.stepper_mut();
        let n = dphi.len();
        let mut dw = vec![ZERO; n];
        let mut prod = vec![ZERO; n];
        let mut prev = vec![ZERO; n];
        let etd2 = st.scheme() == TimeScheme::Etd2;
        for j in 0..self.steps {
            if st.cubic {
                st.dealias.apply_pair(&traj[j], &dw, |w, d| 3.0 * w * w * d, &mut prod);
            }
            let hj = dh.frames()[j].coeffs();
            for i in 0..n {
                dw[i] = dw[i] * st.decay[i] + (hj[i] - prod[i]) * st.b1[i];
            }
            if etd2 && j > 0 {
                let b2 = st.b2();
                for i in 0..n {
                    dw[i] -= (prod[i] - prev[i]) * b2[i];
                }
            }
            std::mem::swap(&mut prev, &mut prod);
        }
        dw
    }
}

pub fn nonlinear_control_to(
    target: &Field,
    horizon: f64,
    dt: f64,
    params: &ModelParams,
    opts: &ControlOptions,
) -> Result<Certificate> {
    let grid = target.grid();
    let steps = step_count(horizon, dt)?;
    let sym = LinearEndpointSymbol::new(grid, params.m2, horizon, dt)?;
    let solver = SkeletonSolver::new(grid, params, dt, &SolverOptions { scheme: opts.scheme, ..Default::default() })?;
    let mut pb = Problem { sym, solver, target, steps };

    let finish = |pb: &Problem, phi: &[C64], err: f64, it: usize, hist: Vec<f64>| {
        let control = pb.control(phi);
        Certificate::new(target.clone(), control, err, horizon, dt, None, it, hist)
    };

    if target.coeffs().iter().all(|c| *c == ZERO) {
        return Ok(finish(&pb, &vec![ZERO; grid.len()], 0.0, 0, vec![]));
    }

    let mut phi = target.coeffs().to_vec();
    let (end, mut traj) = pb.forward(&phi, true)?;
    let (mut r, mut rn) = pb.residual(&end);
    let mut history = vec![rn];
    let mut omega = opts.damping;
    let mut it = 0;
    while rn > opts.tol {
        if it >= opts.max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: rn, history });
        }
        it += 1;
        let newton = opts.method == ControlMethod::Newton && rn < opts.switch_tol;
        let step: Vec<C64> = if newton {
            let t = &traj;
            let out = gmres(|v| pb.tangent(t, v), &r, opts.gmres_tol, opts.gmres_restart, 4 * opts.gmres_restart);
            out.x
        } else {
            r.clone()
        };
        // Backtrack until the residual decreases.
        let mut scale = if newton { 1.0 } else { omega };
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<C64> = phi.iter().zip(&step).map(|(a, b)| a + b * scale).collect();
            let attempt = pb.forward(&trial, true);
            if let Ok((end, tr)) = attempt {
                let (r2, rn2) = pb.residual(&end);
                if rn2 < rn {
                    phi = trial;
                    r = r2;
                    rn = rn2;
                    traj = tr;
                    accepted = true;
                    if !newton {
                        omega = scale;
                    }
                    break;
                }
            }
            scale *= 0.5;
        }
        history.push(rn);
        if !accepted {
            return Err(Error::NoConvergence { iterations: it, residual: rn, history });
        }
    }
    Ok(finish(&pb, &phi, rn, it, history))
}
