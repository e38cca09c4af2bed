//! Constructive upper bound for the quasi-potential: reach the target along the
//! time-reversed gradient flow.
//!
//! The target is flowed down for T − ε; a local control steers 0 to the bottom of
//! that path in time ε, and the path is then retraced upwards. The controls on
//! the upward segment are obtained by inverting one solver step, so the solver
//! reproduces the reversed path exactly and the control approximates 2D𝒮(v).

use super::nonlinear::{nonlinear_control_to, ControlOptions};
use crate::action::action;
use crate::error::{Error, Result};
use crate::field::{Field, NormSpec, C64, ZERO};
use crate::params::ModelParams;
use crate::path::{step_count, Control};
use crate::skeleton::{SkeletonSolver, SolverOptions, TimeScheme};
use serde::{Deserialize, Serialize};
use std::path::Path as FsPath;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentCosts {
    pub eps_seg: f64,
    /// ½‖h̃‖² of the local segment on [0, ε].
    pub local_cost: f64,
    /// ½‖h‖² of the retraced segment on [ε, T].
    pub up_cost: f64,
    pub action_target: f64,
    /// 𝒮 at the bottom of the down-flow.
    pub action_bottom: f64,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub target: Field,
    pub control: Control,
    /// ½‖h‖²_{L²L²}
    pub cost: f64,
    /// H¹ distance of the achieved endpoint to the target.
    pub endpoint_error: f64,
    pub horizon: f64,
    pub dt: f64,
    pub segments: Option<SegmentCosts>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// JSON form; the control itself is stored separately as a path directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub cost: f64,
    pub half_cost: f64,
    pub action_target: f64,
    pub endpoint_error: f64,
    pub horizon: f64,
    pub dt: f64,
    pub segments: Option<SegmentCosts>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub control: Option<String>,
}

impl Certificate {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        target: Field,
        control: Control,
        endpoint_error: f64,
        horizon: f64,
        dt: f64,
        segments: Option<SegmentCosts>,
        iterations: usize,
        residual_history: Vec<f64>,
    ) -> Self {
        let cost = control.cost();
        Certificate { target, control, cost, endpoint_error, horizon, dt, segments, iterations, residual_history }
    }

    pub fn summary(&self, params: &ModelParams, control_ref: Option<String>) -> CertificateSummary {
        CertificateSummary {
            cost: self.cost,
            half_cost: self.cost / 2.0,
            action_target: action(&self.target, params),
            endpoint_error: self.endpoint_error,
            horizon: self.horizon,
            dt: self.dt,
            segments: self.segments.clone(),
            iterations: self.iterations,
            residual_history: self.residual_history.clone(),
            control: control_ref,
        }
    }

    pub fn write_json(&self, path: &FsPath, params: &ModelParams, control_ref: Option<String>) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.summary(params, control_ref))?;
        std::fs::write(path, s + "\n")?;
        Ok(())
    }
}

pub fn quasipotential_certificate(
    target: &Field,
    eps_seg: f64,
    horizon: f64,
    dt: f64,
    params: &ModelParams,
    opts: &ControlOptions,
) -> Result<Certificate> {
    if !(eps_seg > 0.0 && eps_seg < horizon) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < eps_seg < T (got {eps_seg}, {horizon})"
        )));
    }
    let grid = target.grid();
    let n_total = step_count(horizon, dt)?;
    let n_down = step_count(horizon - eps_seg, dt)?;
    let n_loc = n_total - n_down;
    let s_target = action(target, params);

    let solver_opts = SolverOptions { scheme: opts.scheme, ..Default::default() };
    let mut solver = SkeletonSolver::new(grid, params, dt, &solver_opts)?;
    let mut down: Vec<Vec<C64>> = Vec::with_capacity(n_down + 1);
    solver.run(target.coeffs(), None, n_down, |_, w| down.push(w.to_vec()))?;
    let bottom = Field::spectral_unchecked(grid, down[n_down].clone());

    let local = nonlinear_control_to(&bottom, n_loc as f64 * dt, dt, params, opts)?;

    // Invert one solver step at a time along the reversed path v_j = down[n_down − j],
    // continuing the multistep history left behind by the local segment.
    solver.run(&vec![ZERO; grid.len()], Some(&local.control), n_loc, |_, _| {})?;
    let st = solver.stepper_mut();
    let mut prev: Option<Vec<C64>> = st.history().map(|h| h.to_vec());
    let etd2 = st.scheme() == TimeScheme::Etd2;
    let mut nl = vec![ZERO; grid.len()];
    let mut frames = Vec::with_capacity(n_down + 1);
    for j in 0..n_down {
        let v = &down[n_down - j];
        let v1 = &down[n_down - j - 1];
        st.dealias.cube(v, &mut nl);
        nl.iter_mut().for_each(|c| *c = -*c);
        let h: Vec<C64> = (0..grid.len())
            .map(|i| {
                let mut rhs = v1[i] - v[i] * st.decay[i] - nl[i] * st.b1[i];
                if let Some(p) = &prev {
                    rhs -= (nl[i] - p[i]) * st.b2()[i];
                }
                rhs / st.b1[i]
            })
            .collect();
        if etd2 {
            prev = Some(nl.clone());
        }
        frames.push(Field::spectral_unchecked(grid, h));
    }
    frames.push(frames.last().cloned().unwrap_or_else(|| Field::zeros(grid)));
    let up = Control::new(0.0, dt, frames)?;
    let control = local.control.concat(&up)?;

    let end = solver.endpoint(&Field::zeros(grid), Some(&control), n_total)?;
    let endpoint_error = end.sub(target).norm(NormSpec::Sobolev(1.0))?;
    let segments = SegmentCosts {
        eps_seg,
        local_cost: local.cost,
        up_cost: up.cost(),
        action_target: s_target,
        action_bottom: action(&bottom, params),
    };
    Ok(Certificate::new(
        target.clone(),
        control,
        endpoint_error,
        horizon,
        dt,
        Some(segments),
        local.iterations,
        local.residual_history,
    ))
}
