//! Coming down from infinity: after removing the linear stochastic part
//! Z (massless, from 0, same noise), the remainder v = u − Z is bounded at
//! positive times independently of how large the initial condition was.

use super::{renorm_constants, NoiseSpec, RenormOptions, SpdeStepper};
use crate::error::{Error, Result};
use crate::field::{Field, NormSpec, C64, ZERO};
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdfiOptions {
    pub horizon: f64,
    /// Window [a, b] over which sup |v| is taken.
    pub window: (f64, f64),
    /// Noise step, shared by every magnitude.
    pub dt: f64,
    /// Drift substeps h satisfy h · 3 max|u|² ≤ `stiffness`.
    pub stiffness: f64,
    /// Times at which the envelope max_x |v(t)| is recorded.
    pub probe_times: Vec<f64>,
    pub renormalize: bool,
}

impl Default for CdfiOptions {
    fn default() -> Self {
        CdfiOptions {
            horizon: 1.0,
            window: (0.5, 1.0),
            dt: 1e-3,
            stiffness: 0.5,
            probe_times: vec![1.0 / 32.0, 1.0 / 16.0, 0.125, 0.25, 0.5, 1.0],
            renormalize: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfiReport {
    pub magnitudes: Vec<f64>,
    pub dt: f64,
    /// sup over the window and the grid of |v|, per magnitude.
    pub sup_window: Vec<f64>,
    /// ratios[i][j] = sup_window[i] / sup_window[j]
    pub ratios: Vec<Vec<f64>>,
    /// (t, max_x |v(t)| per magnitude)
    pub envelope: Vec<(f64, Vec<f64>)>,
    /// p in a least-squares fit max_IC max_x |v(t)| ≈ C t^{−p}.
    pub envelope_exponent: f64,
}

impl CdfiReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().flatten().fold(1.0, |m, r| m.max(*r))
    }

    /// Envelope maximised over the magnitudes, in probe order.
    pub fn envelope_max(&self) -> Vec<(f64, f64)> {
        self.envelope
            .iter()
            .map(|(t, v)| (*t, v.iter().fold(0.0, |m: f64, x| m.max(*x))))
            .collect()
    }
}

/// Default initial shape: cos(2πx₁) + 0.3, scaled to sup norm 1.
pub fn default_ic(grid: crate::field::GridSpec) -> Field {
    let f = Field::cosine(grid, &[1], 1.0).add(&Field::constant(grid, 0.3));
    let s = f.norm(NormSpec::Lp(f64::INFINITY)).expect("valid");
    f.scale(1.0 / s)
}

pub fn cdfi_check(
    params: &ModelParams,
    spec: &NoiseSpec,
    base: &Field,
    ic_magnitudes: &[f64],
    opts: &CdfiOptions,
) -> Result<CdfiReport> {
    if ic_magnitudes.is_empty() || opts.horizon < opts.window.1 || !(opts.window.0 > 0.0) {
        return Err(Error::InvalidArgument("need magnitudes and 0 < window ⊂ [0, horizon]".into()));
    }
    let g = spec.grid;
    if !(opts.dt > 0.0 && opts.stiffness > 0.0) {
        return Err(Error::InvalidArgument("dt and stiffness must be positive".into()));
    }
    let nsteps = (opts.horizon / opts.dt).ceil() as usize;
    let dt = opts.horizon / nsteps as f64;
    let mass = if opts.renormalize {
        renorm_constants(spec, params.m2, &RenormOptions::default())?.mass(params.m2, params.eps)
    } else {
        params.m2
    };
    let probe_steps: Vec<usize> = opts.probe_times.iter().map(|t| (t / dt).round() as usize).collect();

    let mut sup_window = Vec::new();
    let mut per_ic_env: Vec<Vec<f64>> = Vec::new();
    for &a in ic_magnitudes {
        let mut su = SpdeStepper::with_mass(spec, dt, mass, params.eps, true)?;
        let mut sz = SpdeStepper::with_mass(spec, dt, 0.0, params.eps, false)?;
        let mut u: Vec<C64> = base.coeffs().iter().map(|c| c * a).collect();
        let mut z = vec![ZERO; g.len()];
        let mut next = vec![ZERO; g.len()];
        let mut sup: f64 = 0.0;
        let mut env = vec![0.0; probe_steps.len()];
        for j in 1..=nsteps {
            su.step_substepped(&u, (j - 1) as u64, opts.stiffness, &mut next)?;
            std::mem::swap(&mut u, &mut next);
            sz.step(&z, (j - 1) as u64, &mut next)?;
            std::mem::swap(&mut z, &mut next);
            let t = j as f64 * dt;
            let in_window = t >= opts.window.0 - 1e-12 && t <= opts.window.1 + 1e-12;
            let probes: Vec<usize> = (0..probe_steps.len()).filter(|&p| probe_steps[p] == j).collect();
            if in_window || !probes.is_empty() {
                let v: Vec<C64> = u.iter().zip(&z).map(|(a, b)| a - b).collect();
                let m = Field::spectral_unchecked(g, v).norm(NormSpec::Lp(f64::INFINITY))?;
                if in_window {
                    sup = sup.max(m);
                }
                for p in probes {
                    env[p] = m;
                }
            }
        }
        sup_window.push(sup);
        per_ic_env.push(env);
    }
    let ratios = sup_window
        .iter()
        .map(|a| sup_window.iter().map(|b| if *b > 0.0 { a / b } else if *a > 0.0 { f64::INFINITY } else { 1.0 }).collect())
        .collect();
    let envelope: Vec<(f64, Vec<f64>)> = probe_steps
        .iter()
        .enumerate()
        .map(|(p, s)| (*s as f64 * dt, per_ic_env.iter().map(|e| e[p]).collect()))
        .collect();
    let pts: Vec<(f64, f64)> = envelope
        .iter()
        .map(|(t, v)| (*t, v.iter().fold(0.0, |m: f64, x| m.max(*x))))
        .filter(|(t, m)| *t > 0.0 && *m > 0.0)
        .map(|(t, m)| (t.ln(), m.ln()))
        .collect();
    let envelope_exponent = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    } else {
        f64::NAN
    };
    Ok(CdfiReport { magnitudes: ic_magnitudes.to_vec(), dt, sup_window, ratios, envelope, envelope_exponent })
}
