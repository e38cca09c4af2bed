//! Probability that the Langevin path stays in a 𝒞^α tube (α of the model) around a skeleton
//! path, and a surrogate for the rate infimum over that tube.

use super::fit::{rate_slope_fit, wilson_interval, RatePoint, SlopeFit, Z95};
use crate::action::rate_functional;
use crate::error::{Error, Result};
use crate::field::{BesovEvaluator, Field, C64, ZERO};
use crate::params::ModelParams;
use crate::path::{Control, Path};
use crate::skeleton::{SkeletonSolver, SolverOptions};
use crate::stochastic::{NoiseSpec, SpdeStepper};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TubeKind {
    /// sup over checked times of ‖u(t) − v(t)‖_{𝒞^α} < δ
    Path,
    /// ‖u(T) − v(T)‖_{𝒞^α} < δ
    Endpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TubeOptions {
    pub delta: f64,
    /// Strictly decreasing, positive.
    pub eps_schedule: Vec<f64>,
    pub samples: usize,
    pub kind: TubeKind,
    pub kappa: f64,
    pub seed: u64,
    /// The tube is checked every `stride` steps and at the final time.
    pub stride: usize,
    /// A point with fewer hits is infeasible and ends the schedule.
    pub min_hits: u64,
}

impl Default for TubeOptions {
    fn default() -> Self {
        TubeOptions {
            delta: 0.3,
            eps_schedule: vec![0.5, 0.4, 0.3],
            samples: 20_000,
            kind: TubeKind::Path,
            kappa: 0.0,
            seed: 0,
            stride: 10,
            min_hits: 25,
        }
    }
}

impl TubeOptions {
    fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.delta > 0.0) {
            bad.push(format!("delta must be positive (got {})", self.delta));
        }
        if self.eps_schedule.is_empty() || self.eps_schedule.iter().any(|e| !(*e > 0.0)) {
            bad.push("eps_schedule must be nonempty and positive".to_string());
        }
        if self.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            bad.push("eps_schedule must be strictly decreasing".to_string());
        }
        if self.samples == 0 || self.stride == 0 {
            bad.push("samples and stride must be >= 1".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(bad.join("; ")))
        }
    }
}

#[derive(Clone, Debug)]
pub struct LdpExperiment {
    pub params: ModelParams,
    /// Skeleton path v; its step is the simulation step.
    pub target: Path,
    /// 𝓘(v), equal to ½‖h‖² when built from a control.
    pub rate: f64,
    pub control: Option<Control>,
    pub opts: TubeOptions,
}

impl LdpExperiment {
    /// v = w^{h,z} on the time grid of `h`.
    pub fn from_control(params: &ModelParams, z: &Field, h: &Control, opts: TubeOptions) -> Result<Self> {
        opts.validate()?;
        let mut solver = SkeletonSolver::new(z.grid(), params, h.dt(), &SolverOptions::default())?;
        let target = solver.path(z, Some(h), h.steps())?;
        Ok(LdpExperiment { params: *params, target, rate: h.cost(), control: Some(h.clone()), opts })
    }

    /// Any path; 𝓘(v) is evaluated by reconstructing its control.
    pub fn from_path(params: &ModelParams, target: Path, opts: TubeOptions) -> Result<Self> {
        opts.validate()?;
        let rate = rate_functional(&target, params)?;
        Ok(LdpExperiment { params: *params, target, rate, control: None, opts })
    }

    fn checked(&self, j: usize) -> bool {
        let last = self.target.steps();
        match self.opts.kind {
            TubeKind::Endpoint => j == last,
            TubeKind::Path => j == last || (j > 0 && j % self.opts.stride == 0),
        }
    }

    /// Tube distance of a frame sequence produced step by step.
    fn distance_of(&self, eval: &mut BesovEvaluator, j: usize, u: &[C64], diff: &mut [C64]) -> f64 {
        for ((d, a), b) in diff.iter_mut().zip(u).zip(self.target.frame(j).coeffs()) {
            *d = a - b;
        }
        eval.eval(diff)
    }

    /// Tube distance of the skeleton path driven by `g` from v(0).
    fn skeleton_distance(&self, solver: &mut SkeletonSolver, eval: &mut BesovEvaluator, g: &Control) -> Result<f64> {
        let mut diff = vec![ZERO; self.target.grid().len()];
        let mut sup: f64 = 0.0;
        solver.run(self.target.first().coeffs(), Some(g), self.target.steps(), |j, w| {
            if self.checked(j) {
                sup = sup.max(self.distance_of(eval, j, w, &mut diff));
            }
        })?;
        Ok(sup)
    }
}

/// Per-sample tube distances at intensity `eps`. Sample i uses noise stream i
/// of the experiment seed, so every ε sees the same noise. A sample stops as
/// soon as its distance reaches `cutoff` (the returned value is then ≥ cutoff).
pub fn tube_distances(exp: &LdpExperiment, eps: f64, cutoff: f64) -> Result<Vec<f64>> {
    let g = exp.target.grid();
    let spec = NoiseSpec::new(g, exp.opts.kappa, exp.opts.seed, 0)?;
    let dt = exp.target.dt();
    let nsteps = exp.target.steps();
    (0..exp.opts.samples)
        .into_par_iter()
        .map_init(
            || {
                (
                    SpdeStepper::with_mass(&spec, dt, exp.params.m2, eps, true),
                    BesovEvaluator::hoelder(g, exp.params.alpha),
                    vec![ZERO; g.len()],
                    vec![ZERO; g.len()],
                    vec![ZERO; g.len()],
                )
            },
            |(st, eval, u, next, diff), i| -> Result<f64> {
                let st = st.as_mut().map_err(|e| Error::InvalidArgument(e.to_string()))?;
                st.set_stream(i as u64);
                u.copy_from_slice(exp.target.first().coeffs());
                let mut sup: f64 = 0.0;
                for j in 0..nsteps {
                    st.step(u, j as u64, next)?;
                    std::mem::swap(u, next);
                    if exp.checked(j + 1) {
                        sup = sup.max(exp.distance_of(eval, j + 1, u, diff));
                        if sup >= cutoff {
                            break;
                        }
                    }
                }
                Ok(sup)
            },
        )
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeEstimate {
    pub epsilon: f64,
    pub n_samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// −ε² ln p̂ (infinite without hits).
    pub rate_point: f64,
}

impl TubeEstimate {
    pub fn from_counts(epsilon: f64, hits: u64, n: u64) -> Self {
        let p_hat = hits as f64 / n as f64;
        let (wilson_lo, wilson_hi) = wilson_interval(hits, n, Z95);
        TubeEstimate { epsilon, n_samples: n, hits, p_hat, wilson_lo, wilson_hi, rate_point: -epsilon * epsilon * p_hat.ln() }
    }

    pub fn rate_input(&self) -> RatePoint {
        RatePoint::from_counts(self.epsilon, self.hits, self.n_samples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeReport {
    /// Evaluated points in schedule order; only the last may be infeasible.
    pub estimates: Vec<TubeEstimate>,
    /// Schedule entries not evaluated because too few hits were expected.
    pub truncated: Vec<f64>,
    pub min_hits: u64,
    /// 𝓘(v)
    pub rate: f64,
}

impl TubeReport {
    pub fn feasible(&self) -> Vec<&TubeEstimate> {
        self.estimates.iter().filter(|e| e.hits >= self.min_hits).collect()
    }

    pub fn fit(&self) -> Result<SlopeFit> {
        let pts: Vec<RatePoint> = self.feasible().iter().map(|e| e.rate_input()).collect();
        rate_slope_fit(&pts)
    }
}

/// Monte Carlo tube probabilities along the ε schedule. The schedule stops
/// at the first point with fewer than `min_hits` hits, or earlier when the
/// last rate point predicts fewer than `min_hits` expected hits.
pub fn mc_tube_probability(exp: &LdpExperiment) -> Result<TubeReport> {
    exp.opts.validate()?;
    let n = exp.opts.samples as u64;
    let mut estimates: Vec<TubeEstimate> = Vec::new();
    let mut truncated = Vec::new();
    for (i, &eps) in exp.opts.eps_schedule.iter().enumerate() {
        if let Some(prev) = estimates.last() {
            let predicted = (-prev.rate_point / (eps * eps)).exp() * n as f64;
            if prev.hits < exp.opts.min_hits || predicted < exp.opts.min_hits as f64 {
                truncated.extend_from_slice(&exp.opts.eps_schedule[i..]);
                break;
            }
        }
        let d = tube_distances(exp, eps, exp.opts.delta)?;
        let hits = d.iter().filter(|x| **x < exp.opts.delta).count() as u64;
        estimates.push(TubeEstimate::from_counts(eps, hits, n));
    }
    Ok(TubeReport { estimates, truncated, min_hits: exp.opts.min_hits, rate: exp.rate })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeCandidate {
    /// Time tilt: g(t) ∝ e^{β(t − T)} h(t).
    pub beta: f64,
    /// Highest |k| kept from h; None keeps all.
    pub cutoff: Option<i64>,
    /// Smallest scale c found with c·g inside the tube.
    pub scale: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeInfimum {
    /// 𝓘_tube: the least rate among candidate paths inside the tube.
    pub value: f64,
    /// 𝓘(v)
    pub rate: f64,
    pub candidates: Vec<TubeCandidate>,
}

const TILTS: [f64; 10] = [-2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];

/// Surrogate for the infimum of the rate functional over the tube: 20
/// perturbed controls (time tilts × spectral truncations of h), each scaled
/// down to the tube boundary by bisection. Returns a value ≤ 𝓘(v).
pub fn tube_infimum(exp: &LdpExperiment) -> Result<TubeInfimum> {
    let h = exp
        .control
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("tube infimum needs the target's control".into()))?;
    let g = exp.target.grid();
    let horizon = h.horizon();
    let h_norm = h.norm_sq().sqrt();
    let delta = exp.opts.delta;
    let mut solver = SkeletonSolver::new(g, &exp.params, h.dt(), &SolverOptions::default())?;
    let mut eval = BesovEvaluator::hoelder(g, exp.params.alpha);
    let mut candidates = Vec::new();
    for cutoff in [None, Some(1i64)] {
        for beta in TILTS {
            let base = Control::new(
                0.0,
                h.dt(),
                h.frames()
                    .iter()
                    .enumerate()
                    .map(|(j, f)| {
                        let f = match cutoff {
                            Some(kc) => f.map_coeffs(|i, c| {
                                if g.wavevector(i).iter().all(|k| k.abs() <= kc) {
                                    c
                                } else {
                                    ZERO
                                }
                            }),
                            None => f.clone(),
                        };
                        f.scale((beta * (j as f64 * h.dt() - horizon)).exp())
                    })
                    .collect(),
            )?;
            let g_norm = base.norm_sq().sqrt();
            let mut found = None;
            if g_norm > 0.0 {
                // coarse scan up to twice the cost scale of h, then bisection
                let c_max = 2.0 * h_norm / g_norm;
                let scan = 40;
                let mut prev = 0.0;
                let mut inside_at_zero = false;
                for s in 0..=scan {
                    let c = c_max * s as f64 / scan as f64;
                    let d = exp.skeleton_distance(&mut solver, &mut eval, &base.scale(c))?;
                    if d < delta {
                        if s == 0 {
                            inside_at_zero = true;
                        }
                        found = Some((prev, c));
                        break;
                    }
                    prev = c;
                }
                if inside_at_zero {
                    found = Some((0.0, 0.0));
                } else if let Some((mut lo, mut hi)) = found {
                    for _ in 0..40 {
                        let mid = 0.5 * (lo + hi);
                        if exp.skeleton_distance(&mut solver, &mut eval, &base.scale(mid))? < delta {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    found = Some((lo, hi));
                }
            }
            let scale = found.map(|(_, hi)| hi);
            let rate = scale.map(|c| 0.5 * c * c * g_norm * g_norm);
            candidates.push(TubeCandidate { beta, cutoff, scale, rate });
        }
    }
    let value = candidates.iter().filter_map(|c| c.rate).fold(exp.rate, f64::min);
    Ok(TubeInfimum { value, rate: exp.rate, candidates })
}

/// CSV with columns epsilon, n_samples, hits, p_hat, wilson_lo, wilson_hi, rate_point.
pub fn write_tube_csv<W: Write>(w: &mut W, estimates: &[TubeEstimate]) -> Result<()> {
    writeln!(w, "epsilon,n_samples,hits,p_hat,wilson_lo,wilson_hi,rate_point")?;
    for e in estimates {
        writeln!(
            w,
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.epsilon, e.n_samples, e.hits, e.p_hat, e.wilson_lo, e.wilson_hi, e.rate_point
        )?;
    }
    Ok(())
}
