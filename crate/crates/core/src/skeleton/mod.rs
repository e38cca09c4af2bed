//! The controlled skeleton equation ∂ₜw − Δw = −w³ − m²w + h, w(0) = z.
//!
//! The cubic term lives on the Nyquist-free band and is computed on a 2n padded
//! grid; the linear part is integrated exactly mode by mode.

pub(crate) mod stepper;

use crate::error::{Error, Result};
use crate::field::dealias::Dealiaser;
use crate::field::norm::lp_of_values;
use crate::field::{Field, GridSpec, NormSpec, C64, ZERO};
use crate::params::ModelParams;
use crate::path::{step_count, Control, Path};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::{Duration, Instant};
pub use stepper::TimeScheme;
use stepper::{all_finite, Stepper};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub scheme: TimeScheme,
    /// Path-weight exponent; None means −3α/8.
    pub eta: Option<f64>,
    /// Exponent of the Lᵖ monitor.
    pub monitor_p: f64,
    /// Set to false to solve the linear equation.
    pub cubic: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { scheme: TimeScheme::Etd1, eta: None, monitor_p: 4.0, cubic: true }
    }
}

impl SolverOptions {
    pub fn etd2() -> Self {
        SolverOptions { scheme: TimeScheme::Etd2, ..Default::default() }
    }

    pub fn linear() -> Self {
        SolverOptions { cubic: false, ..Default::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub path: Path,
    pub params: ModelParams,
    pub monitor_p: f64,
    pub eta: f64,
    /// ‖w(t_j)‖_{Lᵖ} for every frame.
    pub lp: Vec<f64>,
    /// sup_t (t∧1)^η ‖w(t)‖_{Lᵖ}
    pub weighted_lp_sup: f64,
    /// sup_t (t∧1)^{1+η} ‖w(t)‖_{H¹}
    pub weighted_h1_sup: f64,
    pub wall_time: Duration,
}

/// Reusable solver working directly on coefficient arrays.
pub struct SkeletonSolver {
    grid: GridSpec,
    stepper: Stepper,
}

impl SkeletonSolver {
    pub fn new(grid: GridSpec, params: &ModelParams, dt: f64, opts: &SolverOptions) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive (got {dt})")));
        }
        if !(params.m2 > 0.0) {
            return Err(Error::InvalidArgument(format!("m2 must be positive (got {})", params.m2)));
        }
        let mut stepper = Stepper::new(grid, params.m2, dt, opts.scheme);
        stepper.cubic = opts.cubic;
        Ok(SkeletonSolver { grid, stepper })
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    fn check_control(&self, h: Option<&Control>) -> Result<()> {
        if let Some(h) = h {
            if h.grid() != self.grid {
                return Err(Error::GridMismatch(self.grid.to_string(), h.grid().to_string()));
            }
            if (h.dt() - self.dt()).abs() > 1e-12 * self.dt() {
                return Err(Error::InvalidArgument(format!(
                    "control step {} differs from solver step {}",
                    h.dt(),
                    self.dt()
                )));
            }
        }
        Ok(())
    }

    /// Runs `nsteps` steps and hands every frame (including the first) to `visit`.
    pub fn run(
        &mut self,
        z: &[C64],
        h: Option<&Control>,
        nsteps: usize,
        mut visit: impl FnMut(usize, &[C64]),
    ) -> Result<Vec<C64>> {
        self.check_control(h)?;
        self.stepper.reset();
        let mut w = z.to_vec();
        let mut next = vec![ZERO; w.len()];
        visit(0, &w);
        for j in 0..nsteps {
            let hj = h.and_then(|h| h.step(j)).map(|f| f.coeffs());
            self.stepper.step(&w, hj, &mut next);
            if !all_finite(&next) {
                return Err(Error::Blowup { t: (j + 1) as f64 * self.dt() });
            }
            std::mem::swap(&mut w, &mut next);
            visit(j + 1, &w);
        }
        Ok(w)
    }

    pub fn endpoint(&mut self, z: &Field, h: Option<&Control>, nsteps: usize) -> Result<Field> {
        let w = self.run(z.coeffs(), h, nsteps, |_, _| {})?;
        Ok(Field::spectral_unchecked(self.grid, w))
    }

    pub fn path(&mut self, z: &Field, h: Option<&Control>, nsteps: usize) -> Result<Path> {
        let grid = self.grid;
        let mut frames = Vec::with_capacity(nsteps + 1);
        self.run(z.coeffs(), h, nsteps, |_, w| {
            frames.push(Field::spectral_unchecked(grid, w.to_vec()))
        })?;
        Path::new(0.0, self.dt(), frames)
    }

    pub(crate) fn stepper_mut(&mut self) -> &mut Stepper {
        &mut self.stepper
    }
}

pub fn solve_skeleton(
    z: &Field,
    h: Option<&Control>,
    horizon: f64,
    dt: f64,
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let nsteps = step_count(horizon, dt)?;
    let mut solver = SkeletonSolver::new(z.grid(), params, dt, opts)?;
    let path = solver.path(z, h, nsteps)?;
    let eta = opts.eta.unwrap_or_else(|| params.default_eta());
    let p = opts.monitor_p;
    let mut lp = Vec::with_capacity(path.len());
    let mut weighted_lp_sup: f64 = 0.0;
    let mut weighted_h1_sup: f64 = 0.0;
    for (j, f) in path.frames().iter().enumerate() {
        let v = lp_of_values(f.values(), p);
        lp.push(v);
        let t = path.time(j).min(1.0);
        if t > 0.0 {
            weighted_lp_sup = weighted_lp_sup.max(t.powf(eta) * v);
            weighted_h1_sup = weighted_h1_sup.max(t.powf(1.0 + eta) * f.h1_norm());
        }
    }
    Ok(SolveReport {
        path,
        params: *params,
        monitor_p: p,
        eta,
        lp,
        weighted_lp_sup,
        weighted_h1_sup,
        wall_time: start.elapsed(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRecord {
    pub p: f64,
    pub t0: f64,
    /// ‖w(t₀+t)‖ᵖ_{Lᵖ} / ‖w(t₀)‖ᵖ_{Lᵖ} for frames at or after t₀.
    pub ratios: Vec<(f64, f64)>,
    /// First frame where ‖w(t₀+t)‖ᵖ > e^{−m²t/2}‖w(t₀)‖ᵖ + slack.
    pub first_violation: Option<(f64, f64, f64)>,
}

pub fn monitor_decay(report: &SolveReport, p: f64, t0: f64, slack: f64) -> DecayRecord {
    let path = &report.path;
    let j0 = ((t0 - path.t0()) / path.dt()).round().max(0.0) as usize;
    let base = lp_of_values(path.frame(j0.min(path.steps())).values(), p).powf(p);
    let mut ratios = Vec::new();
    let mut first_violation = None;
    for j in j0..path.len() {
        let t = path.time(j) - path.time(j0);
        let v = lp_of_values(path.frame(j).values(), p).powf(p);
        let bound = (-report.params.m2 * t / 2.0).exp() * base + slack;
        ratios.push((t, if base > 0.0 { v / base } else { 0.0 }));
        if v > bound && first_violation.is_none() {
            first_violation = Some((path.time(j), v, bound));
        }
    }
    DecayRecord { p, t0: path.time(j0), ratios, first_violation }
}

/// Residual of (1/p)∫wᵖ(t) = (1/p)∫wᵖ(0) − ∫₀ᵗ [4(p−1)/p² ‖∇w^{p/2}‖² + ∫w^{p+2}
/// + m²∫wᵖ − ⟨h, w^{p−1}⟩] ds, integrals in time by the trapezoid rule.
pub fn energy_identity_residual(
    path: &Path,
    h: Option<&Control>,
    p: u32,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::InvalidArgument(format!("p must be even and >= 2 (got {p})")));
    }
    let grid = path.grid();
    let pf = p as f64;
    let m = (p as usize / 2 + 1) * grid.n();
    let mut da = Dealiaser::with_size(grid, m);
    let half = p as i32 / 2;
    let mut energy = Vec::with_capacity(path.len());
    let mut dissipation = Vec::with_capacity(path.len());
    for f in path.frames() {
        let c = f.coeffs();
        let e = da.mean_of(c, |x| x.powi(p as i32)) / pf;
        let (pg, spec) = da.padded_spectrum(c, |x| x.powi(half));
        let grad: f64 = spec
            .iter()
            .enumerate()
            .map(|(i, v)| 4.0 * PI * PI * pg.k2(i) as f64 * v.norm_sqr())
            .sum();
        let higher = da.mean_of(c, |x| x.powi(p as i32 + 2));
        dissipation.push(4.0 * (pf - 1.0) / (pf * pf) * grad + higher + params.m2 * pf * e);
        energy.push(e);
    }
    let forcing = |da: &mut Dealiaser, j: usize, frame: usize| -> f64 {
        match h.and_then(|h| h.step(j)) {
            Some(hj) => da.mean_of_pair(hj.coeffs(), path.frame(frame).coeffs(), |a, w| {
                a * w.powi(p as i32 - 1)
            }),
            None => 0.0,
        }
    };
    let dt = path.dt();
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for j in 0..path.steps() {
        let f0 = forcing(&mut da, j, j);
        let f1 = forcing(&mut da, j, j + 1);
        acc += 0.5 * dt * ((dissipation[j] - f0) + (dissipation[j + 1] - f1));
        out.push(energy[j + 1] - (energy[0] - acc));
    }
    Ok(out)
}

/// t ↦ ‖ṽ(t+s) − v(t)‖_{Lᵖ} where ṽ is driven by h delayed by s.
pub fn compare_shifted_control(
    z: &Field,
    h: &Control,
    s: f64,
    horizon: f64,
    p: f64,
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<Vec<(f64, f64)>> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("delay must be >= 0 (got {s})")));
    }
    let dt = h.dt();
    let n = step_count(horizon, dt)?;
    let k = step_count(s, dt)?;
    let mut solver = SkeletonSolver::new(z.grid(), params, dt, opts)?;
    let v = solver.path(z, Some(h), n)?;
    let shifted = h.delayed(s)?;
    let vt = solver.path(z, Some(&shifted), n + k)?;
    Ok((0..=n)
        .map(|j| {
            let diff = vt.frame(j + k).sub(v.frame(j));
            (v.time(j), diff.norm(NormSpec::Lp(p)).expect("p >= 1"))
        })
        .collect())
}

/// Least-squares fit of log D(t) = log C + (c₂ − m²) t over positive samples.
pub fn fit_gronwall_envelope(curve: &[(f64, f64)], m2: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(t, d)| *t > 0.0 && *d > 0.0)
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(((my - slope * mt).exp(), slope + m2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> GridSpec {
        GridSpec::new(1, 16).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let p = ModelParams::default();
        let r = solve_skeleton(&Field::zeros(g1()), None, 0.1, 1e-3, &p, &Default::default()).unwrap();
        assert!(r.path.frames().iter().all(|f| f.l2_norm() == 0.0));
        assert_eq!(r.path.len(), 101);
    }

    #[test]
    fn restart_is_exact() {
        let p = ModelParams::default();
        let z = Field::cosine(g1(), &[2], 1.5).add(&Field::constant(g1(), 0.3));
        let o = SolverOptions::default();
        let full = solve_skeleton(&z, None, 0.2, 1e-3, &p, &o).unwrap();
        let a = solve_skeleton(&z, None, 0.1, 1e-3, &p, &o).unwrap();
        let b = solve_skeleton(a.path.last(), None, 0.1, 1e-3, &p, &o).unwrap();
        assert!(full.path.last().sub(b.path.last()).l2_norm() < 1e-10);
    }

    #[test]
    fn blowup_is_reported() {
        let p = ModelParams::default();
        let z = Field::constant(g1(), 1e3);
        let e = solve_skeleton(&z, None, 1.0, 0.1, &p, &Default::default()).unwrap_err();
        assert!(matches!(e, Error::Blowup { .. }));
    }

    #[test]
    fn mismatched_control_step_is_rejected() {
        let p = ModelParams::default();
        let h = Control::zeros(g1(), 0.1, 2e-3).unwrap();
        let e = solve_skeleton(&Field::zeros(g1()), Some(&h), 0.1, 1e-3, &p, &Default::default());
        assert!(e.is_err());
    }

    #[test]
    fn zero_path_has_zero_energy_residual() {
        let p = ModelParams::default();
        let r = solve_skeleton(&Field::zeros(g1()), None, 0.05, 1e-3, &p, &Default::default()).unwrap();
        let res = energy_identity_residual(&r.path, None, 4, &p).unwrap();
        assert!(res.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn envelope_fit_recovers_exponential() {
        let curve: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.1, 2.0 * (-0.4 * i as f64 * 0.1).exp())).collect();
        let (c, c2) = fit_gronwall_envelope(&curve, 1.0).unwrap();
        assert!((c - 2.0).abs() < 1e-10);
        assert!((c2 - 0.6).abs() < 1e-10);
    }
}
