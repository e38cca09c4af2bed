//! A reduced invariant suite on the configured grid and model. Each check
//! prints one PASS/FAIL line; any failure makes the command exit nonzero.

use crate::commands::num;
use crate::config::ExperimentConfig;
use crate::CliError;
use phi4::action::{action, action_gradient, rate_functional};
use phi4::control::{
    linear_adjoint, linear_endpoint, linear_pseudoinverse, lower_bound_control, nonlinear_control_to,
    pseudoinverse_norm_continuum, quasipotential_certificate, LinearEndpointSymbol, LowerBoundOptions,
};
use phi4::field::sample::{band_limited, normalized, SpectrumShape};
use phi4::ldp::{mc_tube_probability, write_tube_csv, LdpExperiment, TubeKind, TubeOptions};
use phi4::skeleton::{energy_identity_residual, solve_skeleton, SkeletonSolver, SolverOptions};
use phi4::stochastic::{cdfi_check, default_ic, NoiseSpec};
use phi4::{Control, Field, GridSpec, ModelParams, NormSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

/// value ≤ threshold passes.
fn at_most(name: &'static str, value: f64, threshold: f64) -> Check {
    Check { name, value, threshold, pass: value <= threshold }
}

fn h1(f: &Field) -> f64 {
    f.norm(NormSpec::Sobolev(1.0)).expect("sobolev norm")
}

fn gradient(g: GridSpec, p: &ModelParams, rng: &mut ChaCha8Rng) -> Check {
    let tau = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let phi = normalized(&band_limited(g, SpectrumShape::Smooth { s: 1.0 }, rng), NormSpec::Lp(2.0), 1.5);
        let psi = normalized(&band_limited(g, SpectrumShape::Smooth { s: 1.0 }, rng), NormSpec::Lp(2.0), 1.0);
        let exact = action_gradient(&phi, p).inner(&psi);
        let fd = (action(&phi.lincomb(1.0, &psi, tau), p) - action(&phi.lincomb(1.0, &psi, -tau), p)) / (2.0 * tau);
        worst = worst.max((fd - exact).abs() / exact.abs());
    }
    at_most("gradient_vs_central_differences", worst, 1e-6)
}

fn l2_decay(g: GridSpec, p: &ModelParams, rng: &mut ChaCha8Rng) -> Result<Check, CliError> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let z = normalized(&band_limited(g, SpectrumShape::Flat, rng), NormSpec::Lp(2.0), 2.0);
        let r = solve_skeleton(&z, None, 1.0, 1e-3, p, &SolverOptions::default())?;
        let z2 = z.l2_norm().powi(2);
        for (j, f) in r.path.frames().iter().enumerate() {
            let bound = (-2.0 * p.m2 * r.path.time(j)).exp() * z2;
            worst = worst.max(f.l2_norm().powi(2) - bound);
        }
    }
    Ok(at_most("l2_decay_excess", worst, 1e-12))
}

fn energy_bound(g: GridSpec, p: &ModelParams, rng: &mut ChaCha8Rng) -> Result<Check, CliError> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let a = band_limited(g, SpectrumShape::Smooth { s: 1.0 }, rng).scale(0.5 + 0.05 * i as f64);
        let b = band_limited(g, SpectrumShape::Flat, rng);
        let h = Control::from_fn(g, 1.0, 1e-3, |t| a.lincomb((7.0 * t).cos(), &b, t))?;
        let r = solve_skeleton(&Field::zeros(g), Some(&h), 1.0, 1e-3, p, &SolverOptions::default())?;
        worst = worst.max(action(r.path.last(), p) - 0.25 * h.norm_sq());
    }
    Ok(at_most("one_sided_energy_bound_excess", worst, 1e-8))
}

fn energy_identity(g: GridSpec, p: &ModelParams, rng: &mut ChaCha8Rng) -> Result<Vec<Check>, CliError> {
    let z = normalized(&band_limited(g, SpectrumShape::Smooth { s: 3.0 }, rng), NormSpec::Lp(2.0), 0.5);
    let res = |dt: f64| -> Result<f64, CliError> {
        let r = solve_skeleton(&z, None, 1.0, dt, p, &SolverOptions::default())?;
        let v = energy_identity_residual(&r.path, None, 2, p)?;
        Ok(v.iter().fold(0.0, |m: f64, x| m.max(x.abs())))
    };
    let (a, b) = (res(1e-3)?, res(5e-4)?);
    Ok(vec![at_most("energy_identity_residual", a, 1e-4), at_most("energy_identity_halving_ratio", b / a, 0.6)])
}

fn rate_recovery(g: GridSpec, p: &ModelParams, rng: &mut ChaCha8Rng) -> Result<Vec<Check>, CliError> {
    let (mut worst, mut ratio) = (0.0f64, f64::INFINITY);
    for _ in 0..5 {
        let z = normalized(&band_limited(g, SpectrumShape::Smooth { s: 4.0 }, rng), NormSpec::Sobolev(1.0), 1.0);
        let a = band_limited(g, SpectrumShape::Smooth { s: 1.0 }, rng);
        let b = band_limited(g, SpectrumShape::Smooth { s: 1.0 }, rng);
        let w: (f64, f64) = (rng.random_range(2.0..6.0), rng.random_range(2.0..6.0));
        let run = |dt: f64| -> Result<f64, CliError> {
            let h = Control::from_fn(g, 1.0, dt, |t| a.lincomb((w.0 * t).cos(), &b, (w.1 * t).sin()))?;
            let mut s = SkeletonSolver::new(g, p, dt, &SolverOptions::etd2())?;
            let v = s.path(&z, Some(&h), h.steps())?;
            Ok((rate_functional(&v, p)? - h.cost()).abs() / h.cost())
        };
        let (e1, e2) = (run(1e-3)?, run(5e-4)?);
        worst = worst.max(e1);
        ratio = ratio.min(e1 / e2);
    }
    Ok(vec![
        at_most("rate_recovery_relative_error", worst, 1e-3),
        Check { name: "rate_recovery_halving_ratio", value: ratio, threshold: 3.0, pass: ratio >= 3.0 },
    ])
}

fn linear(g: GridSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Check>, CliError> {
    let (m, t, dt) = (1.0f64, 0.7, 1e-3);
    let sym = LinearEndpointSymbol::new(g, m * m, t, dt)?;
    let c = 2f64.sqrt() * m / (-(-2.0 * t * m * m).exp_m1()).sqrt();
    let (mut res, mut bound, mut adj) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..100 {
        let phi = band_limited(g, SpectrumShape::Smooth { s: 0.5 }, rng);
        let hp = linear_pseudoinverse(&sym, &phi)?;
        res = res.max(h1(&linear_endpoint(&sym, &hp)?.sub(&phi)));
        bound = bound.max(pseudoinverse_norm_continuum(&sym, &phi) / (c * h1(&phi)) - 1.0);
        let frames = (0..=sym.steps()).map(|_| band_limited(g, SpectrumShape::Flat, rng)).collect();
        let h = Control::new(0.0, dt, frames)?;
        let psi = band_limited(g, SpectrumShape::Flat, rng);
        let lhs = linear_endpoint(&sym, &h)?.inner(&psi);
        let rhs = h.inner(&linear_adjoint(&sym, &psi)?);
        adj = adj.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    Ok(vec![
        at_most("linear_control_residual_h1", res, 1e-8),
        at_most("pseudoinverse_bound_excess", bound, 1e-12),
        at_most("adjointness", adj, 1e-10),
    ])
}

fn nonlinear(p: &ModelParams, rng: &mut ChaCha8Rng) -> Result<Check, CliError> {
    let g = GridSpec::new(1, 32)?;
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let target = normalized(&band_limited(g, SpectrumShape::Smooth { s: 2.0 }, rng), NormSpec::Sobolev(1.0), 2.0);
        let c = nonlinear_control_to(&target, 1.0, 1e-3, p, &Default::default())?;
        worst = worst.max(c.endpoint_error);
    }
    Ok(at_most("nonlinear_control_residual_h1", worst, 1e-6))
}

fn certificate(g: GridSpec, p: &ModelParams) -> Result<Check, CliError> {
    let mut k = vec![0i64; g.d()];
    k[0] = 1;
    let target = Field::cosine(g, &k, 0.5);
    let cert = quasipotential_certificate(&target, 0.05, 8.0, 1e-3, p, &Default::default())?;
    let s = action(&target, p);
    let gap = (cert.cost / 2.0 - s) / s;
    Ok(Check { name: "certificate_relative_gap", value: gap, threshold: 0.05, pass: gap.abs() <= 0.05 && gap >= -1e-8 / s })
}

fn lower_bound(p: &ModelParams) -> Result<Vec<Check>, CliError> {
    let g = GridSpec::new(1, 32)?;
    let z = Field::cosine(g, &[1], 0.5);
    let (rho, delta, gamma) = (1.0, 0.2, 0.1);
    let opts = LowerBoundOptions { samples: 10, ..Default::default() };
    let r = lower_bound_control(&z, rho, delta, gamma, p, &opts)?;
    let budget = 2.0 * action(&z, p) + gamma / 2.0;
    Ok(vec![
        at_most("lower_bound_cost_over_budget", r.control.cost() / budget, 1.0),
        at_most("lower_bound_worst_endpoint_error", r.worst_error(), delta / 2.0),
    ])
}

fn cdfi(g: GridSpec, p: &ModelParams, seed: u64) -> Result<Check, CliError> {
    let spec = NoiseSpec::new(g, 0.0, seed, 0)?;
    let base = default_ic(g).scale(100.0);
    let r = cdfi_check(p, &spec, &base, &[1.0, 10.0, 100.0], &Default::default())?;
    Ok(at_most("cdfi_magnitude_ratio", r.max_ratio(), 1.1))
}

/// The same small tube estimate on pools of 1 and 4 threads and once more on 1.
fn determinism(p: &ModelParams, seed: u64) -> Result<Check, CliError> {
    let g = GridSpec::new(1, 16)?;
    let h = Control::constant(&Field::constant(g, 1.0), 0.2, 1e-3)?;
    let opts = TubeOptions { samples: 400, kind: TubeKind::Endpoint, seed, min_hits: 0, ..Default::default() };
    let exp = LdpExperiment::from_control(p, &Field::zeros(g), &h, opts)?;
    let run = |threads: usize| -> Result<Vec<u8>, CliError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Pool(e.to_string()))?;
        let report = pool.install(|| mc_tube_probability(&exp))?;
        let mut buf = Vec::new();
        write_tube_csv(&mut buf, &report.estimates)?;
        Ok(buf)
    };
    let (a, b, c) = (run(1)?, run(4)?, run(1)?);
    let differing = [&b, &c].iter().filter(|x| ***x != a).count();
    Ok(at_most("nondeterministic_reruns", differing as f64, 0.0))
}

/// Runs every check, writes selftest.csv and fails if any check fails.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let g = cfg.grid();
    let p = &cfg.model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = vec![gradient(g, p, &mut rng), l2_decay(g, p, &mut rng)?, energy_bound(g, p, &mut rng)?];
    checks.extend(energy_identity(g, p, &mut rng)?);
    checks.extend(rate_recovery(g, p, &mut rng)?);
    checks.extend(linear(g, &mut rng)?);
    checks.push(nonlinear(p, &mut rng)?);
    checks.push(certificate(g, p)?);
    checks.extend(lower_bound(p)?);
    checks.push(cdfi(g, p, cfg.seed)?);
    checks.push(determinism(p, cfg.seed)?);

    let mut w = std::io::BufWriter::new(std::fs::File::create(out.join("selftest.csv"))?);
    writeln!(w, "check,value,threshold,pass")?;
    let mut lines = Vec::new();
    for c in &checks {
        writeln!(w, "{},{},{},{}", c.name, num(c.value), num(c.threshold), c.pass)?;
        let tag = if c.pass { "PASS" } else { "FAIL" };
        lines.push(format!("{tag} {}: {:.3e} (threshold {:.3e})", c.name, c.value, c.threshold));
    }
    w.flush()?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        for l in &lines {
            println!("{l}");
        }
        return Err(CliError::SelftestFailed(failed));
    }
    Ok(lines)
}
