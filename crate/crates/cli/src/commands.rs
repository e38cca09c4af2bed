//! One function per subcommand. Each writes its files into `out` and returns
//! the lines to print.

use crate::config::ExperimentConfig;
use crate::CliError;
use phi4::action::action;
use phi4::control::{lower_bound_control, nonlinear_control_to, quasipotential_certificate, sample_start, Certificate};
use phi4::field::snapshot::Representation;
use phi4::ldp::{
    excursion_ensemble, excursion_statistics, invariant_tail_experiment, mc_tube_probability, tube_infimum,
    write_tail_csv, write_tube_csv, ExcursionSpec, LdpExperiment,
};
use phi4::skeleton::{monitor_decay, solve_skeleton, SolverOptions};
use phi4::stochastic::{cdfi_check, default_ic, renorm_constants, NoiseSpec, RenormConstants, RenormOptions};
use phi4::{Control, Field, ModelParams};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

pub fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).map_err(phi4::Error::from)?;
    std::fs::write(out.join(name), s + "\n")?;
    Ok(())
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions { scheme: cfg.solver.scheme, eta: cfg.solver.eta, monitor_p: cfg.solver.monitor_p, cubic: true }
}

#[derive(Serialize)]
struct SkeletonSummary {
    eta: f64,
    monitor_p: f64,
    weighted_lp_sup: f64,
    weighted_h1_sup: f64,
    control_cost: f64,
    action_start: f64,
    action_end: f64,
    /// (t, value, bound) of the first frame above the L² decay bound after the forcing stops.
    decay_violation: Option<(f64, f64, f64)>,
}

pub fn solve(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let g = cfg.grid();
    let s = &cfg.solver;
    let z = cfg.target.build(g, cfg.seed);
    let f = &cfg.forcing;
    let mut axis = vec![0i64; g.d()];
    axis[0] = f.mode;
    let shape = Field::cosine(g, &axis, f.amplitude);
    let until = f.until.unwrap_or(f64::INFINITY);
    let h = Control::from_fn(g, s.horizon, s.dt, |t| if t < until { shape.clone() } else { Field::zeros(g) })?;
    let r = solve_skeleton(&z, Some(&h), s.horizon, s.dt, &cfg.model, &solver_options(cfg))?;
    let mut w = create(out, "skeleton.csv")?;
    writeln!(w, "t,lp,l2,h1,action")?;
    for (j, fr) in r.path.frames().iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            num(r.path.time(j)),
            num(r.lp[j]),
            num(fr.l2_norm()),
            num(fr.h1_norm()),
            num(action(fr, &cfg.model))
        )?;
    }
    w.flush()?;
    let t0 = f.until.map_or(0.0, |u| u.min(s.horizon));
    let decay = if f.amplitude == 0.0 || f.until.is_some() { monitor_decay(&r, 2.0, t0, 0.0).first_violation } else { None };
    let summary = SkeletonSummary {
        eta: r.eta,
        monitor_p: r.monitor_p,
        weighted_lp_sup: r.weighted_lp_sup,
        weighted_h1_sup: r.weighted_h1_sup,
        control_cost: h.cost(),
        action_start: action(r.path.first(), &cfg.model),
        action_end: action(r.path.last(), &cfg.model),
        decay_violation: decay,
    };
    write_json(out, "summary.json", &summary)?;
    if cfg.save_paths {
        r.path.save_dir(&out.join("path"), Representation::Spectral)?;
    }
    Ok(vec![
        format!("frames: {}", r.path.len()),
        format!("weighted Lp sup: {}", num(r.weighted_lp_sup)),
        format!("weighted H1 sup: {}", num(r.weighted_h1_sup)),
        format!("solve time: {:.3} s", r.wall_time.as_secs_f64()),
    ])
}

fn write_certificate(cfg: &ExperimentConfig, out: &Path, name: &str, cert: &Certificate) -> Result<(), CliError> {
    let control_ref = if cfg.save_paths {
        cert.control.as_path().save_dir(&out.join("control"), Representation::Spectral)?;
        Some("control".to_string())
    } else {
        None
    };
    write_json(out, name, &cert.summary(&cfg.model, control_ref))?;
    let mut w = create(out, "residuals.csv")?;
    writeln!(w, "iteration,residual")?;
    for (i, r) in cert.residual_history.iter().enumerate() {
        writeln!(w, "{i},{}", num(*r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn certificate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let target = cfg.target.build(cfg.grid(), cfg.seed);
    let c = &cfg.certificate;
    let cert = quasipotential_certificate(&target, c.eps_seg, c.horizon, cfg.solver.dt, &cfg.model, &c.options)?;
    write_certificate(cfg, out, "certificate.json", &cert)?;
    let s = action(&target, &cfg.model);
    Ok(vec![
        format!("S(target): {}", num(s)),
        format!("cost/2: {}", num(cert.cost / 2.0)),
        format!("relative gap: {}", num((cert.cost / 2.0 - s) / s)),
        format!("endpoint error: {}", num(cert.endpoint_error)),
    ])
}

pub fn control(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let target = cfg.target.build(cfg.grid(), cfg.seed);
    let c = &cfg.control;
    let cert = nonlinear_control_to(&target, c.horizon, cfg.solver.dt, &cfg.model, &c.options)?;
    write_certificate(cfg, out, "control.json", &cert)?;
    Ok(vec![
        format!("cost: {}", num(cert.cost)),
        format!("endpoint H1 residual: {}", num(cert.endpoint_error)),
        format!("iterations: {}", cert.iterations),
    ])
}

#[derive(Serialize)]
struct LowerBoundSummary {
    t0: f64,
    t_bar: f64,
    horizon: f64,
    half_cost: f64,
    budget: f64,
    action_target: f64,
    worst_error: f64,
    error_bound: f64,
    control: Option<String>,
}

pub fn lower_bound(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let z = cfg.target.build(cfg.grid(), cfg.seed);
    let lb = &cfg.lower_bound;
    let r = lower_bound_control(&z, lb.rho, lb.delta, lb.gamma, &cfg.model, &lb.options)?;
    let control_ref = if cfg.save_paths {
        r.control.as_path().save_dir(&out.join("control"), Representation::Spectral)?;
        Some("control".to_string())
    } else {
        None
    };
    let s = action(&z, &cfg.model);
    let summary = LowerBoundSummary {
        t0: r.t0,
        t_bar: r.t_bar,
        horizon: r.horizon(),
        half_cost: r.control.cost(),
        budget: 2.0 * s + lb.gamma / 2.0,
        action_target: s,
        worst_error: r.worst_error(),
        error_bound: lb.delta / 2.0,
        control: control_ref,
    };
    write_json(out, "lower_bound.json", &summary)?;
    let mut w = create(out, "endpoint_errors.csv")?;
    writeln!(w, "sample,error")?;
    for (i, e) in r.endpoint_errors.iter().enumerate() {
        writeln!(w, "{i},{}", num(*e))?;
    }
    w.flush()?;
    Ok(vec![
        format!("T0: {}", num(r.t0)),
        format!("1/2 |h0|^2: {} (budget {})", num(summary.half_cost), num(summary.budget)),
        format!("worst endpoint error: {} (bound {})", num(summary.worst_error), num(summary.error_bound)),
    ])
}

#[derive(Serialize)]
struct LdpSummary {
    rate: f64,
    tube_infimum: Option<f64>,
    slope: Option<f64>,
    intercept: Option<f64>,
    truncated: Vec<f64>,
    fit_error: Option<String>,
}

pub fn mc_ldp(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let g = cfg.grid();
    let m = &cfg.mc_ldp;
    let h = Control::constant(&Field::constant(g, m.amplitude), m.horizon, m.dt)?;
    let exp = LdpExperiment::from_control(&cfg.model, &Field::zeros(g), &h, m.tube.clone())?;
    let report = mc_tube_probability(&exp)?;
    let mut w = create(out, "tube.csv")?;
    write_tube_csv(&mut w, &report.estimates)?;
    w.flush()?;
    let inf = if m.infimum { Some(tube_infimum(&exp)?.value) } else { None };
    let fit = report.fit();
    let summary = LdpSummary {
        rate: report.rate,
        tube_infimum: inf,
        slope: fit.as_ref().ok().map(|f| f.slope),
        intercept: fit.as_ref().ok().map(|f| f.intercept),
        truncated: report.truncated.clone(),
        fit_error: fit.as_ref().err().map(|e| e.to_string()),
    };
    write_json(out, "ldp.json", &summary)?;
    let fit = fit?;
    let mut lines = vec![format!("I(v): {}", num(report.rate))];
    if let Some(v) = inf {
        lines.push(format!("I_tube: {}", num(v)));
    }
    lines.push(format!("fitted rate: {}", num(fit.slope)));
    Ok(lines)
}

fn constants(cfg: &ExperimentConfig, spec: &NoiseSpec, renormalize: bool) -> Result<RenormConstants, CliError> {
    Ok(if renormalize {
        renorm_constants(spec, cfg.model.m2, &RenormOptions { seed: cfg.seed, ..Default::default() })?
    } else {
        RenormConstants::none(spec, cfg.model.m2)
    })
}

pub fn tails(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let t = &cfg.tails;
    let spec = NoiseSpec::new(cfg.grid(), t.kappa, cfg.seed, 0)?;
    let c = constants(cfg, &spec, t.options.sampler.renormalize)?;
    let table = invariant_tail_experiment(&cfg.model, &spec, &c, &t.theta_grid, &t.options)?;
    let mut w = create(out, "tails.csv")?;
    write_tail_csv(&mut w, &table.rows)?;
    w.flush()?;
    let mut w = create(out, "tail_rates.csv")?;
    writeln!(w, "theta,rate")?;
    for (th, r) in &table.difference_rates {
        writeln!(w, "{},{}", num(*th), num(*r))?;
    }
    w.flush()?;
    write_json(out, "tails.json", &table)?;
    let slope = table
        .slope
        .ok_or_else(|| phi4::Error::InsufficientData("fewer than two usable theta levels".into()))?;
    Ok(vec![format!("tail slope: {}", num(slope))])
}

pub fn cdfi(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let c = &cfg.cdfi;
    let g = cfg.grid();
    let spec = NoiseSpec::new(g, c.kappa, cfg.seed, 0)?;
    let base = default_ic(g).scale(c.base_sup);
    let r = cdfi_check(&cfg.model, &spec, &base, &c.magnitudes, &c.options)?;
    let mut w = create(out, "cdfi.csv")?;
    let cols: Vec<String> = c.magnitudes.iter().map(|a| format!("sup_v_x{}", num(*a))).collect();
    writeln!(w, "t,{}", cols.join(","))?;
    for (t, v) in &r.envelope {
        let vals: Vec<String> = v.iter().map(|x| num(*x)).collect();
        writeln!(w, "{},{}", num(*t), vals.join(","))?;
    }
    w.flush()?;
    write_json(out, "cdfi.json", &r)?;
    Ok(vec![
        format!("max window ratio: {}", num(r.max_ratio())),
        format!("envelope exponent: {}", num(r.envelope_exponent)),
    ])
}

pub fn excursions(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let e = &cfg.excursions;
    let g = cfg.grid();
    let spec = ExcursionSpec::new(e.rho, e.lambda, e.n_bar, e.theta, cfg.model.alpha)?;
    let zero = Field::zeros(g);
    let starts: Vec<Field> = (0..e.n_paths).map(|i| sample_start(&zero, e.rho, cfg.model.alpha, cfg.seed, i)).collect();
    let noise = NoiseSpec::new(g, e.kappa, cfg.seed, 0)?;
    let params = ModelParams { eps: e.eps, ..cfg.model };
    let paths = excursion_ensemble(&params, &noise, &starts, e.n_bar, e.dt)?;
    let r = excursion_statistics(&paths, &spec)?;
    let mut w = create(out, "excursions.csv")?;
    writeln!(w, "n,frequency,hit_fraction")?;
    for n in 0..e.n_bar {
        writeln!(w, "{},{},{}", n + 1, num(r.frequency[n]), num(r.hit_pattern[n]))?;
    }
    w.flush()?;
    write_json(out, "excursions.json", &r)?;
    Ok(vec![
        format!("final frequency: {}", num(r.final_frequency())),
        format!("geometric ratio: {}", r.geometric_ratio.map_or("n/a".to_string(), num)),
    ])
}
