//! The twelve acceptance criteria at their stated tolerances. Runs without the
//! libtest harness so that every PASS/FAIL line reaches the console.

use phi4::action::{action, action_gradient, rate_functional};
use phi4::control::*;
use phi4::field::sample::{band_limited, normalized, SpectrumShape};
use phi4::ldp::*;
use phi4::skeleton::{energy_identity_residual, solve_skeleton, SkeletonSolver, SolverOptions};
use phi4::stochastic::*;
use phi4::{Control, Field, GridSpec, ModelParams, NormSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Outcome = Result<(bool, String), phi4::Error>;

fn h1(f: &Field) -> f64 {
    f.norm(NormSpec::Sobolev(1.0)).unwrap()
}

fn grid(d: usize, n: usize) -> GridSpec {
    GridSpec::new(d, n).unwrap()
}

fn axis(g: GridSpec, k: i64) -> Vec<i64> {
    let mut v = vec![0; g.d()];
    v[0] = k;
    v
}

/// V = 2S: certificates for five targets on two grids.
fn c1_certificate() -> Outcome {
    let params = ModelParams::default();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_gap, mut worst_below) = (0.0f64, f64::INFINITY);
    for g in [grid(1, 32), grid(3, 8)] {
        let mut targets: Vec<Field> = [0.25, 0.5, 1.0].iter().map(|&a| Field::cosine(g, &axis(g, 1), a)).collect();
        targets.push(Field::cosine(g, &axis(g, 1), 0.4).add(&Field::cosine(g, &axis(g, 2), 0.2)));
        targets.push(normalized(&band_limited(g, SpectrumShape::Smooth { s: 2.0 }, &mut rng), NormSpec::Sobolev(1.0), 1.0));
        for t in &targets {
            let s = action(t, &params);
            let c = quasipotential_certificate(t, 0.05, 8.0, 1e-3, &params, &ControlOptions::default())?;
            worst_gap = worst_gap.max((c.cost / 2.0 - s).abs() / s);
            worst_below = worst_below.min(c.cost / 2.0 - (s - 1e-8));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst_gap <= 0.05 && worst_below >= 0.0 && secs <= 300.0,
        format!("max |cost/2 - S|/S = {worst_gap:.3e}, min cost/2 - (S - 1e-8) = {worst_below:.3e}, {secs:.1} s"),
    ))
}

/// S(w^{h,0}(T)) ≤ ¼‖h‖² for 100 random band-limited controls.
fn c2_energy_bound() -> Outcome {
    let params = ModelParams::default();
    let g = grid(1, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut violations, mut worst) = (0, f64::NEG_INFINITY);
    for i in 0..100 {
        let a = band_limited(g, SpectrumShape::Smooth { s: 1.0 }, &mut rng).scale(0.5 + 0.05 * i as f64);
        let b = band_limited(g, SpectrumShape::Flat, &mut rng);
        let w = rng.random_range(1.0..10.0);
        let h = Control::from_fn(g, 1.0, 1e-3, |t| a.lincomb((w * t).cos(), &b, t))?;
        let r = solve_skeleton(&Field::zeros(g), Some(&h), 1.0, 1e-3, &params, &SolverOptions::default())?;
        let excess = action(r.path.last(), &params) - 0.25 * h.norm_sq();
        worst = worst.max(excess);
        violations += usize::from(excess > 1e-8);
    }
    Ok((violations == 0, format!("{violations} violations, max S(w(T)) - |h|^2/4 = {worst:.3e}")))
}

/// Rate functional of w^{h,z} against ½‖h‖², at dt and dt/2.
fn c3_rate_recovery() -> Outcome {
    let params = ModelParams::default();
    let g = grid(1, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (mut worst, mut min_ratio, mut next_ratio) = (0.0f64, f64::INFINITY, f64::INFINITY);
    for _ in 0..20 {
        let z = normalized(&band_limited(g, SpectrumShape::Smooth { s: 4.0 }, &mut rng), NormSpec::Sobolev(1.0), 1.0);
        let a = band_limited(g, SpectrumShape::Smooth { s: 1.0 }, &mut rng);
        let b = band_limited(g, SpectrumShape::Smooth { s: 1.0 }, &mut rng);
        let w: (f64, f64) = (rng.random_range(2.0..6.0), rng.random_range(2.0..6.0));
        let run = |dt: f64| -> Result<f64, phi4::Error> {
            let h = Control::from_fn(g, 1.0, dt, |t| a.lincomb((w.0 * t).cos(), &b, (w.1 * t).sin()))?;
            let mut s = SkeletonSolver::new(g, &params, dt, &SolverOptions::etd2())?;
            let v = s.path(&z, Some(&h), h.steps())?;
            Ok((rate_functional(&v, &params)? - h.cost()).abs() / h.cost())
        };
        let (e1, e2, e3) = (run(1e-3)?, run(5e-4)?, run(2.5e-4)?);
        worst = worst.max(e1);
        min_ratio = min_ratio.min(e1 / e2);
        next_ratio = next_ratio.min(e2 / e3);
    }
    // the ratio one halving further down is reported only, to show the trend towards 4
    Ok((
        worst <= 1e-3 && min_ratio >= 3.0,
        format!(
            "max relative error {worst:.3e} at dt = 1e-3, min halving ratio {min_ratio:.2} (next halving {next_ratio:.2})"
        ),
    ))
}

/// Linear endpoint map: right inverse, operator bound, adjointness, Gramian lower bound.
fn c4_linear() -> Outcome {
    let g = grid(1, 32);
    let (m, t, dt) = (1.0f64, 1.0, 1e-3);
    let sym = LinearEndpointSymbol::new(g, m * m, t, dt)?;
    let bound = 2f64.sqrt() * m / (-(-2.0 * t * m * m).exp_m1()).sqrt();
    let gram = -(-2.0 * t * m * m).exp_m1() / (2.0 * m * m);
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (mut res, mut op, mut adj, mut low) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let phi = band_limited(g, SpectrumShape::Smooth { s: 0.5 }, &mut rng);
        let hp = linear_pseudoinverse(&sym, &phi)?;
        res = res.max(h1(&linear_endpoint(&sym, &hp)?.sub(&phi)));
        op = op.max(pseudoinverse_norm_continuum(&sym, &phi) / (bound * h1(&phi)));
        let frames = (0..=sym.steps()).map(|_| band_limited(g, SpectrumShape::Flat, &mut rng)).collect();
        let h = Control::new(0.0, dt, frames)?;
        let psi = band_limited(g, SpectrumShape::Flat, &mut rng);
        let lhs = linear_endpoint(&sym, &h)?.inner(&psi);
        let rhs = h.inner(&linear_adjoint(&sym, &psi)?);
        adj = adj.max((lhs - rhs).abs() / lhs.abs().max(1.0));
        let hm1 = psi.norm(NormSpec::Sobolev(-1.0))?;
        low = low.min(adjoint_norm_continuum(&sym, &psi).powi(2) / (gram * hm1 * hm1));
    }
    Ok((
        res <= 1e-8 && op <= 1.0 + 1e-12 && adj <= 1e-10 && low >= 1.0 - 1e-12,
        format!("residual {res:.2e}, bound ratio {op:.4}, adjointness {adj:.2e}, Gramian ratio {low:.4}"),
    ))
}

/// Exact nonlinear control with damped Picard iterations only.
fn c5_nonlinear_control() -> Outcome {
    let params = ModelParams::default();
    let g = grid(1, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    // ω = 0.9 rather than the default 0.5: the default needs up to 86 steps near the top of the range
    let opts = ControlOptions { method: ControlMethod::Picard, damping: 0.9, tol: 1e-6, max_iter: 50, ..Default::default() };
    let (mut worst, mut iters) = (0.0f64, 0usize);
    for i in 0..10 {
        let target = normalized(
            &band_limited(g, SpectrumShape::Smooth { s: 2.0 }, &mut rng),
            NormSpec::Sobolev(1.0),
            0.2 * (i + 1) as f64,
        );
        let c = nonlinear_control_to(&target, 1.0, 1e-3, &params, &opts)?;
        let mut solver = SkeletonSolver::new(g, &params, 1e-3, &SolverOptions::etd2())?;
        let end = solver.endpoint(&Field::zeros(g), Some(&c.control), c.control.steps())?;
        worst = worst.max(h1(&end.sub(&target)));
        iters = iters.max(c.iterations);
    }
    Ok((worst <= 1e-6 && iters <= 50, format!("max H1 residual {worst:.3e}, max {iters} iterations")))
}

/// L² decay with h = 0 and a first-order p = 2 energy identity.
fn c6_dissipation() -> Outcome {
    let params = ModelParams::default();
    let g = grid(1, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut violations = 0;
    for _ in 0..50 {
        let z = normalized(&band_limited(g, SpectrumShape::Flat, &mut rng), NormSpec::Lp(2.0), rng.random_range(0.1..5.0));
        let r = solve_skeleton(&z, None, 2.0, 1e-3, &params, &SolverOptions::default())?;
        let z2 = z.l2_norm().powi(2);
        for (j, f) in r.path.frames().iter().enumerate() {
            let bound = (-2.0 * params.m2 * r.path.time(j)).exp() * z2;
            violations += usize::from(f.l2_norm().powi(2) > bound * (1.0 + 1e-12));
        }
    }
    let z = normalized(&band_limited(g, SpectrumShape::Smooth { s: 3.0 }, &mut rng), NormSpec::Lp(2.0), 0.5);
    let res = |dt: f64| -> Result<f64, phi4::Error> {
        let r = solve_skeleton(&z, None, 1.0, dt, &params, &SolverOptions::default())?;
        let v = energy_identity_residual(&r.path, None, 2, &params)?;
        Ok(v.iter().fold(0.0, |m: f64, x| m.max(x.abs())))
    };
    let (a, b, c) = (res(2e-3)?, res(1e-3)?, res(5e-4)?);
    // O(dt): the residual at least halves with the step, and is small
    let ok = violations == 0 && b <= 0.6 * a && c <= 0.6 * b && b <= 1e-4;
    Ok((ok, format!("{violations} decay violations, p = 2 residuals {a:.2e} {b:.2e} {c:.2e} at dt = 2e-3, 1e-3, 5e-4")))
}

/// DS against central differences.
fn c7_gradient() -> Outcome {
    let params = ModelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let tau = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..50 {
        let g = if i % 2 == 0 { grid(1, 16) } else { grid(3, 8) };
        let phi = normalized(&band_limited(g, SpectrumShape::Smooth { s: 1.0 }, &mut rng), NormSpec::Lp(2.0), 1.5);
        let psi = normalized(&band_limited(g, SpectrumShape::Smooth { s: 1.0 }, &mut rng), NormSpec::Lp(2.0), 1.0);
        let exact = action_gradient(&phi, &params).inner(&psi);
        let fd = (action(&phi.lincomb(1.0, &psi, tau), &params) - action(&phi.lincomb(1.0, &psi, -tau), &params)) / (2.0 * tau);
        worst = worst.max((fd - exact).abs() / exact.abs());
    }
    Ok((worst <= 1e-6, format!("max relative error {worst:.3e}")))
}

/// Lower-bound control over the ball of radius ρ around z.
fn c8_lower_bound() -> Outcome {
    let params = ModelParams::default();
    let g = grid(1, 32);
    let (rho, delta, gamma) = (1.0, 0.2, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let targets = [
        Field::cosine(g, &[1], 0.5),
        normalized(&band_limited(g, SpectrumShape::Smooth { s: 2.0 }, &mut rng), NormSpec::Sobolev(1.0), 1.0),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for z in &targets {
        let out = lower_bound_control(z, rho, delta, gamma, &params, &LowerBoundOptions::default())?;
        let budget = 2.0 * action(z, &params) + gamma / 2.0;
        let cost = out.control.cost();
        ok &= cost <= budget && out.worst_error() <= delta / 2.0 && out.endpoint_errors.len() == 50;
        detail.push(format!("cost {cost:.4} / budget {budget:.4}, worst error {:.2e}", out.worst_error()));
    }
    Ok((ok, detail.join("; ")))
}

/// Distance of x to [lo, hi].
fn outside(x: f64, lo: f64, hi: f64) -> f64 {
    (lo - x).max(x - hi).max(0.0)
}

/// Tube probabilities around w^{h,0} with h ≡ 1 on the zero mode, endpoint tube.
fn c9_mc_ldp() -> Outcome {
    let g = grid(1, 16);
    let params = ModelParams::default();
    let start = Instant::now();
    let h = Control::constant(&Field::constant(g, 1.0), 1.0, 1e-3)?;
    let opts = TubeOptions {
        delta: 0.3,
        eps_schedule: vec![0.5, 0.4, 0.3],
        samples: 20_000,
        kind: TubeKind::Endpoint,
        seed: 109,
        ..Default::default()
    };
    let exp = LdpExperiment::from_control(&params, &Field::zeros(g), &h, opts)?;
    let i0 = exp.rate;
    let i_tube = tube_infimum(&exp)?.value;
    let rep = mc_tube_probability(&exp)?;
    let fit = rep.fit()?;
    let (lo, hi) = (0.7 * i_tube, 1.3 * i0);
    let points: Vec<f64> = rep.estimates.iter().map(|e| e.rate_point).collect();
    let dist: Vec<f64> = points.iter().map(|&r| outside(r, lo, hi)).collect();
    let monotone = dist.windows(2).all(|w| w[1] <= w[0]);
    let secs = start.elapsed().as_secs_f64();
    let ok = (0.5..=1.5).contains(&i0)
        && rep.estimates.len() == 3
        && fit.slope >= lo
        && fit.slope <= hi
        && monotone
        && secs <= 1800.0;
    Ok((
        ok,
        format!("fitted rate {:.4} in [{lo:.4}, {hi:.4}], -eps^2 log p = {points:.4?}, {secs:.1} s", fit.slope),
    ))
}

/// Slope of the invariant-measure tail of S against θ.
fn c10_tails() -> Outcome {
    let g = grid(1, 16);
    let params = ModelParams::new(1.0, 0.45, -0.6)?;
    let spec = NoiseSpec::new(g, 0.0, 110, 0)?;
    let opts = TailOptions {
        eps_values: vec![0.45, 0.35],
        sampler: SamplerOptions { n_samples: 1_000_000, thinning: 10, ..Default::default() },
        min_count: 25,
    };
    let thetas: Vec<f64> = (0..=15).map(|i| 0.5 + 0.1 * i as f64).collect();
    let tab = invariant_tail_experiment(&params, &spec, &RenormConstants::none(&spec, params.m2), &thetas, &opts)?;
    let n = tab.rows.iter().map(|r| r.n_samples).min().unwrap_or(0);
    let Some(s) = tab.slope else {
        return Ok((false, "no usable theta levels".into()));
    };
    Ok(((1.4..=2.6).contains(&s) && n >= 1_000_000, format!("slope {s:.4} from {} levels, {n} samples per eps", tab.difference_rates.len())))
}

/// Coming down from infinity across initial magnitudes ×1, ×10, ×100.
fn c11_cdfi() -> Outcome {
    let g = grid(1, 16);
    let params = ModelParams::new(1.0, 0.5, -0.6)?;
    let spec = NoiseSpec::new(g, 0.0, 111, 0)?;
    let base = default_ic(g).scale(100.0);
    let rep = cdfi_check(&params, &spec, &base, &[1.0, 10.0, 100.0], &CdfiOptions::default())?;
    let env = rep.envelope_max();
    let nonincreasing = env.windows(2).all(|w| w[1].1 <= w[0].1);
    let p = rep.envelope_exponent;
    let ok = rep.max_ratio() <= 1.1 && nonincreasing && p > 0.0 && p <= 2.0;
    Ok((ok, format!("max ratio {:.4}, envelope nonincreasing {nonincreasing}, fitted t^-p with p = {p:.3}", rep.max_ratio())))
}

/// Every Monte Carlo output, serialized, on pools of 1 and 4 threads and rerun.
fn c12_determinism() -> Outcome {
    let g = grid(1, 16);
    let run = || -> Result<Vec<u8>, phi4::Error> {
        let mut out = Vec::new();
        let params = ModelParams::default();
        let h = Control::constant(&Field::constant(g, 1.0), 0.5, 1e-3)?;
        let opts = TubeOptions { samples: 2000, kind: TubeKind::Endpoint, seed: 112, min_hits: 0, ..Default::default() };
        let exp = LdpExperiment::from_control(&params, &Field::zeros(g), &h, opts.clone())?;
        write_tube_csv(&mut out, &mc_tube_probability(&exp)?.estimates)?;
        let path_exp = LdpExperiment::from_control(&params, &Field::zeros(g), &h, TubeOptions { kind: TubeKind::Path, ..opts })?;
        write_tube_csv(&mut out, &mc_tube_probability(&path_exp)?.estimates)?;

        let noisy = ModelParams::new(1.0, 0.45, -0.6)?;
        let spec = NoiseSpec::new(g, 0.0, 112, 0)?;
        let tails = TailOptions { sampler: SamplerOptions { n_samples: 20_000, ..Default::default() }, ..Default::default() };
        let tab = invariant_tail_experiment(&noisy, &spec, &RenormConstants::none(&spec, 1.0), &[0.5, 1.0], &tails)?;
        write_tail_csv(&mut out, &tab.rows)?;

        let rep = cdfi_check(&noisy, &spec, &default_ic(g).scale(100.0), &[1.0, 10.0], &CdfiOptions::default())?;
        out.extend(serde_json::to_vec(&rep)?);

        let starts: Vec<Field> = (0..200).map(|i| sample_start(&Field::zeros(g), 1.0, -0.6, 112, i)).collect();
        let paths = excursion_ensemble(&ModelParams::new(1.0, 0.3, -0.6)?, &spec, &starts, 3, 1e-2)?;
        out.extend(serde_json::to_vec(&excursion_statistics(&paths, &ExcursionSpec::new(1.0, 0.35, 3, 0.5, -0.6)?)?)?);

        let samples = sample_invariant(&noisy, &spec, &RenormConstants::none(&spec, 1.0), &SamplerOptions { n_samples: 64, ..Default::default() })?;
        for f in &samples {
            for c in f.coeffs() {
                out.extend(c.re.to_le_bytes());
                out.extend(c.im.to_le_bytes());
            }
        }
        let spec3 = NoiseSpec::new(grid(3, 8), 0.0, 112, 0)?;
        let (c2, se) = c2_monte_carlo(&spec3, 1.0, 2000, 112)?;
        out.extend(c2.to_le_bytes());
        out.extend(se.to_le_bytes());
        Ok(out)
    };
    let pooled = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool").install(run)
    };
    let a = pooled(1)?;
    let b = pooled(4)?;
    let c = pooled(1)?;
    let d = pooled(4)?;
    let ok = a == b && a == c && a == d;
    Ok((ok, format!("{} bytes compared over 4 runs, identical {ok}", a.len())))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("V = 2S certificate", c1_certificate),
        ("one-sided energy bound", c2_energy_bound),
        ("rate-functional recovery", c3_rate_recovery),
        ("linear controllability", c4_linear),
        ("nonlinear exact controllability", c5_nonlinear_control),
        ("skeleton dissipation and decay", c6_dissipation),
        ("gradient correctness", c7_gradient),
        ("lower-bound control construction", c8_lower_bound),
        ("Monte Carlo LDP bracket", c9_mc_ldp),
        ("invariant-measure tail slope", c10_tails),
        ("CDFI shape", c11_cdfi),
        ("determinism", c12_determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".into()),
        };
        failed += usize::from(!pass);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2} ({name}): {detail} [{secs:.1} s]", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
