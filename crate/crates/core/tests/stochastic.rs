use phi4::field::C64;
use phi4::skeleton::{SkeletonSolver, SolverOptions};
use phi4::stochastic::*;
use phi4::{Field, GridSpec, ModelParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

fn lambda(g: GridSpec, i: usize, m2: f64) -> f64 {
    4.0 * PI * PI * g.k2(i) as f64 + m2
}

#[test]
fn per_mode_variance_is_dt() {
    let g = GridSpec::new(1, 8).unwrap();
    let spec = NoiseSpec::new(g, 0.0, 11, 0).unwrap();
    let dt = 0.01;
    let draws = 100_000;
    let modes = [g.index_of(&[0]), g.index_of(&[1]), g.index_of(&[3])];
    let mut acc = [0.0; 3];
    for s in 0..draws {
        let f = noise_increment(&spec, dt, s).unwrap();
        for (a, &m) in acc.iter_mut().zip(&modes) {
            *a += f.coeffs()[m].norm_sqr();
        }
    }
    for (j, a) in acc.iter().enumerate() {
        let mean = a / draws as f64;
        // |c|² is dt·χ²₁ on the zero mode and dt·Exp(1) on paired modes
        let sd = if j == 0 { 2f64.sqrt() } else { 1.0 } * dt / (draws as f64).sqrt();
        assert!((mean - dt).abs() < 3.0 * sd, "mode {j}: {mean}");
    }
}

#[test]
fn increments_are_reproducible_and_index_dependent() {
    let g = GridSpec::new(2, 8).unwrap();
    let spec = NoiseSpec::new(g, 0.05, 7, 3).unwrap();
    let a = noise_increment(&spec, 0.1, 42).unwrap();
    let b = noise_increment(&spec, 0.1, 42).unwrap();
    assert_eq!(a.coeffs(), b.coeffs());
    assert_ne!(a.coeffs(), noise_increment(&spec, 0.1, 43).unwrap().coeffs());
    assert_ne!(a.coeffs(), noise_increment(&spec.with_stream(4), 0.1, 42).unwrap().coeffs());
    assert!(a.hermitian_defect() == 0.0);
}

#[test]
fn strong_mollification_kills_the_top_shell() {
    let g = GridSpec::new(1, 16).unwrap();
    let spec = NoiseSpec::new(g, 0.1, 1, 0).unwrap();
    let rho = spec.symbol();
    // Nyquist shell carries no noise at all, and the top band shell is tiny
    assert_eq!(rho[g.index_of(&[8])], 0.0);
    assert!(rho[g.index_of(&[7])].powi(2) < 0.01);
    let dt = 0.01;
    let mut top = 0.0;
    for s in 0..1000 {
        top += noise_increment(&spec, dt, s).unwrap().coeffs()[g.index_of(&[7])].norm_sqr();
    }
    assert!(top / 1000.0 < 0.01 * dt);
}

#[test]
fn grid_covariance_is_the_band_projector() {
    // cov(u(x), u(y)) = dt Σ_{k∈B} e^{2πik(x−y)} = dt(n δ − (−1)^{x−y}) in d = 1
    let g = GridSpec::new(1, 8).unwrap();
    let spec = NoiseSpec::new(g, 0.0, 5, 0).unwrap();
    let dt = 1.0;
    let draws = 40_000;
    let mut cov = [[0.0f64; 8]; 8];
    for s in 0..draws {
        let f = noise_increment(&spec, dt, s).unwrap();
        let v = f.values();
        for x in 0..8 {
            for y in 0..8 {
                cov[x][y] += v[x] * v[y];
            }
        }
    }
    for x in 0..8 {
        for y in 0..8 {
            let c = cov[x][y] / draws as f64;
            let sign = if (x + y) % 2 == 0 { 1.0 } else { -1.0 };
            let want = dt * (if x == y { 8.0 } else { 0.0 } - sign);
            // Var(u_x u_y) ≤ σ_x² σ_y² + cov² ≤ 2·(7dt)²
            let sd = (2.0f64).sqrt() * 7.0 * dt / (draws as f64).sqrt();
            assert!((c - want).abs() < 3.0 * sd, "({x},{y}): {c} vs {want}");
        }
    }
}

#[test]
fn c1_matches_stationary_spatial_variance() {
    let g = GridSpec::new(1, 16).unwrap();
    let spec = NoiseSpec::new(g, 0.0, 21, 0).unwrap();
    let c = c1(&spec, 1.0);
    let dt = 0.05;
    let mut st = SpdeStepper::with_mass(&spec, dt, 1.0, 1.0, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // start in the stationary law so no burn-in is needed
    let sd: Vec<f64> = (0..g.len())
        .map(|i| if g.in_band(i) { 1.0 / (2.0 * lambda(g, i, 1.0)).sqrt() } else { 0.0 })
        .collect();
    let start = phi4::field::sample::band_limited_with(g, |_| 1.0, &mut rng);
    let mut u: Vec<C64> = start.coeffs().iter().zip(&sd).map(|(c, s)| c * s).collect();
    let mut next = u.clone();
    let steps = 1_000_000u64;
    let mut acc = 0.0;
    for j in 0..steps {
        st.step(&u, j, &mut next).unwrap();
        std::mem::swap(&mut u, &mut next);
        acc += u.iter().map(|c| c.norm_sqr()).sum::<f64>();
    }
    let emp = acc / steps as f64;
    assert!((emp - c).abs() < 0.02 * c, "empirical {emp} vs C1 {c}");
}

#[test]
fn c1_grows_in_two_dimensions_and_converges_in_one() {
    let m2 = 1.0f64;
    let c1_of = |d, n| c1(&NoiseSpec::new(GridSpec::new(d, n).unwrap(), 0.0, 0, 0).unwrap(), m2);
    // d = 1: full lattice sum Σ_k 1/(2(4π²k² + m²)) = coth(m/2)/(4m)
    let limit = 1.0 / (4.0 * (0.5f64).tanh());
    let (a, b, c) = (c1_of(1, 16), c1_of(1, 32), c1_of(1, 64));
    assert!(a < b && b < c && c < limit);
    assert!(limit - c < 0.55 * (limit - b));
    // d = 2: logarithmic growth, constant increments per doubling
    let v: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| c1_of(2, n)).collect();
    let inc: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(inc.iter().all(|x| *x > 0.0));
    // ∫ d²k/(8π²|k|²) over a dyadic shell is ln 2/(4π)
    let shell = 2f64.ln() / (4.0 * PI);
    assert!((inc[2] - shell).abs() < 0.15 * shell, "{inc:?} vs {shell}");
}

#[test]
fn counterterms_scale_with_intensity() {
    let g = GridSpec::new(1, 16).unwrap();
    let spec = NoiseSpec::new(g, 0.0, 0, 0).unwrap();
    let rc = renorm_constants(&spec, 1.0, &RenormOptions::default()).unwrap();
    assert_eq!(rc.c2, 0.0);
    for eps in [0.1, 0.3, 0.7] {
        let params = ModelParams::new(1.0, eps, -0.6).unwrap();
        let st = SpdeStepper::new(&spec, 1e-3, &params, &rc).unwrap();
        assert_eq!(st.mass(), 1.0 - 3.0 * eps * eps * rc.c1);
    }
}

#[test]
fn c2_monte_carlo_matches_mode_sum() {
    let g = GridSpec::new(3, 4).unwrap();
    let m2 = 1.0;
    let spec = NoiseSpec::new(g, 0.0, 0, 0).unwrap();
    let (est, se) = c2_monte_carlo(&spec, m2, 40_000, 99).unwrap();
    // 2 Σ_q Σ_k 1/(4 λ_k λ_{q−k} (λ_q + λ_k + λ_{q−k})) over band pairs
    let band: Vec<[i64; 3]> = (0..g.len()).filter(|&i| g.in_band(i)).map(|i| g.wavevector(i)).collect();
    let lam = |k: [i64; 3]| 4.0 * PI * PI * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64 + m2;
    let mut exact = 0.0;
    for a in &band {
        for b in &band {
            let q = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
            exact += 2.0 / (4.0 * lam(*a) * lam(*b) * (lam(q) + lam(*a) + lam(*b)));
        }
    }
    assert!((est - exact).abs() < 4.0 * se, "{est} ± {se} vs {exact}");
    assert!(se < 0.05 * exact, "{est} ± {se} vs {exact}");
    let rc = renorm_constants(&spec, m2, &RenormOptions { c2_samples: 500, seed: 1 }).unwrap();
    assert!(rc.c2 > 0.0);
    let two = renorm_constants(&NoiseSpec::new(GridSpec::new(2, 8).unwrap(), 0.0, 0, 0).unwrap(), m2, &RenormOptions::default())
        .unwrap();
    assert_eq!(two.c2, 0.0);
}

#[test]
fn zero_intensity_is_a_skeleton_step() {
    let g = GridSpec::new(2, 8).unwrap();
    let params = ModelParams::default();
    let spec = NoiseSpec::new(g, 0.0, 3, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u = phi4::field::sample::band_limited(g, phi4::field::sample::SpectrumShape::Flat, &mut rng);
    let rc = RenormConstants::none(&spec, params.m2);
    let a = step_spde(&u, 1e-3, &params, &spec, &rc, 0).unwrap();
    let mut solver = SkeletonSolver::new(g, &params, 1e-3, &SolverOptions::default()).unwrap();
    let b = solver.endpoint(&u, None, 1).unwrap();
    assert_eq!(a.coeffs(), b.coeffs());
}

#[test]
fn renormalized_step_matches_exponential_euler_formula() {
    let g = GridSpec::new(1, 16).unwrap();
    let params = ModelParams::new(1.0, 0.4, -0.6).unwrap();
    let spec = NoiseSpec::new(g, 0.02, 4, 1).unwrap();
    let rc = renorm_constants(&spec, 1.0, &RenormOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u = phi4::field::sample::band_limited(g, phi4::field::sample::SpectrumShape::Smooth { s: 1.0 }, &mut rng);
    let dt = 2e-3;
    let got = step_spde(&u, dt, &params, &spec, &rc, 17).unwrap();
    // independent evaluation: cube on a fine grid, exact OU noise rescaled from dW
    let mt = 1.0 - 3.0 * 0.16 * rc.c1;
    let fine = u.resample(64).unwrap();
    let fine_cube = Field::from_values(fine.grid(), fine.values().iter().map(|x| x * x * x).collect()).unwrap();
    let cube: Vec<C64> = (0..g.len())
        .map(|i| if g.in_band(i) { fine_cube.coeff(&g.wavevector(i)[..1]) } else { C64::new(0.0, 0.0) })
        .collect();
    let dw = noise_increment(&spec, dt, 17).unwrap();
    for i in 0..g.len() {
        let lam = lambda(g, i, mt);
        let e = (-lam * dt).exp();
        let want = u.coeffs()[i] * e - cube[i] * ((1.0 - e) / lam)
            + dw.coeffs()[i] * (0.4 * ((1.0 - e * e) / (2.0 * lam * dt)).sqrt());
        assert!((got.coeffs()[i] - want).norm() < 1e-13, "mode {i}");
    }
}

#[test]
fn linear_mode_marginals_pass_ks() {
    let g = GridSpec::new(1, 8).unwrap();
    let spec = NoiseSpec::new(g, 0.0, 31, 0).unwrap();
    let (m2, dt) = (1.0, 0.5);
    // exact OU increments: large steps are fine; thinning 10 time units decorrelates
    let mut st = SpdeStepper::with_mass(&spec, dt, m2, 1.0, false).unwrap();
    let mut u = vec![C64::new(0.0, 0.0); g.len()];
    let mut next = u.clone();
    let samples = 100_000;
    let thin = 20;
    let modes = [g.index_of(&[0]), g.index_of(&[2])];
    let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); 2];
    let mut j = 0u64;
    for _ in 0..40 {
        st.step(&u, j, &mut next).unwrap();
        j += 1;
        std::mem::swap(&mut u, &mut next);
    }
    for _ in 0..samples {
        for _ in 0..thin {
            st.step(&u, j, &mut next).unwrap();
            j += 1;
            std::mem::swap(&mut u, &mut next);
        }
        for (x, &m) in xs.iter_mut().zip(&modes) {
            x.push(u[m].re);
        }
    }
    for (x, (&m, paired)) in xs.iter_mut().zip(modes.iter().zip([false, true])) {
        let var = 1.0 / (2.0 * lambda(g, m, m2)) * if paired { 0.5 } else { 1.0 };
        let law = Normal::new(0.0, var.sqrt()).unwrap();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = x.len() as f64;
        let d = x
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let f = law.cdf(*v);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / n.sqrt(), "mode {m}: KS {d}");
    }
}

#[test]
fn sampler_is_reproducible_across_worker_counts() {
    let g = GridSpec::new(1, 16).unwrap();
    let params = ModelParams::new(1.0, 0.4, -0.6).unwrap();
    let spec = NoiseSpec::new(g, 0.0, 77, 0).unwrap();
    let rc = RenormConstants::none(&spec, 1.0);
    let opts = SamplerOptions { n_samples: 50, burn_in: 0.5, chains: 5, ..Default::default() };
    let run = |w: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .unwrap()
            .install(|| sample_invariant(&params, &spec, &rc, &opts).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.len(), 50);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.coeffs(), y.coeffs());
    }
}

#[test]
fn invariant_samples_are_centered_and_shrink_with_intensity() {
    let g = GridSpec::new(1, 16).unwrap();
    let spec = NoiseSpec::new(g, 0.0, 123, 0).unwrap();
    let rc = RenormConstants::none(&spec, 1.0);
    let opts = SamplerOptions { n_samples: 4000, burn_in: 2.0, thinning: 200, chains: 8, dt: 5e-3, renormalize: false };
    let zero_modes = |eps: f64| {
        let p = ModelParams::new(1.0, eps, -0.6).unwrap();
        sample_invariant_map(&p, &spec, &rc, &opts, |f| f.coeffs()[0].re).unwrap()
    };
    let a = zero_modes(0.3);
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var_a = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 4.0 * (var_a / n).sqrt(), "mean {mean}");
    let b = zero_modes(0.15);
    let mb = b.iter().sum::<f64>() / n;
    let var_b = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (n - 1.0);
    // near-Gaussian at small ε: variance ≈ ε²/(2m²)
    let ratio = var_a / var_b;
    assert!(ratio > 3.0 && ratio < 5.0, "variance ratio {ratio}");
    let p0 = ModelParams::new(1.0, 0.0, -0.6).unwrap();
    let zeros = sample_invariant(&p0, &spec, &rc, &SamplerOptions { n_samples: 10, ..opts.clone() }).unwrap();
    assert!(zeros.iter().all(|f| f.coeffs().iter().all(|c| *c == C64::new(0.0, 0.0))));
}

#[test]
fn coming_down_is_uniform_in_the_initial_condition() {
    let g = GridSpec::new(1, 32).unwrap();
    let params = ModelParams::new(1.0, 0.3, -0.6).unwrap();
    let spec = NoiseSpec::new(g, 0.0, 2024, 0).unwrap();
    // base IC with sup norm 10², then ×1, ×10, ×100
    let base = default_ic(g).scale(100.0);
    let rep = cdfi_check(&params, &spec, &base, &[1.0, 10.0, 100.0], &CdfiOptions::default()).unwrap();
    assert!(rep.max_ratio() <= 1.1, "{:?}", rep.sup_window);
    let env = rep.envelope_max();
    for w in env.windows(2) {
        assert!(w[1].1 <= w[0].1, "{env:?}");
    }
    assert!(rep.envelope_exponent > 0.0 && rep.envelope_exponent <= 2.0, "{}", rep.envelope_exponent);
}

#[test]
fn coming_down_from_zero_without_noise_is_trivial() {
    let g = GridSpec::new(1, 16).unwrap();
    let params = ModelParams::default();
    let spec = NoiseSpec::new(g, 0.0, 1, 0).unwrap();
    let rep = cdfi_check(&params, &spec, &Field::zeros(g), &[1.0], &CdfiOptions::default()).unwrap();
    assert_eq!(rep.sup_window, vec![0.0]);
}

#[test]
fn ndjson_records_parse_back() {
    let g = GridSpec::new(1, 8).unwrap();
    let f = Field::cosine(g, &[1], 0.5);
    let recs = vec![SnapshotStats::of(0.0, &f, &ModelParams::default()), SnapshotStats::of(1.0, &f.scale(2.0), &ModelParams::default())];
    let mut buf = Vec::new();
    write_ndjson(&mut buf, &recs).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let back: Vec<SnapshotStats> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, recs);
}
