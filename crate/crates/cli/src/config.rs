//! Experiment configuration: TOML or JSON, every field optional.

use phi4::control::{ControlOptions, LowerBoundOptions};
use phi4::field::sample::{band_limited, normalized, SpectrumShape};
use phi4::ldp::{TailOptions, TubeKind, TubeOptions};
use phi4::skeleton::TimeScheme;
use phi4::stochastic::CdfiOptions;
use phi4::{Field, GridSpec, ModelParams, NormSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<String>,
    /// Write solved paths and controls as snapshot directories.
    pub save_paths: bool,
    pub model: ModelParams,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub target: TargetConfig,
    pub forcing: ForcingConfig,
    pub certificate: CertificateConfig,
    pub control: ControlConfig,
    pub lower_bound: LowerBoundConfig,
    pub mc_ldp: McLdpConfig,
    pub tails: TailsConfig,
    pub cdfi: CdfiConfig,
    pub excursions: ExcursionsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            workers: None,
            out: None,
            save_paths: true,
            model: ModelParams::default(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            target: TargetConfig::default(),
            forcing: ForcingConfig::default(),
            certificate: CertificateConfig::default(),
            control: ControlConfig::default(),
            lower_bound: LowerBoundConfig::default(),
            mc_ldp: McLdpConfig::default(),
            tails: TailsConfig::default(),
            cdfi: CdfiConfig::default(),
            excursions: ExcursionsConfig::default(),
        }
    }
}

/// Kept apart from `GridSpec` so that every bad value can be reported at once.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { d: 1, n: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub horizon: f64,
    pub scheme: TimeScheme,
    pub eta: Option<f64>,
    pub monitor_p: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { dt: 1e-3, horizon: 1.0, scheme: TimeScheme::Etd1, eta: None, monitor_p: 4.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// amplitude · cos(2π k x₁)
    Mode,
    /// amplitude · cos(2π k x₁) + amplitude/2 · cos(2π (k+1) x₁)
    TwoMode,
    /// Smooth random field with H¹ norm `h1`, drawn from the master seed.
    Random,
    Constant,
}

/// The initial condition of `solve-skeleton` and the target of the control commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: TargetKind,
    pub amplitude: f64,
    pub mode: i64,
    pub h1: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig { kind: TargetKind::Mode, amplitude: 0.5, mode: 1, h1: 1.0 }
    }
}

impl TargetConfig {
    pub fn build(&self, grid: GridSpec, seed: u64) -> Field {
        let axis = |k: i64| {
            let mut v = vec![0i64; grid.d()];
            v[0] = k;
            v
        };
        match self.kind {
            TargetKind::Mode => Field::cosine(grid, &axis(self.mode), self.amplitude),
            TargetKind::TwoMode => Field::cosine(grid, &axis(self.mode), self.amplitude)
                .add(&Field::cosine(grid, &axis(self.mode + 1), self.amplitude / 2.0)),
            TargetKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = band_limited(grid, SpectrumShape::Smooth { s: 2.0 }, &mut rng);
                normalized(&f, NormSpec::Sobolev(1.0), self.h1)
            }
            TargetKind::Constant => Field::constant(grid, self.amplitude),
        }
    }
}

/// h(t) = amplitude · cos(2π k x₁) for t < until, zero afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingConfig {
    pub amplitude: f64,
    pub mode: i64,
    pub until: Option<f64>,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig { amplitude: 0.0, mode: 1, until: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateConfig {
    pub horizon: f64,
    pub eps_seg: f64,
    pub options: ControlOptions,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        CertificateConfig { horizon: 8.0, eps_seg: 0.05, options: ControlOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub horizon: f64,
    pub options: ControlOptions,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig { horizon: 1.0, options: ControlOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerBoundConfig {
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
    pub options: LowerBoundOptions,
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        LowerBoundConfig { rho: 1.0, delta: 0.2, gamma: 0.1, options: LowerBoundOptions::default() }
    }
}

/// Target path w^{h,0} with h ≡ amplitude on the zero mode over [0, horizon].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McLdpConfig {
    pub amplitude: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Also compute the tube infimum surrogate.
    pub infimum: bool,
    pub tube: TubeOptions,
}

impl Default for McLdpConfig {
    fn default() -> Self {
        McLdpConfig {
            amplitude: 1.0,
            horizon: 1.0,
            dt: 1e-3,
            infimum: true,
            tube: TubeOptions { kind: TubeKind::Endpoint, ..TubeOptions::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsConfig {
    pub theta_grid: Vec<f64>,
    pub kappa: f64,
    pub options: TailOptions,
}

impl Default for TailsConfig {
    fn default() -> Self {
        TailsConfig { theta_grid: (0..=6).map(|i| 0.5 + 0.25 * i as f64).collect(), kappa: 0.0, options: TailOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdfiConfig {
    pub magnitudes: Vec<f64>,
    /// Sup norm of the base initial condition.
    pub base_sup: f64,
    pub kappa: f64,
    pub options: CdfiOptions,
}

impl Default for CdfiConfig {
    fn default() -> Self {
        CdfiConfig { magnitudes: vec![1.0, 10.0, 100.0], base_sup: 100.0, kappa: 0.0, options: CdfiOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcursionsConfig {
    /// Noise strength of the ensemble; the model's own eps is not used here.
    pub eps: f64,
    pub rho: f64,
    pub lambda: f64,
    pub n_bar: usize,
    pub theta: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub kappa: f64,
}

impl Default for ExcursionsConfig {
    fn default() -> Self {
        ExcursionsConfig { eps: 0.3, rho: 1.0, lambda: 0.35, n_bar: 5, theta: 0.5, n_paths: 2000, dt: 1e-2, kappa: 0.0 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// A written manifest can be fed back as a config.
#[derive(Deserialize)]
struct ManifestShape {
    config: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: name.clone(), source })?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parse_err = |message: String| ConfigError::Parse { path: name.clone(), message };
        if json {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
            if v.get("config").is_some() && v.get("version").is_some() {
                let m: ManifestShape = serde_json::from_value(v).map_err(|e| parse_err(e.to_string()))?;
                return Ok(m.config);
            }
            serde_json::from_value(v).map_err(|e| parse_err(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.grid.d, self.grid.n).expect("validated")
    }

    /// Every violated constraint, each naming its field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &str, msg: String| {
            if !ok {
                v.push(format!("{field}: {msg}"));
            }
        };
        let g = &self.grid;
        check((1..=3).contains(&g.d), "grid.d", format!("must be 1, 2 or 3 (got {})", g.d));
        check(g.n >= 4 && g.n % 2 == 0, "grid.n", format!("must be even and >= 4 (got {})", g.n));
        for m in self.model.violations() {
            let (field, rest) = m.split_once(' ').unwrap_or(("", &m));
            check(false, &format!("model.{field}"), rest.to_string());
        }
        if let Some(w) = self.workers {
            check(w >= 1, "workers", format!("must be >= 1 (got {w})"));
        }
        let pos = |x: f64| x > 0.0 && x.is_finite();
        let s = &self.solver;
        check(pos(s.dt), "solver.dt", format!("must be positive (got {})", s.dt));
        check(pos(s.horizon), "solver.horizon", format!("must be positive (got {})", s.horizon));
        check(s.monitor_p >= 1.0, "solver.monitor_p", format!("must be >= 1 (got {})", s.monitor_p));
        if pos(s.dt) && pos(s.horizon) {
            check(multiple(s.horizon, s.dt), "solver.horizon", format!("must be a multiple of solver.dt (got {})", s.horizon));
        }
        let t = &self.target;
        check(t.mode >= 0 && t.mode + 1 < g.n as i64 / 2, "target.mode", format!("must lie in the band (got {})", t.mode));
        check(t.amplitude.is_finite(), "target.amplitude", "must be finite".into());
        check(t.h1 >= 0.0, "target.h1", format!("must be >= 0 (got {})", t.h1));
        let f = &self.forcing;
        check(f.mode >= 0 && f.mode < g.n as i64 / 2, "forcing.mode", format!("must lie in the band (got {})", f.mode));
        let c = &self.certificate;
        check(pos(c.horizon), "certificate.horizon", format!("must be positive (got {})", c.horizon));
        check(c.eps_seg > 0.0 && c.eps_seg < c.horizon, "certificate.eps_seg", format!("must lie in (0, horizon) (got {})", c.eps_seg));
        check(pos(self.control.horizon), "control.horizon", format!("must be positive (got {})", self.control.horizon));
        let lb = &self.lower_bound;
        check(lb.rho >= 0.0, "lower_bound.rho", format!("must be >= 0 (got {})", lb.rho));
        check(pos(lb.delta), "lower_bound.delta", format!("must be positive (got {})", lb.delta));
        check(pos(lb.gamma), "lower_bound.gamma", format!("must be positive (got {})", lb.gamma));
        check(lb.options.samples >= 1, "lower_bound.options.samples", "must be >= 1".into());
        let m = &self.mc_ldp;
        check(pos(m.dt), "mc_ldp.dt", format!("must be positive (got {})", m.dt));
        check(pos(m.horizon) && multiple(m.horizon, m.dt), "mc_ldp.horizon", format!("must be a positive multiple of mc_ldp.dt (got {})", m.horizon));
        check(pos(m.tube.delta), "mc_ldp.tube.delta", format!("must be positive (got {})", m.tube.delta));
        check(
            !m.tube.eps_schedule.is_empty()
                && m.tube.eps_schedule.iter().all(|e| pos(*e))
                && m.tube.eps_schedule.windows(2).all(|w| w[1] < w[0]),
            "mc_ldp.tube.eps_schedule",
            "must be nonempty, positive and strictly decreasing".into(),
        );
        check(m.tube.samples >= 1, "mc_ldp.tube.samples", "must be >= 1".into());
        check(m.tube.stride >= 1, "mc_ldp.tube.stride", "must be >= 1".into());
        check(m.tube.kappa >= 0.0, "mc_ldp.tube.kappa", format!("must be >= 0 (got {})", m.tube.kappa));
        let tl = &self.tails;
        check(!tl.theta_grid.is_empty(), "tails.theta_grid", "must be nonempty".into());
        check(tl.options.eps_values.len() >= 2, "tails.options.eps_values", "needs at least 2 values".into());
        check(tl.options.eps_values.iter().all(|e| pos(*e)), "tails.options.eps_values", "must be positive".into());
        check(tl.kappa >= 0.0, "tails.kappa", format!("must be >= 0 (got {})", tl.kappa));
        let sm = &tl.options.sampler;
        check(pos(sm.dt), "tails.options.sampler.dt", format!("must be positive (got {})", sm.dt));
        check(sm.burn_in >= 0.0, "tails.options.sampler.burn_in", format!("must be >= 0 (got {})", sm.burn_in));
        check(sm.n_samples >= 1, "tails.options.sampler.n_samples", "must be >= 1".into());
        check(sm.thinning >= 1, "tails.options.sampler.thinning", "must be >= 1".into());
        check(sm.chains >= 1, "tails.options.sampler.chains", "must be >= 1".into());
        let cd = &self.cdfi;
        check(!cd.magnitudes.is_empty() && cd.magnitudes.iter().all(|a| pos(*a)), "cdfi.magnitudes", "must be nonempty and positive".into());
        check(pos(cd.base_sup), "cdfi.base_sup", format!("must be positive (got {})", cd.base_sup));
        check(cd.kappa >= 0.0, "cdfi.kappa", format!("must be >= 0 (got {})", cd.kappa));
        let o = &cd.options;
        check(pos(o.dt), "cdfi.options.dt", format!("must be positive (got {})", o.dt));
        check(pos(o.stiffness), "cdfi.options.stiffness", format!("must be positive (got {})", o.stiffness));
        check(
            o.window.0 > 0.0 && o.window.0 <= o.window.1 && o.window.1 <= o.horizon,
            "cdfi.options.window",
            format!("must satisfy 0 < a <= b <= horizon (got {:?})", o.window),
        );
        let ex = &self.excursions;
        check(ex.eps >= 0.0 && ex.eps.is_finite(), "excursions.eps", format!("must be >= 0 (got {})", ex.eps));
        check(pos(ex.rho), "excursions.rho", format!("must be positive (got {})", ex.rho));
        check(ex.lambda >= 0.0, "excursions.lambda", format!("must be >= 0 (got {})", ex.lambda));
        check(ex.n_bar >= 1, "excursions.n_bar", "must be >= 1".into());
        check(pos(ex.theta), "excursions.theta", format!("must be positive (got {})", ex.theta));
        check(ex.n_paths >= 1, "excursions.n_paths", "must be >= 1".into());
        check(pos(ex.dt) && multiple(1.0, ex.dt), "excursions.dt", format!("1/dt must be an integer (got {})", ex.dt));
        check(ex.kappa >= 0.0, "excursions.kappa", format!("must be >= 0 (got {})", ex.kappa));
        v
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }
}

fn multiple(horizon: f64, dt: f64) -> bool {
    let k = (horizon / dt).round();
    k >= 1.0 && (k * dt - horizon).abs() <= 1e-9 * horizon.max(dt)
}
