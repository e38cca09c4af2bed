//! Time-indexed sequences of fields on a uniform grid.

use crate::error::{Error, Result};
use crate::field::snapshot::{self, Representation};
use crate::field::{Field, GridSpec};
use serde::{Deserialize, Serialize};
use std::path::Path as FsPath;

/// Number of steps of size `dt` in `horizon`; the ratio must be an integer.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon >= 0.0 && dt > 0.0 && horizon.is_finite() && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need horizon >= 0 and dt > 0 (got {horizon}, {dt})"
        )));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} is not a multiple of dt {dt}"
        )));
    }
    Ok(n as usize)
}

#[derive(Clone, Debug)]
pub struct Path {
    grid: GridSpec,
    t0: f64,
    dt: f64,
    frames: Vec<Field>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PathManifest {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub grid: GridSpec,
    pub frames: usize,
    pub representation: String,
}

impl Path {
    pub fn new(t0: f64, dt: f64, frames: Vec<Field>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("a path needs at least one frame".into()))?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive (got {dt})")));
        }
        let grid = first.grid();
        if let Some(f) = frames.iter().find(|f| f.grid() != grid) {
            return Err(Error::GridMismatch(grid.to_string(), f.grid().to_string()));
        }
        Ok(Path { grid, t0, dt, frames })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.steps() as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of frames (steps + 1).
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn frames(&self) -> &[Field] {
        &self.frames
    }

    pub fn frame(&self, j: usize) -> &Field {
        &self.frames[j]
    }

    pub fn first(&self) -> &Field {
        &self.frames[0]
    }

    pub fn last(&self) -> &Field {
        self.frames.last().expect("non-empty")
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn into_frames(self) -> Vec<Field> {
        self.frames
    }

    /// Same frames in reverse order, starting at the same t0.
    pub fn reversed(&self) -> Path {
        let mut frames = self.frames.clone();
        frames.reverse();
        Path { frames, ..self.clone() }
    }

    /// Frames j0..=j1 as a path starting at time(j0).
    pub fn slice(&self, j0: usize, j1: usize) -> Path {
        Path {
            grid: self.grid,
            t0: self.time(j0),
            dt: self.dt,
            frames: self.frames[j0..=j1].to_vec(),
        }
    }

    pub fn manifest(&self, repr: Representation) -> PathManifest {
        PathManifest {
            t0: self.t0,
            t1: self.t1(),
            dt: self.dt,
            grid: self.grid,
            frames: self.len(),
            representation: match repr {
                Representation::Physical => "physical".into(),
                Representation::Spectral => "spectral".into(),
            },
        }
    }

    /// Writes `manifest.json` and `frame_000000.bin`, … into `dir`.
    pub fn save_dir(&self, dir: &FsPath, repr: Representation) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (j, f) in self.frames.iter().enumerate() {
            snapshot::save(&dir.join(format!("frame_{j:06}.bin")), f, repr)?;
        }
        let m = serde_json::to_string_pretty(&self.manifest(repr))?;
        std::fs::write(dir.join("manifest.json"), m + "\n")?;
        Ok(())
    }

    pub fn load_dir(dir: &FsPath) -> Result<Path> {
        let m: PathManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let frames = (0..m.frames)
            .map(|j| snapshot::load(&dir.join(format!("frame_{j:06}.bin"))))
            .collect::<Result<Vec<_>>>()?;
        let p = Path::new(m.t0, m.dt, frames)?;
        if p.grid != m.grid {
            return Err(Error::Format("manifest grid does not match frames".into()));
        }
        Ok(p)
    }
}

/// Element of L²([t0,t1]; L²), piecewise constant: frame j acts on [t_j, t_{j+1}).
/// The last frame is kept for layout parity with `Path` and does not enter costs.
#[derive(Clone, Debug)]
pub struct Control {
    path: Path,
}

impl Control {
    pub fn from_path(path: Path) -> Self {
        Control { path }
    }

    pub fn new(t0: f64, dt: f64, frames: Vec<Field>) -> Result<Self> {
        Ok(Control { path: Path::new(t0, dt, frames)? })
    }

    pub fn zeros(grid: GridSpec, horizon: f64, dt: f64) -> Result<Self> {
        let n = step_count(horizon, dt)?;
        Self::new(0.0, dt, vec![Field::zeros(grid); n + 1])
    }

    /// h(t) = f(t) sampled at the left endpoint of every step.
    pub fn from_fn(grid: GridSpec, horizon: f64, dt: f64, f: impl Fn(f64) -> Field) -> Result<Self> {
        let n = step_count(horizon, dt)?;
        let frames: Vec<Field> = (0..=n).map(|j| f(j as f64 * dt)).collect();
        if let Some(x) = frames.iter().find(|x| x.grid() != grid) {
            return Err(Error::GridMismatch(grid.to_string(), x.grid().to_string()));
        }
        Self::new(0.0, dt, frames)
    }

    pub fn constant(f: &Field, horizon: f64, dt: f64) -> Result<Self> {
        Self::from_fn(f.grid(), horizon, dt, |_| f.clone())
    }

    pub fn as_path(&self) -> &Path {
        &self.path
    }

    pub fn into_path(self) -> Path {
        self.path
    }

    pub fn grid(&self) -> GridSpec {
        self.path.grid()
    }

    pub fn dt(&self) -> f64 {
        self.path.dt()
    }

    pub fn steps(&self) -> usize {
        self.path.steps()
    }

    pub fn horizon(&self) -> f64 {
        self.path.t1() - self.path.t0()
    }

    pub fn frames(&self) -> &[Field] {
        self.path.frames()
    }

    /// Value on step j; None past the end (zero extension).
    pub fn step(&self, j: usize) -> Option<&Field> {
        if j < self.steps() {
            Some(self.path.frame(j))
        } else {
            None
        }
    }

    /// ½ Σ_j ‖h_j‖² dt over the steps.
    pub fn cost(&self) -> f64 {
        0.5 * self.norm_sq()
    }

    /// Σ_j ‖h_j‖² dt.
    pub fn norm_sq(&self) -> f64 {
        let s: f64 = self.path.frames()[..self.steps()]
            .iter()
            .map(|f| f.l2_norm().powi(2))
            .sum();
        s * self.dt()
    }

    /// Σ_j ⟨h_j, g_j⟩ dt.
    pub fn inner(&self, other: &Control) -> f64 {
        assert_eq!(self.steps(), other.steps(), "controls with different lengths");
        let s: f64 = (0..self.steps())
            .map(|j| self.path.frame(j).inner(other.path.frame(j)))
            .sum();
        s * self.dt()
    }

    pub fn scale(&self, a: f64) -> Control {
        self.map(|f| f.scale(a))
    }

    pub fn lincomb(&self, a: f64, other: &Control, b: f64) -> Control {
        assert_eq!(self.steps(), other.steps(), "controls with different lengths");
        let frames = self
            .frames()
            .iter()
            .zip(other.frames())
            .map(|(x, y)| x.lincomb(a, y, b))
            .collect();
        Control { path: Path { frames, ..self.path.clone() } }
    }

    pub fn map(&self, f: impl Fn(&Field) -> Field) -> Control {
        let frames = self.frames().iter().map(f).collect();
        Control { path: Path { frames, ..self.path.clone() } }
    }

    /// `self` on [0, T₁) followed by `next` shifted to start at T₁.
    pub fn concat(&self, next: &Control) -> Result<Control> {
        if (self.dt() - next.dt()).abs() > 1e-12 * self.dt() {
            return Err(Error::InvalidArgument("controls have different steps".into()));
        }
        let mut frames = self.frames()[..self.steps()].to_vec();
        frames.extend_from_slice(next.frames());
        Control::new(self.path.t0(), self.dt(), frames)
    }

    /// Zero on [0, s) then `self` shifted by s; `s` must be a multiple of dt.
    pub fn delayed(&self, s: f64) -> Result<Control> {
        let k = step_count(s, self.dt())?;
        let mut frames = vec![Field::zeros(self.grid()); k];
        frames.extend_from_slice(self.frames());
        Control::new(self.path.t0(), self.dt(), frames)
    }
}
