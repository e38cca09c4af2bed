//! Periodic scalar fields on the unit torus T^d.
//!
//! Fourier convention: basis e^{2πik·x}, k ∈ {−n/2,…,n/2−1}^d, and
//! f̂(k) = N⁻¹ Σ_x f(x) e^{−2πik·x}, so that ‖f‖²_{L²} = Σ_k |f̂(k)|².

pub mod dealias;
pub mod fft;
pub mod norm;
pub mod sample;
pub mod snapshot;

use crate::error::{Error, Result};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

pub use norm::{BesovEvaluator, NormSpec};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    d: usize,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    d: usize,
    n: usize,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        GridSpec::new(r.d, r.n)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid { d: g.d, n: g.n }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} n={}", self.d, self.n)
    }
}

impl GridSpec {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("d must be 1, 2 or 3 (got {d})")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n must be even and >= 4 (got {n})")));
        }
        Ok(GridSpec { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points n^d.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumber of array position `i` along one axis.
    #[inline]
    pub fn freq(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    #[inline]
    fn pos(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Wavevector of flat index `idx`; unused trailing entries are 0.
    pub fn wavevector(&self, mut idx: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        for a in (0..self.d).rev() {
            k[a] = self.freq(idx % self.n);
            idx /= self.n;
        }
        k
    }

    pub fn index_of(&self, k: &[i64]) -> usize {
        assert_eq!(k.len(), self.d, "wavevector dimension");
        k.iter().fold(0, |acc, &ki| acc * self.n + self.pos(ki))
    }

    /// Flat index of −k.
    pub fn neg_index(&self, idx: usize) -> usize {
        let k = self.wavevector(idx);
        let neg: Vec<i64> = k[..self.d].iter().map(|v| -v).collect();
        self.index_of(&neg)
    }

    /// |k|² of flat index `idx`.
    pub fn k2(&self, idx: usize) -> i64 {
        self.wavevector(idx).iter().map(|v| v * v).sum()
    }

    /// Modes with every |k_i| ≤ n/2 − 1, the Nyquist-free Galerkin band.
    pub fn in_band(&self, idx: usize) -> bool {
        let h = (self.n / 2) as i64;
        self.wavevector(idx)[..self.d].iter().all(|&v| v > -h)
    }

    pub fn k2_table(&self) -> Vec<i64> {
        (0..self.len()).map(|i| self.k2(i)).collect()
    }

    pub fn band_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.in_band(i)).collect()
    }

    /// Symbol of −Δ on every mode: 4π²|k|².
    pub fn neg_laplacian(&self) -> Vec<f64> {
        self.k2_table()
            .into_iter()
            .map(|k2| 4.0 * PI * PI * k2 as f64)
            .collect()
    }

    /// Physical coordinates of flat index `idx`.
    pub fn point(&self, mut idx: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in (0..self.d).rev() {
            x[a] = (idx % self.n) as f64 / self.n as f64;
            idx /= self.n;
        }
        x
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        GridSpec::new(self.d, n)
    }
}

/// Real field held as grid values and/or Fourier coefficients; the missing
/// representation is computed on first access.
#[derive(Clone)]
pub struct Field {
    grid: GridSpec,
    values: OnceLock<Vec<f64>>,
    coeffs: OnceLock<Vec<C64>>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("physical", &self.values.get().is_some())
            .field("spectral", &self.coeffs.get().is_some())
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.coeffs() == other.coeffs()
    }
}

impl Field {
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Field {
            grid,
            values: OnceLock::from(values),
            coeffs: OnceLock::new(),
        })
    }

    /// Coefficients are assumed Hermitian; the physical view keeps the real part.
    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Field {
            grid,
            values: OnceLock::new(),
            coeffs: OnceLock::from(coeffs),
        })
    }

    pub(crate) fn spectral_unchecked(grid: GridSpec, coeffs: Vec<C64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        Field {
            grid,
            values: OnceLock::new(),
            coeffs: OnceLock::from(coeffs),
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::spectral_unchecked(grid, vec![ZERO; grid.len()])
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        let mut coeffs = vec![ZERO; grid.len()];
        coeffs[0] = C64::new(c, 0.0);
        Self::spectral_unchecked(grid, coeffs)
    }

    /// a·cos(2π k·x).
    pub fn cosine(grid: GridSpec, k: &[i64], a: f64) -> Self {
        let mut coeffs = vec![ZERO; grid.len()];
        let i = grid.index_of(k);
        let j = grid.index_of(&k.iter().map(|v| -v).collect::<Vec<_>>());
        if i == j {
            coeffs[i] += C64::new(a, 0.0);
        } else {
            coeffs[i] += C64::new(a / 2.0, 0.0);
            coeffs[j] += C64::new(a / 2.0, 0.0);
        }
        Self::spectral_unchecked(grid, coeffs)
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len())
            .map(|i| f(&grid.point(i)[..grid.d()]))
            .collect();
        Field {
            grid,
            values: OnceLock::from(values),
            coeffs: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.values.get_or_init(|| {
            let mut buf = self.coeffs.get().expect("field has no representation").clone();
            fft::inverse(self.grid.d(), self.grid.n(), &mut buf);
            buf.into_iter().map(|c| c.re).collect()
        })
    }

    pub fn coeffs(&self) -> &[C64] {
        self.coeffs.get_or_init(|| {
            let mut buf: Vec<C64> = self
                .values
                .get()
                .expect("field has no representation")
                .iter()
                .map(|&v| C64::new(v, 0.0))
                .collect();
            fft::forward(self.grid.d(), self.grid.n(), &mut buf);
            buf
        })
    }

    pub fn has_values(&self) -> bool {
        self.values.get().is_some()
    }

    pub fn has_coeffs(&self) -> bool {
        self.coeffs.get().is_some()
    }

    /// Copy with the spectral representation populated.
    pub fn to_spectral(&self) -> Field {
        self.coeffs();
        self.clone()
    }

    /// Copy with the physical representation populated.
    pub fn to_physical(&self) -> Field {
        self.values();
        self.clone()
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs();
        self.coeffs.into_inner().expect("populated above")
    }

    pub fn coeff(&self, k: &[i64]) -> C64 {
        self.coeffs()[self.grid.index_of(k)]
    }

    /// Largest |coeff(−k) − conj(coeff(k))| relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let c = self.coeffs();
        let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        (0..c.len())
            .map(|i| (c[self.grid.neg_index(i)] - c[i].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn map_coeffs(&self, f: impl Fn(usize, C64) -> C64) -> Field {
        let c = self.coeffs().iter().enumerate().map(|(i, &v)| f(i, v)).collect();
        Field::spectral_unchecked(self.grid, c)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_values(self.grid, self.values().iter().map(|&v| f(v)).collect())
            .expect("same length")
    }

    pub fn scale(&self, a: f64) -> Field {
        if self.has_values() && !self.has_coeffs() {
            self.map_values(|v| a * v)
        } else {
            self.map_coeffs(|_, c| c * a)
        }
    }

    /// a·self + b·other.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Field {
        self.check_grid(other);
        if self.has_values() && other.has_values() && !(self.has_coeffs() && other.has_coeffs()) {
            let v = self
                .values()
                .iter()
                .zip(other.values())
                .map(|(x, y)| a * x + b * y)
                .collect();
            return Field::from_values(self.grid, v).expect("same length");
        }
        let c = self
            .coeffs()
            .iter()
            .zip(other.coeffs())
            .map(|(x, y)| x * a + y * b)
            .collect();
        Field::spectral_unchecked(self.grid, c)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.lincomb(1.0, other, -1.0)
    }

    /// L² inner product ∫ f g dx.
    pub fn inner(&self, other: &Field) -> f64 {
        self.check_grid(other);
        self.coeffs()
            .iter()
            .zip(other.coeffs())
            .map(|(x, y)| x.re * y.re + x.im * y.im)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// (1 − Δ)-weighted norm, the H¹ norm used throughout.
    pub fn h1_norm(&self) -> f64 {
        self.norm(NormSpec::Sobolev(1.0)).expect("valid spec")
    }

    pub fn norm(&self, spec: NormSpec) -> Result<f64> {
        norm::norm(self, spec)
    }

    /// Zero-mode (spatial mean).
    pub fn mean(&self) -> f64 {
        self.coeffs()[0].re
    }

    /// Galerkin projection onto the Nyquist-free band.
    pub fn band_projected(&self) -> Field {
        let g = self.grid;
        self.map_coeffs(|i, c| if g.in_band(i) { c } else { ZERO })
    }

    pub fn is_finite(&self) -> bool {
        match (self.coeffs.get(), self.values.get()) {
            (Some(c), _) => c.iter().all(|v| v.re.is_finite() && v.im.is_finite()),
            (None, Some(v)) => v.iter().all(|x| x.is_finite()),
            (None, None) => unreachable!("field always has a representation"),
        }
    }

    /// Spectral interpolation onto a finer grid with `m` points per axis.
    pub fn resample(&self, m: usize) -> Result<Field> {
        let fine = self.grid.with_n(m)?;
        if m < self.grid.n() {
            return Err(Error::InvalidArgument("resample only refines".into()));
        }
        let mut c = vec![ZERO; fine.len()];
        let h = (self.grid.n() / 2) as i64;
        for (i, &v) in self.coeffs().iter().enumerate() {
            let k = self.grid.wavevector(i);
            let k = &k[..self.grid.d()];
            if k.iter().any(|&x| x == -h) && m > self.grid.n() {
                // split the Nyquist coefficient symmetrically to keep the field real
                let mut parts = vec![(k.to_vec(), v)];
                for a in 0..k.len() {
                    if k[a] == -h {
                        let mut next = Vec::new();
                        for (kk, vv) in parts {
                            let mut kp = kk.clone();
                            kp[a] = h;
                            next.push((kk, vv * 0.5));
                            next.push((kp, vv * 0.5));
                        }
                        parts = next;
                    }
                }
                for (kk, vv) in parts {
                    c[fine.index_of(&kk)] += vv;
                }
            } else {
                c[fine.index_of(k)] += v;
            }
        }
        Ok(Field::spectral_unchecked(fine, c))
    }

    pub(crate) fn check_grid(&self, other: &Field) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
    }
}
