//! Pointwise nonlinearities evaluated on a zero-padded grid.
//!
//! With the default padding of 2n per axis the band projection of w³ and the
//! integral of w⁴ are exact for band-limited w.

use super::fft::FftNd;
use super::{GridSpec, C64, ZERO};

pub struct Dealiaser {
    grid: GridSpec,
    m: usize,
    map: Vec<(usize, usize)>,
    buf: Vec<C64>,
    fwd: FftNd,
    inv: FftNd,
}

impl Dealiaser {
    pub fn new(grid: GridSpec) -> Self {
        Self::with_size(grid, 2 * grid.n())
    }

    /// Padded grid with `m ≥ n` points per axis.
    pub fn with_size(grid: GridSpec, m: usize) -> Self {
        assert!(m >= grid.n() && m % 2 == 0);
        let pad = GridSpec::new(grid.d(), m).expect("padded grid is valid");
        let map = (0..grid.len())
            .filter(|&i| grid.in_band(i))
            .map(|i| (i, pad.index_of(&grid.wavevector(i)[..grid.d()])))
            .collect();
        Dealiaser {
            grid,
            m,
            map,
            buf: vec![ZERO; pad.len()],
            fwd: FftNd::new(grid.d(), m, false),
            inv: FftNd::new(grid.d(), m, true),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn padded_len(&self) -> usize {
        self.buf.len()
    }

    pub fn padded_n(&self) -> usize {
        self.m
    }

    /// Fill the buffer with padded physical values of the band part of `input`.
    fn load(&mut self, input: &[C64]) {
        debug_assert_eq!(input.len(), self.grid.len());
        self.buf.fill(ZERO);
        for &(g, p) in &self.map {
            self.buf[p] = input[g];
        }
        self.inv.process(&mut self.buf);
    }

    /// out = P(f(P input)) where P is the band projection.
    pub fn apply(&mut self, input: &[C64], f: impl Fn(f64) -> f64, out: &mut [C64]) {
        self.load(input);
        for v in self.buf.iter_mut() {
            *v = C64::new(f(v.re), 0.0);
        }
        self.fwd.process(&mut self.buf);
        out.fill(ZERO);
        for &(g, p) in &self.map {
            out[g] = self.buf[p];
        }
    }

    pub fn cube(&mut self, input: &[C64], out: &mut [C64]) {
        self.apply(input, |x| x * x * x, out)
    }

    /// Mean over the padded grid of f(w).
    pub fn mean_of(&mut self, input: &[C64], f: impl Fn(f64) -> f64) -> f64 {
        self.load(input);
        self.buf.iter().map(|v| f(v.re)).sum::<f64>() / self.buf.len() as f64
    }

    /// Padded physical values (real parts) of the band part of `input`.
    pub fn padded_values(&mut self, input: &[C64]) -> Vec<f64> {
        self.load(input);
        self.buf.iter().map(|v| v.re).collect()
    }

    /// out = P(f(Pw, Pu)).
    pub fn apply_pair(&mut self, w: &[C64], u: &[C64], f: impl Fn(f64, f64) -> f64, out: &mut [C64]) {
        let a = self.padded_values(w);
        self.load(u);
        for (v, x) in self.buf.iter_mut().zip(&a) {
            *v = C64::new(f(*x, v.re), 0.0);
        }
        self.fwd.process(&mut self.buf);
        out.fill(ZERO);
        for &(g, p) in &self.map {
            out[g] = self.buf[p];
        }
    }

    /// Mean of f(w)·g(u) for two band fields.
    pub fn mean_of_pair(&mut self, w: &[C64], u: &[C64], f: impl Fn(f64, f64) -> f64) -> f64 {
        let a = self.padded_values(w);
        self.load(u);
        a.iter().zip(&self.buf).map(|(x, y)| f(*x, y.re)).sum::<f64>() / a.len() as f64
    }

    /// Spectral coefficients of f(w) on the padded grid (no projection).
    pub fn padded_spectrum(&mut self, input: &[C64], f: impl Fn(f64) -> f64) -> (GridSpec, Vec<C64>) {
        self.load(input);
        for v in self.buf.iter_mut() {
            *v = C64::new(f(v.re), 0.0);
        }
        self.fwd.process(&mut self.buf);
        (GridSpec::new(self.grid.d(), self.m).expect("valid"), self.buf.clone())
    }
}
