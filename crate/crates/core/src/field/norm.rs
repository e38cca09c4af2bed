//! Lᵖ, H^α, Besov B^α_{p,q} and Hölder–Besov 𝒞^α norms.

use super::fft::FftNd;
use super::{Field, GridSpec, C64, ZERO};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `p` and `q` may be `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormSpec {
    Lp(f64),
    /// Weight (1 + 4π²|k|²)^{α/2}, the symbol of (1 − Δ)^{α/2}.
    Sobolev(f64),
    Besov { alpha: f64, p: f64, q: f64 },
    /// Same as `Besov { alpha, p: ∞, q: ∞ }`.
    Hoelder(f64),
}

impl NormSpec {
    fn validate(&self) -> Result<()> {
        let bad = |x: f64| x.is_nan() || x < 1.0;
        match *self {
            NormSpec::Lp(p) if bad(p) => Err(Error::InvalidArgument(format!("p = {p} < 1"))),
            NormSpec::Besov { p, q, .. } if bad(p) || bad(q) => Err(Error::InvalidArgument(
                format!("Besov exponents must be >= 1 (p = {p}, q = {q})"),
            )),
            _ => Ok(()),
        }
    }
}

pub fn lp_of_values(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let n = values.len() as f64;
    if p == 2.0 {
        return (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    }
    (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / n).powf(1.0 / p)
}

pub fn sobolev_weight(k2: i64, alpha: f64) -> f64 {
    (1.0 + 4.0 * PI * PI * k2 as f64).powf(alpha)
}

pub fn norm(f: &Field, spec: NormSpec) -> Result<f64> {
    spec.validate()?;
    Ok(match spec {
        NormSpec::Lp(p) => lp_of_values(f.values(), p),
        NormSpec::Sobolev(alpha) => {
            let g = f.grid();
            f.coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| sobolev_weight(g.k2(i), alpha) * c.norm_sqr())
                .sum::<f64>()
                .sqrt()
        }
        NormSpec::Besov { alpha, p, q } => BesovEvaluator::new(f.grid(), alpha, p, q)?.eval(f.coeffs()),
        NormSpec::Hoelder(alpha) => {
            BesovEvaluator::new(f.grid(), alpha, f64::INFINITY, f64::INFINITY)?.eval(f.coeffs())
        }
    })
}

/// Dyadic block index of |k|²: −1 for k = 0, else the j with 4^{j−1} ≤ |k|² < 4^j.
pub fn block_of(k2: i64) -> i32 {
    if k2 == 0 {
        return -1;
    }
    let mut j = 1;
    while k2 >= 1i64 << (2 * j) {
        j += 1;
    }
    j
}

/// Precomputed block masks and scratch for repeated Besov evaluations.
pub struct BesovEvaluator {
    alpha: f64,
    p: f64,
    q: f64,
    blocks: Vec<(i32, Vec<usize>)>,
    buf: Vec<C64>,
    vals: Vec<f64>,
    inv: FftNd,
}

impl BesovEvaluator {
    pub fn new(grid: GridSpec, alpha: f64, p: f64, q: f64) -> Result<Self> {
        NormSpec::Besov { alpha, p, q }.validate()?;
        let mut blocks: Vec<(i32, Vec<usize>)> = Vec::new();
        for i in 0..grid.len() {
            let j = block_of(grid.k2(i));
            match blocks.iter_mut().find(|(b, _)| *b == j) {
                Some((_, v)) => v.push(i),
                None => blocks.push((j, vec![i])),
            }
        }
        blocks.sort_by_key(|(j, _)| *j);
        Ok(BesovEvaluator {
            alpha,
            p,
            q,
            blocks,
            buf: vec![ZERO; grid.len()],
            vals: vec![0.0; grid.len()],
            inv: FftNd::new(grid.d(), grid.n(), true),
        })
    }

    pub fn hoelder(grid: GridSpec, alpha: f64) -> Self {
        Self::new(grid, alpha, f64::INFINITY, f64::INFINITY).expect("valid exponents")
    }

    /// Per-block weighted norms 2^{jα}‖Δ_j f‖_{L^p}, in increasing j.
    pub fn block_norms(&mut self, coeffs: &[C64]) -> Vec<(i32, f64)> {
        let mut out = Vec::with_capacity(self.blocks.len());
        for (j, idx) in &self.blocks {
            self.buf.fill(ZERO);
            for &i in idx {
                self.buf[i] = coeffs[i];
            }
            self.inv.process(&mut self.buf);
            for (v, b) in self.vals.iter_mut().zip(&self.buf) {
                *v = b.re;
            }
            out.push((*j, 2f64.powf(*j as f64 * self.alpha) * lp_of_values(&self.vals, self.p)));
        }
        out
    }

    pub fn eval(&mut self, coeffs: &[C64]) -> f64 {
        let b = self.block_norms(coeffs);
        if self.q.is_infinite() {
            b.iter().fold(0.0, |m, (_, v)| m.max(*v))
        } else {
            b.iter().map(|(_, v)| v.powf(self.q)).sum::<f64>().powf(1.0 / self.q)
        }
    }

    /// Hölder case only: the block j and grid index attaining the sup.
    pub fn argmax(&mut self, coeffs: &[C64]) -> (i32, usize, f64) {
        let mut best = (-1, 0, -1.0);
        for bi in 0..self.blocks.len() {
            let j = self.blocks[bi].0;
            self.buf.fill(ZERO);
            for &i in &self.blocks[bi].1 {
                self.buf[i] = coeffs[i];
            }
            self.inv.process(&mut self.buf);
            let w = 2f64.powf(j as f64 * self.alpha);
            for (x, b) in self.buf.iter().enumerate() {
                let v = w * b.re.abs();
                if v > best.2 {
                    best = (j, x, v);
                }
            }
        }
        best
    }

    pub fn block_indices(&self, j: i32) -> &[usize] {
        self.blocks
            .iter()
            .find(|(b, _)| *b == j)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }
}
