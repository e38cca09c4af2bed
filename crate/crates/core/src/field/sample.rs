//! Random band-limited fields by spectral synthesis.
//!
//! Each band mode gets an independent standard complex Gaussian times an
//! amplitude depending only on |k|; pairs ±k are conjugate so the field is real.

use super::{Field, GridSpec, NormSpec, C64, ZERO};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectrumShape {
    Flat,
    /// (1 + 4π²|k|²)^{−s/2}
    Smooth { s: f64 },
    /// |k|^{−α−d/2} away from k = 0: bounded block norms in 𝒞^α.
    Rough { alpha: f64 },
}

impl SpectrumShape {
    pub fn amplitude(&self, d: usize, k2: i64) -> f64 {
        match *self {
            SpectrumShape::Flat => 1.0,
            SpectrumShape::Smooth { s } => (1.0 + 4.0 * PI * PI * k2 as f64).powf(-s / 2.0),
            SpectrumShape::Rough { alpha } => {
                if k2 == 0 {
                    1.0
                } else {
                    (k2 as f64).sqrt().powf(-alpha - d as f64 / 2.0)
                }
            }
        }
    }
}

pub fn band_limited<R: Rng + ?Sized>(grid: GridSpec, shape: SpectrumShape, rng: &mut R) -> Field {
    band_limited_with(grid, |k2| shape.amplitude(grid.d(), k2), rng)
}

pub fn band_limited_with<R: Rng + ?Sized>(
    grid: GridSpec,
    amplitude: impl Fn(i64) -> f64,
    rng: &mut R,
) -> Field {
    let mut c = vec![ZERO; grid.len()];
    for i in 0..grid.len() {
        if !grid.in_band(i) {
            continue;
        }
        let j = grid.neg_index(i);
        if j < i {
            continue;
        }
        let a = amplitude(grid.k2(i));
        let x: f64 = rng.sample(StandardNormal);
        if i == j {
            c[i] = C64::new(a * x, 0.0);
        } else {
            let y: f64 = rng.sample(StandardNormal);
            let v = C64::new(x, y) * (a * FRAC_1_SQRT_2);
            c[i] = v;
            c[j] = v.conj();
        }
    }
    Field::spectral_unchecked(grid, c)
}

/// Rescale `f` so that `norm(f, spec) = target` (zero stays zero).
pub fn normalized(f: &Field, spec: NormSpec, target: f64) -> Field {
    let n = f.norm(spec).expect("valid norm spec");
    if n == 0.0 {
        f.clone()
    } else {
        f.scale(target / n)
    }
}
