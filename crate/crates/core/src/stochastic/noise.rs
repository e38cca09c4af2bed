//! Mollified space-time white noise on the Galerkin band.
//!
//! The increment of step `index` is a pure function of (seed, stream, index):
//! a ChaCha8 generator keyed by the seed, on the given stream, positioned at a
//! word offset derived from the index.

use crate::error::{Error, Result};
use crate::field::{Field, GridSpec, C64, ZERO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Words reserved per step; far more than any band needs.
const WORDS_PER_STEP_LOG2: u32 = 36;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub grid: GridSpec,
    /// Mollification scale κ ≥ 0; 0 keeps the sharp Galerkin cutoff only.
    pub kappa: f64,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseSpec {
    pub fn new(grid: GridSpec, kappa: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa must be >= 0 (got {kappa})")));
        }
        Ok(NoiseSpec { grid, kappa, seed, stream })
    }

    pub fn with_stream(self, stream: u64) -> Self {
        NoiseSpec { stream, ..self }
    }

    /// ρ̂_κ(k) = exp(−κ²4π²|k|²).
    pub fn mollifier(&self, k2: i64) -> f64 {
        (-self.kappa * self.kappa * 4.0 * PI * PI * k2 as f64).exp()
    }

    /// ρ̂_κ on every grid index, zero outside the band.
    pub fn symbol(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| if self.grid.in_band(i) { self.mollifier(self.grid.k2(i)) } else { 0.0 })
            .collect()
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Writes Hermitian-paired complex Gaussians with E|g_k|² = 1 on the band
/// (the zero mode is real N(0,1)) for step `index` into `out`.
pub(crate) fn unit_modes(grid: GridSpec, rng: &mut ChaCha8Rng, index: u64, out: &mut [C64]) {
    rng.set_word_pos((index as u128) << WORDS_PER_STEP_LOG2);
    out.fill(ZERO);
    for i in 0..grid.len() {
        if !grid.in_band(i) {
            continue;
        }
        let j = grid.neg_index(i);
        if j < i {
            continue;
        }
        let x: f64 = rng.sample(StandardNormal);
        if i == j {
            out[i] = C64::new(x, 0.0);
        } else {
            let y: f64 = rng.sample(StandardNormal);
            let v = C64::new(x, y) * FRAC_1_SQRT_2;
            out[i] = v;
            out[j] = v.conj();
        }
    }
}

/// The noise increment ∫ ξ_κ over one step of length dt.
pub fn noise_increment(spec: &NoiseSpec, dt: f64, index: u64) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive (got {dt})")));
    }
    let mut rng = spec.rng();
    let mut c = vec![ZERO; spec.grid.len()];
    unit_modes(spec.grid, &mut rng, index, &mut c);
    let sd = dt.sqrt();
    for (i, v) in c.iter_mut().enumerate() {
        if spec.grid.in_band(i) {
            *v *= sd * spec.mollifier(spec.grid.k2(i));
        }
    }
    Ok(Field::spectral_unchecked(spec.grid, c))
}
