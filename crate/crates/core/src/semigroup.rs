//! The Ornstein–Uhlenbeck semigroup e^{t(Δ−m²)} and Duhamel quadrature.

use crate::error::{Error, Result};
use crate::field::{Field, GridSpec};
use crate::path::Path;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const SERIES_CUTOFF: f64 = 1e-4;

/// φ₁(z) = (e^z − 1)/z.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        z.exp_m1() / z
    }
}

/// φ₂(z) = (e^z − 1 − z)/z².
pub fn phi2(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DuhamelScheme {
    LeftPoint,
    #[default]
    ExponentialTrapezoid,
}

/// Per-mode rates λ_k = 4π²|k|² + m².
#[derive(Clone, Debug)]
pub struct OuSymbol {
    grid: GridSpec,
    m2: f64,
    lambda: Vec<f64>,
}

impl OuSymbol {
    pub fn new(grid: GridSpec, m2: f64) -> Result<Self> {
        if !(m2 > 0.0) {
            return Err(Error::InvalidArgument(format!("m2 must be positive (got {m2})")));
        }
        Ok(Self::shifted(grid, m2))
    }

    /// Any real mass shift, including the non-positive renormalized masses.
    pub(crate) fn shifted(grid: GridSpec, m2: f64) -> Self {
        let lambda = (0..grid.len())
            .map(|i| 4.0 * PI * PI * grid.k2(i) as f64 + m2)
            .collect();
        OuSymbol { grid, m2, lambda }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn apply(&self, t: f64, f: &Field) -> Result<Field> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("semigroup time must be >= 0 (got {t})")));
        }
        self.check(f)?;
        Ok(f.map_coeffs(|i, c| c * (-t * self.lambda[i]).exp()))
    }

    /// ∫_{t0}^{t1} e^{(t1−s)(Δ−m²)} h(s) ds over the frames of `forcing`.
    pub fn duhamel(&self, forcing: &Path, scheme: DuhamelScheme) -> Result<Field> {
        if forcing.is_empty() {
            return Err(Error::InvalidArgument("empty forcing path".into()));
        }
        self.check(forcing.first())?;
        let dt = forcing.dt();
        let nsteps = forcing.steps();
        let mut acc = vec![crate::field::ZERO; self.grid.len()];
        for (i, a) in acc.iter_mut().enumerate() {
            let lam = self.lambda[i];
            let z = -lam * dt;
            let (w0, w1) = match scheme {
                DuhamelScheme::LeftPoint => (dt * z.exp(), 0.0),
                DuhamelScheme::ExponentialTrapezoid => {
                    let p2 = phi2(z);
                    (dt * (phi1(z) - p2), dt * p2)
                }
            };
            for j in 0..nsteps {
                // decay from s_{j+1} to t1
                let e = (-((nsteps - 1 - j) as f64) * dt * lam).exp();
                *a += (forcing.frame(j).coeffs()[i] * w0 + forcing.frame(j + 1).coeffs()[i] * w1) * e;
            }
        }
        Ok(Field::spectral_unchecked(self.grid, acc))
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch(self.grid.to_string(), f.grid().to_string()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample::{band_limited, SpectrumShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phi_functions_are_continuous_at_the_cutoff() {
        for z in [SERIES_CUTOFF * 0.999, -SERIES_CUTOFF * 0.999] {
            assert!((phi1(z) - z.exp_m1() / z).abs() < 1e-12);
            assert!((phi2(z) - (z.exp_m1() - z) / (z * z)).abs() < 1e-8);
        }
        assert!((phi1(-1.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn semigroup_law_and_identity() {
        let g = GridSpec::new(2, 8).unwrap();
        let s = OuSymbol::new(g, 1.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = band_limited(g, SpectrumShape::Flat, &mut rng);
        assert!(s.apply(0.0, &f).unwrap().sub(&f).l2_norm() < 1e-15);
        let a = s.apply(0.01, &s.apply(0.02, &f).unwrap()).unwrap();
        let b = s.apply(0.03, &f).unwrap();
        assert!(a.sub(&b).l2_norm() < 1e-12 * f.l2_norm());
        assert!(s.apply(-1.0, &f).is_err());
    }

    #[test]
    fn single_mode_decay() {
        let g = GridSpec::new(1, 16).unwrap();
        let s = OuSymbol::new(g, 2.0).unwrap();
        let f = Field::cosine(g, &[3], 1.0);
        let t = 0.004;
        let out = s.apply(t, &f).unwrap();
        let want = (-t * (4.0 * PI * PI * 9.0 + 2.0)).exp() * 0.5;
        assert!((out.coeff(&[3]).re - want).abs() < 1e-15);
    }

    #[test]
    fn l2_contraction() {
        let g = GridSpec::new(3, 8).unwrap();
        let s = OuSymbol::new(g, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let f = band_limited(g, SpectrumShape::Flat, &mut rng);
            for t in [0.0, 1e-3, 0.1, 2.0] {
                let lhs = s.apply(t, &f).unwrap().l2_norm();
                assert!(lhs <= (-0.7 * t).exp() * f.l2_norm() * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn constant_forcing_is_exact_with_exponential_trapezoid() {
        let g = GridSpec::new(1, 8).unwrap();
        let m2 = 1.5;
        let s = OuSymbol::new(g, m2).unwrap();
        let c = Field::constant(g, 0.8);
        let t = 0.7;
        let h = Path::new(0.0, 0.01, vec![c.clone(); 71]).unwrap();
        let got = s.duhamel(&h, DuhamelScheme::ExponentialTrapezoid).unwrap();
        let want = 0.8 * (1.0 - (-t * m2).exp()) / m2;
        assert!((got.mean() - want).abs() < 1e-13);
        let zero = Path::new(0.0, 0.01, vec![Field::zeros(g); 5]).unwrap();
        assert_eq!(s.duhamel(&zero, DuhamelScheme::LeftPoint).unwrap().l2_norm(), 0.0);
    }

    #[test]
    fn empty_forcing_is_rejected() {
        assert!(Path::new(0.0, 0.1, vec![]).is_err());
    }
}
