//! Exponential integrators for ∂ₜw = (Δ − m²)w − P(w³) + h on coefficient arrays.

use crate::field::dealias::Dealiaser;
use crate::field::{GridSpec, C64, ZERO};
use crate::semigroup::{phi1, phi2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeScheme {
    /// Exponential Euler: w⁺ = E w + dt φ₁ (−P w³ + h).
    #[default]
    Etd1,
    /// Cox–Matthews ETD2 with an ETD1 start.
    Etd2,
}

pub(crate) struct Stepper {
    pub dt: f64,
    scheme: TimeScheme,
    pub decay: Vec<f64>,
    pub b1: Vec<f64>,
    b2: Vec<f64>,
    pub cubic: bool,
    pub dealias: Dealiaser,
    nl: Vec<C64>,
    prev: Option<Vec<C64>>,
}

impl Stepper {
    /// `m2` may be any real number (renormalized masses can be negative).
    pub fn new(grid: GridSpec, m2: f64, dt: f64, scheme: TimeScheme) -> Self {
        let mut decay = Vec::with_capacity(grid.len());
        let mut b1 = Vec::with_capacity(grid.len());
        let mut b2 = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let lam = 4.0 * PI * PI * grid.k2(i) as f64 + m2;
            let z = -lam * dt;
            decay.push(z.exp());
            b1.push(dt * phi1(z));
            b2.push(dt * phi2(z));
        }
        Stepper {
            dt,
            scheme,
            decay,
            b1,
            b2,
            cubic: true,
            dealias: Dealiaser::new(grid),
            nl: vec![ZERO; grid.len()],
            prev: None,
        }
    }

    /// Forget multistep history (call before a new trajectory).
    pub fn reset(&mut self) {
        self.prev = None;
    }

    /// N = −P(w³) into self.nl.
    fn nonlinear(&mut self, w: &[C64]) {
        if self.cubic {
            self.dealias.cube(w, &mut self.nl);
            for v in self.nl.iter_mut() {
                *v = -*v;
            }
        } else {
            self.nl.fill(ZERO);
        }
    }

    /// The control is constant over the step and enters through b₁ exactly;
    /// ETD2 extrapolates only the cubic term.
    pub fn step(&mut self, w: &[C64], h: Option<&[C64]>, out: &mut [C64]) {
        self.nonlinear(w);
        for i in 0..out.len() {
            let f = match h {
                Some(h) => self.nl[i] + h[i],
                None => self.nl[i],
            };
            out[i] = w[i] * self.decay[i] + f * self.b1[i];
        }
        match (self.scheme, self.prev.as_mut()) {
            (TimeScheme::Etd2, Some(prev)) => {
                for i in 0..out.len() {
                    out[i] += (self.nl[i] - prev[i]) * self.b2[i];
                }
                prev.copy_from_slice(&self.nl);
            }
            (TimeScheme::Etd2, None) => self.prev = Some(self.nl.clone()),
            _ => {}
        }
    }

    /// Cubic-term history of the last ETD2 step, if any.
    pub fn history(&self) -> Option<&[C64]> {
        self.prev.as_deref()
    }

    pub fn scheme(&self) -> TimeScheme {
        self.scheme
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }
}

pub(crate) fn all_finite(c: &[C64]) -> bool {
    c.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}
