//! n-dimensional complex FFT on cubic grids, built from 1-D passes.
//!
//! Forward transforms are normalized by 1/N so that `coeffs[0]` is the mean.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, inverse: bool) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Reusable transform for one (d, n, direction). Owns its scratch space.
pub struct FftNd {
    d: usize,
    n: usize,
    inverse: bool,
    fft: Plan,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl FftNd {
    pub fn new(d: usize, n: usize, inverse: bool) -> Self {
        let fft = plan(n, inverse);
        let scratch_len = fft.get_inplace_scratch_len();
        FftNd {
            d,
            n,
            inverse,
            fft,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            line: vec![Complex64::new(0.0, 0.0); n.pow(d.saturating_sub(1) as u32) * n],
        }
    }

    /// In-place transform of a row-major cube (last axis fastest).
    pub fn process(&mut self, data: &mut [Complex64]) {
        let n = self.n;
        let total = n.pow(self.d as u32);
        assert_eq!(data.len(), total, "fft buffer length");
        // Last axis is contiguous.
        self.fft.process_with_scratch(data, &mut self.scratch);
        for axis in (0..self.d.saturating_sub(1)).rev() {
            let stride = n.pow((self.d - 1 - axis) as u32);
            let block = stride * n;
            // Gather every line along `axis` into contiguous storage.
            let mut li = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for t in 0..n {
                        self.line[li * n + t] = data[base + t * stride];
                    }
                    li += 1;
                }
            }
            self.fft.process_with_scratch(&mut self.line[..total], &mut self.scratch);
            let mut li = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for t in 0..n {
                        data[base + t * stride] = self.line[li * n + t];
                    }
                    li += 1;
                }
            }
        }
        if !self.inverse {
            let s = 1.0 / total as f64;
            for v in data.iter_mut() {
                *v *= s;
            }
        }
    }
}

pub fn forward(d: usize, n: usize, data: &mut [Complex64]) {
    FftNd::new(d, n, false).process(data)
}

pub fn inverse(d: usize, n: usize, data: &mut [Complex64]) {
    FftNd::new(d, n, true).process(data)
}
