//! Restarted GMRES on real vector spaces stored as complex coefficient arrays,
//! with the inner product Re Σ conj(a)·b.

use crate::field::C64;

fn dot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn norm(a: &[C64]) -> f64 {
    dot(a, a).sqrt()
}

pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Solve A x = b from x = 0 to relative residual `tol`.
pub fn gmres(
    mut apply: impl FnMut(&[C64]) -> Vec<C64>,
    b: &[C64],
    tol: f64,
    restart: usize,
    max_matvecs: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![C64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        return GmresOutcome { x, residual: 0.0, matvecs: 0 };
    }
    let mut matvecs = 0;
    let mut r: Vec<C64> = b.to_vec();
    let mut rnorm = bnorm;
    while matvecs < max_matvecs && rnorm > tol * bnorm {
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|c| c / rnorm).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = rnorm;
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = apply(&v[k]);
            matvecs += 1;
            for i in 0..=k {
                h[i][k] = dot(&v[i], &w);
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= vj * h[i][k];
                }
            }
            // second Gram-Schmidt pass for stability
            for i in 0..=k {
                let c = dot(&v[i], &w);
                h[i][k] += c;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= vj * c;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol * bnorm || hn == 0.0 || matvecs >= max_matvecs {
                break;
            }
            v.push(w.iter().map(|c| c / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xj, vj) in x.iter_mut().zip(&v[i]) {
                *xj += vj * *yi;
            }
        }
        let ax = apply(&x);
        matvecs += 1;
        r = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        rnorm = norm(&r);
    }
    GmresOutcome { x, residual: rnorm / bnorm, matvecs }
}
