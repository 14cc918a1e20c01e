#![allow(dead_code)]

//! Independent oracles shared by the integration tests.

use std::f64::consts::PI;

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix
/// with diagonal `d` and off-diagonal `e` (Sturm sequence).
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let prev = if q.abs() < 1e-300 { 1e-300 } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th (1-based) eigenvalue of a symmetric tridiagonal matrix.
pub fn tridiagonal_eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let bound = d.iter().map(|v| v.abs()).fold(0.0, f64::max) + 2.0 * e.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (-bound - 1.0, bound + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(d, e, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Second-order finite-difference matrix of `−∂² + q` on `[0, len]` with
/// `n` nodes (interior unknowns only).
pub fn fd_matrix(q: &dyn Fn(f64) -> f64, len: f64, n: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let h = len / (n - 1) as f64;
    let d: Vec<f64> = (1..n - 1).map(|i| 2.0 / (h * h) + q(h * i as f64)).collect();
    let e = vec![-1.0 / (h * h); n - 3];
    (d, e, h)
}

/// Richardson-extrapolated finite-difference eigenvalue (nodes `n` and `2n − 1`).
pub fn fd_eigenvalue(q: &dyn Fn(f64) -> f64, len: f64, n: usize, k: usize) -> f64 {
    let (d1, e1, _) = fd_matrix(q, len, n);
    let (d2, e2, _) = fd_matrix(q, len, 2 * n - 1);
    let coarse = tridiagonal_eigenvalue(&d1, &e1, k);
    let fine = tridiagonal_eigenvalue(&d2, &e2, k);
    (4.0 * fine - coarse) / 3.0
}

/// Eigenvector by inverse iteration, normalised in the discrete L² norm,
/// positive initial slope; returned on all `n` nodes including the ends.
pub fn fd_eigenvector(q: &dyn Fn(f64) -> f64, len: f64, n: usize, k: usize) -> Vec<f64> {
    let (d, e, h) = fd_matrix(q, len, n);
    let lambda = tridiagonal_eigenvalue(&d, &e, k);
    let shift = lambda * (1.0 + 1e-10) + 1e-10;
    let m = d.len();
    let mut v: Vec<f64> = (0..m).map(|i| (k as f64 * PI * (i + 1) as f64 / (m + 1) as f64).sin()).collect();
    for _ in 0..4 {
        let mut diag: Vec<f64> = d.iter().map(|x| x - shift).collect();
        let mut rhs = v.clone();
        // Thomas algorithm.
        let mut sup = e.clone();
        for i in 1..m {
            let w = e[i - 1] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut x = vec![0.0; m];
        x[m - 1] = rhs[m - 1] / diag[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
        }
        let norm = (x.iter().map(|v| v * v).sum::<f64>() * h).sqrt();
        v = x.iter().map(|v| v / norm).collect();
        sup.clear();
    }
    if v[0] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let mut out = vec![0.0];
    out.extend(v);
    out.push(0.0);
    out
}

pub fn bump(amp: f64, centre: f64, width2: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| amp * (-(x - centre) * (x - centre) / width2).exp()
}

/// Smooth compactly supported cutoff: 1 on `[a + r, b − r]`, 0 outside `(a, b)`.
pub fn smooth_window(a: f64, b: f64, r: f64) -> impl Fn(f64) -> f64 {
    let step = |t: f64| -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
            f(t) / (f(t) + f(1.0 - t))
        }
    };
    move |x: f64| step((x - a) / r) * step((b - x) / r)
}
