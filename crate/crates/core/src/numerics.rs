//! Small numerical kernels shared across modules: cubic splines on uniform
//! grids, finite-difference weights, quadrature and a tridiagonal solver.

/// Not-a-knot cubic spline on a uniform grid.
///
/// Reproduces cubic polynomials exactly. Stores the second derivatives at
/// the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSpline {
    left: f64,
    h: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl UniformSpline {
    /// `values.len()` must be at least 4.
    pub fn new(left: f64, right: f64, values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 4, "spline needs at least 4 nodes");
        let h = (right - left) / (n - 1) as f64;
        let second = not_a_knot_second_derivatives(values, h);
        Self {
            left,
            h,
            values: values.to_vec(),
            second,
        }
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.left + self.h * (self.values.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.values.len();
        let s = (x - self.left) / self.h;
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        (i, s - i as f64)
    }

    /// Value at `x`; callers are responsible for range checks. Points
    /// outside the grid are extrapolated with the end cubic.
    pub fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let h2 = self.h * self.h;
        let a = 1.0 - t;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        a * y0 + t * y1 + h2 / 6.0 * ((a * a * a - a) * m0 + (t * t * t - t) * m1)
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let h = self.h;
        let a = 1.0 - t;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        (y1 - y0) / h + h / 6.0 * (-(3.0 * a * a - 1.0) * m0 + (3.0 * t * t - 1.0) * m1)
    }

    /// Exact integral of the spline over each cell, accumulated from the
    /// left end. Entry `i` is the integral over `[left, x_i]`.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        let h = self.h;
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 0..self.values.len() - 1 {
            acc += 0.5 * h * (self.values[i] + self.values[i + 1])
                - h * h * h / 24.0 * (self.second[i] + self.second[i + 1]);
            out.push(acc);
        }
        out
    }
}

fn not_a_knot_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let d: Vec<f64> = (1..n - 1)
        .map(|i| (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h))
        .collect();
    // Row i (1..n-2): M[i-1] + 4 M[i] + M[i+1] = 6 d[i]. Combined with the
    // not-a-knot conditions this pins M[1] = d[1] and M[n-2] = d[n-2].
    let mut m = vec![0.0; n];
    if n == 4 {
        // A single cubic through four points.
        let third = (y[3] - 3.0 * y[2] + 3.0 * y[1] - y[0]) / (h * h * h);
        m[1] = d[0];
        m[2] = d[1];
        m[0] = m[1] - h * third;
        m[3] = m[2] + h * third;
        return m;
    }
    m[1] = d[0];
    m[n - 2] = d[n - 3];
    if n > 5 {
        // Interior unknowns M[2..=n-3].
        let k = n - 4;
        let mut sub = vec![1.0; k];
        let mut diag = vec![4.0; k];
        let mut sup = vec![1.0; k];
        let mut rhs: Vec<f64> = (2..=n - 3).map(|i| 6.0 * d[i - 1]).collect();
        rhs[0] -= m[1];
        rhs[k - 1] -= m[n - 2];
        sub[0] = 0.0;
        sup[k - 1] = 0.0;
        let sol = solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
        m[2..(k + 2)].copy_from_slice(&sol[..k]);
    }
    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    m
}

/// Thomas algorithm. `sub[i]` multiplies `x[i-1]` in row `i`, `sup[i]`
/// multiplies `x[i+1]`. `diag` and `rhs` are overwritten.
pub fn solve_tridiagonal(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) -> Vec<f64> {
    let n = diag.len();
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    }
    x
}

/// Fornberg's recursion: weights for derivatives `0..=order` at `x0` from
/// samples at `nodes`. Returns `w[m][j]`.
pub fn fd_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative of order `order` of uniformly sampled data, using local
/// seven-point interpolating stencils (centred in the interior, shifted
/// one-sided near the ends). Needs at least 8 samples.
pub fn uniform_derivative(values: &[f64], h: f64, order: usize) -> Vec<f64> {
    let n = values.len();
    let width = 7usize;
    let half = width / 2;
    let mut out = vec![0.0; n];
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; width];
    for (i, slot) in out.iter_mut().enumerate() {
        let start = i.saturating_sub(half).min(n - width);
        let offset = i - start;
        if cache[offset].is_none() {
            let nodes: Vec<f64> = (0..width).map(|j| j as f64).collect();
            let w = fd_weights(offset as f64, &nodes, order);
            cache[offset] = Some(w[order].clone());
        }
        let w = cache[offset].as_ref().unwrap();
        let s: f64 = (0..width).map(|j| w[j] * values[start + j]).sum();
        *slot = s / h.powi(order as i32);
    }
    out
}

/// Composite Simpson rule on uniform samples. An even number of intervals
/// uses Simpson throughout; otherwise the last three intervals use the
/// 3/8 rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 {
                (n - 1, false)
            } else {
                (n - 4, true)
            };
            let mut s = values[0] + values[simpson_end];
            for (i, v) in values.iter().enumerate().take(simpson_end).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = s * h / 3.0;
            if tail {
                let k = simpson_end;
                total += 3.0 * h / 8.0
                    * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
            }
            total
        }
    }
}

pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Discrete L2 norm of uniform samples (trapezoid weights).
pub fn l2_norm(values: &[f64], h: f64) -> f64 {
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    trapezoid(&sq, h).sqrt()
}

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Filon–Simpson rule for `∫ f(t) cos(ω t) dt` over uniform samples.
/// Accuracy depends on the smoothness of `f`, not on `ω`.
pub fn filon_cos(values: &[f64], t0: f64, h: f64, omega: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    let even_end = if intervals % 2 == 0 { n - 1 } else { n - 2 };
    let mut total = 0.0;
    if even_end >= 2 {
        total += filon_even(&values[..=even_end], t0, h, omega);
    }
    if even_end < n - 1 {
        // One trailing interval: exact integral of the linear interpolant
        // against cos.
        let a = t0 + h * (n - 2) as f64;
        total += linear_times_cos(values[n - 2], values[n - 1], a, h, omega);
    }
    total
}

fn filon_even(values: &[f64], t0: f64, h: f64, omega: f64) -> f64 {
    let n = values.len();
    let theta = omega * h;
    let (alpha, beta, gamma) = filon_coefficients(theta);
    let b = t0 + h * (n - 1) as f64;
    let mut c_even = 0.0;
    let mut c_odd = 0.0;
    // cos(ω t_i) by rotation to avoid a trig call per sample.
    let (sd, cd) = theta.sin_cos();
    let (mut s, mut c) = (omega * t0).sin_cos();
    for (i, v) in values.iter().enumerate() {
        if i % 2 == 0 {
            c_even += v * c;
        } else {
            c_odd += v * c;
        }
        let c_next = c * cd - s * sd;
        s = s * cd + c * sd;
        c = c_next;
        if i % 64 == 63 {
            let (s_fix, c_fix) = (omega * (t0 + h * (i + 1) as f64)).sin_cos();
            s = s_fix;
            c = c_fix;
        }
    }
    let (sa, ca) = (omega * t0).sin_cos();
    let (sb, cb) = (omega * b).sin_cos();
    c_even -= 0.5 * (values[0] * ca + values[n - 1] * cb);
    h * (alpha * (values[n - 1] * sb - values[0] * sa) + beta * c_even + gamma * c_odd)
}

fn filon_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta.abs() < 1e-2 {
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let alpha = 2.0 * t3 / 45.0 - 2.0 * t3 * t2 / 315.0;
        let beta = 2.0 / 3.0 + 2.0 * t2 / 15.0 - 4.0 * t2 * t2 / 105.0;
        let gamma = 4.0 / 3.0 - 2.0 * t2 / 15.0 + t2 * t2 / 210.0;
        (alpha, beta, gamma)
    } else {
        let (s, c) = theta.sin_cos();
        let t3 = theta * theta * theta;
        let alpha = (theta * theta + theta * s * c - 2.0 * s * s) / t3;
        let beta = 2.0 * (theta * (1.0 + c * c) - 2.0 * s * c) / t3;
        let gamma = 4.0 * (s - theta * c) / t3;
        (alpha, beta, gamma)
    }
}

fn linear_times_cos(fa: f64, fb: f64, a: f64, h: f64, omega: f64) -> f64 {
    if (omega * h).abs() < 1e-4 {
        return 0.5 * h * (fa * (omega * a).cos() + fb * (omega * (a + h)).cos());
    }
    // ∫_a^{a+h} (fa + (fb - fa)(t - a)/h) cos(ω t) dt
    let b = a + h;
    let slope = (fb - fa) / h;
    let (sa, ca) = (omega * a).sin_cos();
    let (sb, cb) = (omega * b).sin_cos();
    let w = omega;
    (fb * sb - fa * sa) / w + slope * (cb - ca) / (w * w)
}

/// Dense least squares `min ‖A x − b‖` via SVD with relative cutoff.
pub fn lstsq(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DVector<f64>, rcond: f64) -> nalgebra::DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("svd computed with u and v")
}

/// Piecewise cubic Hermite interpolation through `(xs[i], ys[i])` with
/// slopes `ds[i]`; `xs` strictly increasing, `x` clamped into range.
pub fn hermite_eval(xs: &[f64], ys: &[f64], ds: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let x = x.clamp(xs[0], xs[n - 1]);
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => return ys[i],
        Err(i) => i.clamp(1, n - 1) - 1,
    };
    let h = xs[i + 1] - xs[i];
    let t = (x - xs[i]) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * ys[i] + h10 * h * ds[i] + h01 * ys[i + 1] + h11 * h * ds[i + 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spline_reproduces_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 3.0 * x * x * x;
        let n = 11;
        let ys: Vec<f64> = (0..n).map(|i| f(i as f64 / 10.0)).collect();
        let s = UniformSpline::new(0.0, 1.0, &ys);
        for k in 0..50 {
            let x = k as f64 / 49.0;
            assert!((s.eval(x) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn spline_integral_of_cubic_is_exact() {
        let f = |x: f64| x * x * x;
        let ys: Vec<f64> = (0..9).map(|i| f(i as f64 / 8.0)).collect();
        let s = UniformSpline::new(0.0, 1.0, &ys);
        let ci = s.cumulative_integral();
        assert!((ci[8] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[2][0] - 1.0).abs() < 1e-14);
        assert!((w[2][1] + 2.0).abs() < 1e-14);
        assert!((w[2][2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_and_three_eighths() {
        for n in [5usize, 6, 9, 10] {
            let h = PI / (n - 1) as f64;
            let ys: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
            let s = simpson(&ys, h);
            assert!((s - 2.0).abs() < 5e-3, "n={n} s={s}");
        }
    }

    #[test]
    fn filon_matches_closed_form() {
        // ∫_0^20 e^{-2t} cos(ωt) dt
        let h = 1e-3;
        let n = 20001;
        let ys: Vec<f64> = (0..n).map(|i| (-2.0 * i as f64 * h).exp()).collect();
        for omega in [0.0, 0.3, 5.0, 50.0] {
            let got = filon_cos(&ys, 0.0, h, omega);
            let exact = 2.0 / (4.0 + omega * omega);
            assert!((got - exact).abs() / exact < 1e-9, "ω={omega}");
        }
    }

    #[test]
    fn tridiagonal_solves() {
        let sub = [0.0, 1.0, 1.0];
        let mut diag = [4.0, 4.0, 4.0];
        let sup = [1.0, 1.0, 0.0];
        let mut rhs = [5.0, 6.0, 5.0];
        let x = solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
