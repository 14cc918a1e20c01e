//! From traces to spectra: cosine transforms and zero finding for wave
//! traces, exponential fitting for heat traces, Weyl fits and the
//! vanishing-mode audit.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::modes::{Mode, ModeSet, SpectrumCounts};
use crate::numerics;
use crate::trace::{BoundaryTrace, TraceFlavor};
use crate::wave::neumann_trace_from_dirichlet;

/// Relative size of the last-quarter tail a trace may keep and still count
/// as decayed.
pub const DECAYED_TAIL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct CosineTransform {
    pub values: Vec<f64>,
    /// Bound on the contribution of the unobserved tail beyond the last sample.
    pub truncation_bound: f64,
}

fn tail_max(trace: &BoundaryTrace) -> f64 {
    let n = trace.len();
    numerics::sup_norm(&trace.values()[3 * n / 4..])
}

/// Checks that the trace has decayed enough for its cosine transform to
/// stand in for the transform of the full even extension.
pub fn check_decayed(trace: &BoundaryTrace) -> Result<()> {
    let peak = trace.peak();
    if peak == 0.0 {
        return Ok(());
    }
    let tail = tail_max(trace);
    let vanished = tail <= 1e-12 * peak;
    if tail > DECAYED_TAIL * peak || (trace.decay_rate_estimate().is_none() && !vanished) {
        return Err(Error::Applicability(format!(
            "trace has not decayed by t = {:.4}: last-quarter maximum is {:.3e} of the peak",
            trace.t_last(),
            tail / peak
        )));
    }
    Ok(())
}

/// `2∫ trace(t) cos(ξt) dt` over the sampled window, by Filon quadrature.
pub fn cosine_transform_trace(trace: &BoundaryTrace, xi_grid: &[f64]) -> Result<CosineTransform> {
    check_decayed(trace)?;
    if xi_grid.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::Domain("frequencies must be non-negative".into()));
    }
    let values = xi_grid
        .iter()
        .map(|&xi| 2.0 * numerics::filon_cos(trace.values(), trace.t0(), trace.dt(), xi))
        .collect();
    let tail = tail_max(trace);
    let truncation_bound = match trace.decay_rate_estimate() {
        Some(kappa) => 2.0 * tail / kappa,
        None => 2.0 * tail * trace.dt() * trace.len() as f64,
    };
    Ok(CosineTransform {
        values,
        truncation_bound,
    })
}

/// Transforms of `u(·, 1)` and `∂ₓu(·, 1)` from a single Dirichlet trace.
struct WaveTransforms {
    u: BoundaryTrace,
    ux: BoundaryTrace,
    c0: f64,
}

impl WaveTransforms {
    fn new(dirichlet: &BoundaryTrace, c0: f64) -> Result<Self> {
        if dirichlet.flavor() != TraceFlavor::Dirichlet {
            return Err(Error::Validation("expected a Dirichlet trace".into()));
        }
        check_decayed(dirichlet)?;
        Ok(Self {
            u: dirichlet.clone(),
            ux: neumann_trace_from_dirichlet(dirichlet, c0)?,
            c0,
        })
    }

    fn at(&self, xi: f64) -> (f64, f64) {
        let u = 2.0 * numerics::filon_cos(self.u.values(), self.u.t0(), self.u.dt(), xi);
        let ux = 2.0 * numerics::filon_cos(self.ux.values(), self.ux.t0(), self.ux.dt(), xi);
        (u, ux)
    }

    /// `(D, E)`: value and travel-time derivative of the frozen solution
    /// continued by `shift` into the constant-speed region, both times `a(ξ)`.
    fn continued(&self, xi: f64, shift: f64) -> (f64, f64) {
        let (u, ux) = self.at(xi);
        let (s, c) = (xi * shift).sin_cos();
        let d = u * c + self.c0 * ux * s / xi;
        let e = -xi * u * s + self.c0 * ux * c;
        (d, e)
    }
}

/// Angle of `(ξD, E)` reduced to `(−π/2, π/2]`. The unknown factor `a(ξ)`
/// cancels in the ratio.
fn reduced_angle(xi: f64, d: f64, e: f64) -> f64 {
    let a = (xi * d).atan2(e);
    wrap_half_pi(a)
}

fn wrap_half_pi(a: f64) -> f64 {
    let mut a = a % PI;
    if a > 0.5 * PI {
        a -= PI;
    } else if a <= -0.5 * PI {
        a += PI;
    }
    a
}

fn amplitude(xi: f64, d: f64, e: f64) -> f64 {
    d.hypot(e / xi)
}

/// Zeros of the continued frozen solution at travel time `L + shift`,
/// indexed by the unwrapped angle. `horizon` bounds the interval length
/// and sets the scan step.
fn angle_zeros(data: &WaveTransforms, shift: f64, count: usize, horizon: f64) -> Result<ModeSet> {
    let step = PI / (16.0 * horizon);
    let xi_limit = 0.25 * PI / data.u.dt();
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut xi = 0.5 * step;
    loop {
        let (d, e) = data.continued(xi, shift);
        grid.push(xi);
        values.push((d, e));
        // Stop once the angle has comfortably passed the last requested zero.
        if grid.len() % 64 == 0 {
            let theta = unwrap(&grid, &values);
            let strong = strong_points(&grid, &values);
            let last_strong = strong.iter().rposition(|&s| s);
            let passed = theta
                .last()
                .is_some_and(|t| *t > (count as f64 + 1.0) * PI);
            let faded = last_strong.is_none_or(|i| grid.len() - i > 512);
            if passed || faded {
                break;
            }
        }
        xi += step;
        if xi > xi_limit {
            break;
        }
    }
    let theta = unwrap(&grid, &values);
    let amps: Vec<f64> = grid
        .iter()
        .zip(&values)
        .map(|(x, (d, e))| amplitude(*x, *d, *e))
        .collect();
    let amp_max = amps.iter().cloned().fold(0.0, f64::max);
    let length = theta.last().copied().unwrap_or(0.0) / grid.last().copied().unwrap_or(1.0);
    let width = PI / (4.0 * length.max(1e-3));
    let mut modes = Vec::new();
    for i in 1..grid.len() {
        let (lo, hi) = (theta[i - 1], theta[i]);
        let first = (lo / PI).floor() as i64 + 1;
        let last = (hi / PI).floor() as i64;
        for k in first..=last {
            if k < 1 || modes.len() >= count {
                continue;
            }
            let root = refine_zero(data, shift, grid[i - 1], grid[i]);
            let (d, e) = data.continued(root, shift);
            let a0 = amplitude(root, d, e);
            let side = |x: f64| {
                let (d, e) = data.continued(x, shift);
                amplitude(x, d, e)
            };
            let local = 0.5 * (side((root - width).max(0.5 * step)) + side(root + width));
            let mut confidence = a0 / a0.max(local).max(f64::MIN_POSITIVE);
            confidence *= (a0 / (1e-6 * amp_max)).min(1.0);
            modes.push(Mode {
                lambda: root * root,
                amplitude: a0,
                confidence: confidence.clamp(0.0, 1.0),
                index: Some(k as usize),
            });
        }
    }
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    modes.dedup_by(|b, a| b.lambda <= a.lambda);
    ModeSet::new(modes, length.max(f64::MIN_POSITIVE))
}

/// A grid point is strong when its amplitude is not a deep local dip and
/// sits above the quadrature noise.
fn strong_points(grid: &[f64], values: &[(f64, f64)]) -> Vec<bool> {
    let amps: Vec<f64> = grid
        .iter()
        .zip(values)
        .map(|(x, (d, e))| amplitude(*x, *d, *e))
        .collect();
    let amp_max = amps.iter().cloned().fold(0.0, f64::max);
    let n = amps.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(4);
            let hi = (i + 4).min(n - 1);
            let around = amps[lo].max(amps[hi]);
            amps[i] > 1e-8 * amp_max && amps[i] > 0.05 * around
        })
        .collect()
}

/// Continuous angle along the grid; weak points are bridged using the
/// running slope as the predicted increment.
fn unwrap(grid: &[f64], values: &[(f64, f64)]) -> Vec<f64> {
    let strong = strong_points(grid, values);
    let raw: Vec<f64> = grid
        .iter()
        .zip(values)
        .map(|(x, (d, e))| reduced_angle(*x, *d, *e))
        .collect();
    let mut theta = vec![0.0; grid.len()];
    let mut last: Option<(usize, f64)> = None;
    for i in 0..grid.len() {
        let Some((j, tj)) = last else {
            theta[i] = if raw[i] < -0.25 * PI { raw[i] + PI } else { raw[i] };
            if strong[i] {
                last = Some((i, theta[i]));
            }
            continue;
        };
        let slope = if tj > 0.0 { tj / grid[j] } else { 0.0 };
        let predicted = tj + slope * (grid[i] - grid[j]);
        let delta = wrap_half_pi(raw[i] - predicted);
        theta[i] = predicted + delta;
        if strong[i] {
            last = Some((i, theta[i]));
        } else {
            // Weak points never move the reference.
            theta[i] = tj.max(theta[i].min(predicted));
        }
    }
    // Keep the curve non-decreasing so crossings are counted once.
    for i in 1..theta.len() {
        theta[i] = theta[i].max(theta[i - 1]);
    }
    theta
}

fn refine_zero(data: &WaveTransforms, shift: f64, mut a: f64, mut b: f64) -> f64 {
    let f = |x: f64| {
        let (d, e) = data.continued(x, shift);
        reduced_angle(x, d, e)
    };
    let mut fa = f(a);
    let fb = f(b);
    if fa.signum() == fb.signum() {
        // Crossing through a weak region; fall back to the smaller |angle|.
        return if fa.abs() < fb.abs() { a } else { b };
    }
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    0.5 * (a + b)
}

/// Dirichlet spectrum of `−c²∂²ₓ` on `(0, 1)` from the zeros of `û(ξ, 1)`.
/// Eigenvalues are `ξ²`; the interval length reported is the angle slope,
/// a rough travel-time estimate.
pub fn zero_scan_spectrum(dirichlet: &BoundaryTrace, c0: f64, count: usize) -> Result<ModeSet> {
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("background speed must be positive, got {c0}")));
    }
    let data = WaveTransforms::new(dirichlet, c0)?;
    angle_zeros(&data, 0.0, count, dirichlet.t_last())
}

/// Dirichlet spectrum of `−∂²_y + q` on `(0, 2L)`, `q = 0` on `(L, 2L)`,
/// from the zeros of the frozen solution continued past `x = 1`.
pub fn extended_interval_spectrum(dirichlet: &BoundaryTrace, c0: f64, length: f64, count: usize) -> Result<ModeSet> {
    if !(length > 0.0) {
        return Err(Error::Domain(format!("travel time must be positive, got {length}")));
    }
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("background speed must be positive, got {c0}")));
    }
    let data = WaveTransforms::new(dirichlet, c0)?;
    let modes = angle_zeros(&data, length, count, dirichlet.t_last() + length)?;
    let confident = modes.confident(0.5).len();
    if confident < count {
        log::warn!("extended spectrum: {confident} of {count} requested zeros are confident");
    }
    ModeSet::new(modes.modes().to_vec(), 2.0 * length)
}

fn mode_indices(modes: &ModeSet) -> Vec<f64> {
    modes
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| m.index.unwrap_or(i + 1) as f64)
        .collect()
}

fn check_weyl_input(modes: &ModeSet, multiplier: f64) -> Result<()> {
    if modes.len() < 5 {
        return Err(Error::Data(format!("Weyl fit needs at least 5 modes, got {}", modes.len())));
    }
    if !(multiplier > 0.0) {
        return Err(Error::Domain("interval multiplier must be positive".into()));
    }
    let idx = mode_indices(modes);
    if idx.windows(2).any(|w| w[1] <= w[0]) || modes.lambdas().windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("eigenvalues or indices not increasing".into()));
    }
    if modes.lambdas()[0] <= 0.0 {
        return Err(Error::Validation("Weyl fit needs positive eigenvalues".into()));
    }
    Ok(())
}

/// Travel time from `√λₖ ≈ kπ/(mL)`, fitted through the origin over the
/// upper half of the modes.
pub fn travel_time_from_spectrum(modes: &ModeSet, interval_multiplier: f64) -> Result<f64> {
    check_weyl_input(modes, interval_multiplier)?;
    let idx = mode_indices(modes);
    let lambdas = modes.lambdas();
    let start = modes.len() / 2;
    let (mut skk, mut sks) = (0.0, 0.0);
    for (k, l) in idx[start..].iter().zip(&lambdas[start..]) {
        skk += k * k;
        sks += k * l.sqrt();
    }
    Ok(PI * skk / (interval_multiplier * sks))
}

/// Two-term Weyl fit `λₖ ≈ (kπ/(mL))² + β` over the upper half of the
/// modes; returns `(L, β)`.
pub fn weyl_fit(modes: &ModeSet, interval_multiplier: f64) -> Result<(f64, f64)> {
    check_weyl_input(modes, interval_multiplier)?;
    let idx = mode_indices(modes);
    let lambdas = modes.lambdas();
    let start = modes.len() / 2;
    let rows = modes.len() - start;
    let mut a = DMatrix::zeros(rows, 2);
    let mut b = DVector::zeros(rows);
    for (r, i) in (start..modes.len()).enumerate() {
        a[(r, 0)] = (idx[i] * PI).powi(2);
        a[(r, 1)] = 1.0;
        b[r] = lambdas[i];
    }
    let x = numerics::lstsq(&a, &b, 1e-14);
    if !(x[0] > 0.0) {
        return Err(Error::Data("Weyl fit produced a non-positive slope".into()));
    }
    Ok((1.0 / (interval_multiplier * x[0].sqrt()), x[1]))
}

/// Output of [`fit_exponential_modes`].
#[derive(Debug, Clone)]
pub struct ExponentialFit {
    pub modes: ModeSet,
    /// `‖fit − trace‖₂ / ‖trace‖₂`.
    pub residual: f64,
    /// Numerical rank of the Hankel matrix.
    pub numerical_rank: usize,
    /// Set when fewer modes than requested are identifiable.
    pub rank_deficient: bool,
    pub singular_values: Vec<f64>,
}

fn model(t: &[f64], lambdas: &[f64], amps: &[f64]) -> Vec<f64> {
    t.iter()
        .map(|&ti| lambdas.iter().zip(amps).map(|(l, a)| a * (-l * ti).exp()).sum())
        .collect()
}

/// Real columns `Re, Im e^{s(t − t_ref)}` for nuisance rates `s`.
fn nuisance_columns(t: &[f64], t_ref: f64, rates: &[nalgebra::Complex<f64>]) -> Vec<Vec<f64>> {
    let mut cols = Vec::new();
    for s in rates {
        let e: Vec<nalgebra::Complex<f64>> = t.iter().map(|&ti| (s * (ti - t_ref)).exp()).collect();
        cols.push(e.iter().map(|z| z.re).collect());
        if s.im.abs() > 1e-12 && (s.im * (t[1] - t[0]) - PI).abs() > 1e-9 {
            cols.push(e.iter().map(|z| z.im).collect());
        }
    }
    cols
}

/// Linear least squares for the mode amplitudes alongside free nuisance
/// columns. Returns the mode amplitudes and the fitted values.
fn fit_amplitudes(t: &[f64], y: &[f64], lambdas: &[f64], extra: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = lambdas.len();
    let cols = k + extra.len();
    let mut a = DMatrix::zeros(t.len(), cols);
    for (i, &ti) in t.iter().enumerate() {
        for (j, l) in lambdas.iter().enumerate() {
            a[(i, j)] = (-l * ti).exp();
        }
        for (j, c) in extra.iter().enumerate() {
            a[(i, k + j)] = c[i];
        }
    }
    let raw = a.clone();
    let scales: Vec<f64> = (0..cols).map(|j| a.column(j).norm().max(f64::MIN_POSITIVE)).collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let x = numerics::lstsq(&a, &DVector::from_column_slice(y), 1e-15);
    let x: DVector<f64> = DVector::from_iterator(cols, x.iter().zip(&scales).map(|(v, s)| v / s));
    let fitted = (&raw * &x).as_slice().to_vec();
    (x.as_slice()[..k].to_vec(), fitted)
}

/// Jacobian in `(λ, a, nuisance amplitudes)` at fixed nuisance rates.
fn mode_jacobian(t: &[f64], lambdas: &[f64], amps: &[f64], extra: &[Vec<f64>]) -> DMatrix<f64> {
    let k = lambdas.len();
    DMatrix::from_fn(t.len(), 2 * k + extra.len(), |i, j| {
        if j < k {
            -t[i] * amps[j] * (-lambdas[j] * t[i]).exp()
        } else if j < 2 * k {
            (-lambdas[j - k] * t[i]).exp()
        } else {
            extra[j - 2 * k][i]
        }
    })
}

/// Levenberg–Marquardt on `(λ, a)` jointly. Returns the refined parameters
/// and the Jacobian at the solution.
fn refine_modes(t: &[f64], y: &[f64], lambdas: &mut [f64], amps: &mut [f64]) -> DMatrix<f64> {
    let k = lambdas.len();
    let n = t.len();
    let jacobian = |l: &[f64], a: &[f64]| {
        let mut j = DMatrix::zeros(n, 2 * k);
        for (i, &ti) in t.iter().enumerate() {
            for m in 0..k {
                let e = (-l[m] * ti).exp();
                j[(i, m)] = -ti * a[m] * e;
                j[(i, k + m)] = e;
            }
        }
        j
    };
    let cost = |l: &[f64], a: &[f64]| -> f64 {
        model(t, l, a).iter().zip(y).map(|(m, v)| (m - v).powi(2)).sum()
    };
    let mut mu = 1e-3;
    let mut current = cost(lambdas, amps);
    for _ in 0..200 {
        let j = jacobian(lambdas, amps);
        let r: Vec<f64> = model(t, lambdas, amps).iter().zip(y).map(|(m, v)| m - v).collect();
        let r = DVector::from_vec(r);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for d in 0..2 * k {
                lhs[(d, d)] += mu * jtj[(d, d)].max(f64::MIN_POSITIVE);
            }
            let Some(step) = lhs.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let l_new: Vec<f64> = (0..k).map(|m| lambdas[m] + step[m]).collect();
            let a_new: Vec<f64> = (0..k).map(|m| amps[m] + step[k + m]).collect();
            let c_new = cost(&l_new, &a_new);
            if c_new.is_finite() && c_new < current {
                let rel = (current - c_new) / current.max(f64::MIN_POSITIVE);
                lambdas.copy_from_slice(&l_new);
                amps.copy_from_slice(&a_new);
                current = c_new;
                mu = (mu / 3.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    jacobian(lambdas, amps)
}

/// Hankel SVD of a sampled signal, from which pencil roots of any order
/// up to the numerical rank can be drawn.
struct Pencil {
    singular_values: Vec<f64>,
    rank: usize,
    /// Signal-subspace vectors as columns, strongest first.
    basis: DMatrix<f64>,
}

impl Pencil {
    fn new(y: &[f64], p: usize, count: usize) -> Self {
        let rows = y.len() - p;
        let hankel = DMatrix::from_fn(rows, p + 1, |i, j| y[i + j]);
        // Tall orientation: the left factor of the transpose is the
        // signal subspace.
        let svd = hankel.transpose().svd(true, false);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u = svd.u.expect("u requested");
        let tail_start = count.min(s.len() - 1);
        let mut tail: Vec<f64> = s[tail_start..].to_vec();
        tail.sort_by(f64::total_cmp);
        let median = tail[tail.len() / 2];
        let threshold = (1e-13 * s[0]).max(10.0 * median);
        let rank = s.iter().take_while(|&&v| v > threshold).count();
        let keep = rank.min(count).max(1);
        let basis = DMatrix::from_fn(p + 1, keep, |i, j| u[(i, order[j])]);
        Self {
            singular_values: s,
            rank,
            basis,
        }
    }

    fn max_order(&self) -> usize {
        self.basis.ncols().min(self.rank)
    }

    fn roots(&self, r: usize) -> Vec<nalgebra::Complex<f64>> {
        let p = self.basis.nrows() - 1;
        let sub = self.basis.columns(0, r);
        let v1 = sub.rows(0, p).into_owned();
        let v2 = sub.rows(1, p).into_owned();
        let mut m = DMatrix::zeros(r, r);
        for j in 0..r {
            m.set_column(j, &numerics::lstsq(&v1, &v2.column(j).into_owned(), 1e-15));
        }
        m.complex_eigenvalues().iter().cloned().collect()
    }
}

/// Decay rates of the real roots in `(0, 1)`, and the remaining roots as
/// continuous-time rates.
fn split_roots(roots: &[nalgebra::Complex<f64>], dt: f64) -> (Vec<f64>, Vec<nalgebra::Complex<f64>>) {
    let mut lambdas = Vec::new();
    let mut nuisance = Vec::new();
    for z in roots {
        if z.im.abs() <= 1e-6 * z.norm() && z.re > 0.0 && z.re < 1.0 {
            lambdas.push(-z.re.ln() / dt);
        } else if z.im >= 0.0 && z.norm() < 1.5 && z.norm() > 0.0 {
            nuisance.push(z.ln() / dt);
        }
    }
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * a.abs());
    (lambdas, nuisance)
}

/// Pencil order whose complete fit, nuisance terms included, leaves the
/// smallest residual on the full samples.
fn best_order(
    pencil: &Pencil,
    t: &[f64],
    values: &[f64],
    t_ref: f64,
    dt: f64,
) -> Option<(usize, Vec<f64>, Vec<nalgebra::Complex<f64>>)> {
    let mut best: Option<(f64, usize, Vec<f64>, Vec<nalgebra::Complex<f64>>)> = None;
    for r in 1..=pencil.max_order() {
        let (l, nz) = split_roots(&pencil.roots(r), dt);
        if l.is_empty() {
            continue;
        }
        let (_, fitted) = fit_amplitudes(t, values, &l, &nuisance_columns(t, t_ref, &nz));
        let res: f64 = fitted.iter().zip(values).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|b| res < b.0) {
            best = Some((res, r, l, nz));
        }
    }
    best.map(|b| (b.1, b.2, b.3))
}

fn nearest_relative(lambda: f64, others: &[f64]) -> f64 {
    if others.is_empty() {
        return 0.0;
    }
    others
        .iter()
        .map(|o| (o / lambda - 1.0).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Matrix-pencil estimate of `trace(t) ≈ Σ aₖ e^{−λₖ t}` followed by joint
/// least-squares refinement. When the Hankel matrix has numerical rank
/// below `count`, only the identifiable modes are returned and
/// `rank_deficient` is set.
pub fn fit_exponential_modes(trace: &BoundaryTrace, count: usize) -> Result<ExponentialFit> {
    if count == 0 {
        return Err(Error::Validation("requested zero modes".into()));
    }
    let peak = trace.peak();
    if peak == 0.0 {
        return Err(Error::Data("trace is identically zero".into()));
    }
    let n_all = trace.len();
    let floor = trace.values().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if n_all < 4 * count && floor > 1e-6 * peak {
        return Err(Error::Data(format!(
            "{n_all} samples cannot resolve {count} modes: need {} samples or six decades of decay",
            4 * count
        )));
    }
    // The pencil works on at most ~1000 samples; refinement uses all of them.
    let stride = n_all.div_ceil(1000).max(1);
    let y: Vec<f64> = trace.values().iter().step_by(stride).cloned().collect();
    let dt = trace.dt() * stride as f64;
    let n = y.len();
    let t: Vec<f64> = trace.times().collect();
    let values = trace.values();
    let t_ref = trace.t0();
    let primary = Pencil::new(&y, n / 2, count);
    let rank = primary.rank;
    if rank == 0 {
        return Err(Error::Data("no identifiable modes in trace".into()));
    }
    let Some((_, mut lambdas, nuisance)) = best_order(&primary, &t, values, t_ref, dt) else {
        return Err(Error::Data("matrix pencil found no real decaying modes".into()));
    };
    // A differently shaped pencil gives an independent estimate; the
    // disagreement measures how well each mode is determined.
    let other = best_order(&Pencil::new(&y, n / 3, count), &t, values, t_ref, dt)
        .map(|b| b.1)
        .unwrap_or_default();
    let s = primary.singular_values.clone();
    let extra = nuisance_columns(&t, t_ref, &nuisance);
    let (mut amps, _) = fit_amplitudes(&t, values, &lambdas, &extra);
    let jac = if extra.is_empty() {
        refine_modes(&t, values, &mut lambdas, &mut amps)
    } else {
        mode_jacobian(&t, &lambdas, &amps, &extra)
    };
    let (_, fitted) = fit_amplitudes(&t, values, &lambdas, &extra);
    let fitted = if extra.is_empty() { model(&t, &lambdas, &amps) } else { fitted };
    let resid: f64 = fitted.iter().zip(values).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let norm: f64 = values.iter().map(|v| v * v).sum::<f64>();
    let k = lambdas.len();
    let params = jac.ncols();
    let dof = (t.len() as f64 - params as f64).max(1.0);
    let sigma2 = resid / dof;
    let jtj = jac.transpose() * &jac;
    let cov = jtj.pseudo_inverse(1e-300).unwrap_or_else(|_| DMatrix::zeros(params, params));
    let mut modes: Vec<Mode> = (0..k)
        .map(|i| {
            let std = (sigma2 * cov[(i, i)].max(0.0)).sqrt();
            let rel = std / lambdas[i].abs().max(f64::MIN_POSITIVE);
            let spread = nearest_relative(lambdas[i], &other);
            Mode::new(lambdas[i], amps[i], (-rel.max(spread) / 1e-4).exp().clamp(0.0, 1.0))
        })
        .collect();
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    modes.dedup_by(|b, a| b.lambda <= a.lambda);
    let rank_deficient = rank < count;
    if rank_deficient {
        log::warn!("Hankel numerical rank {rank} is below the {count} requested modes");
    }
    Ok(ExponentialFit {
        modes: ModeSet::new(modes, 1.0)?,
        residual: (resid / norm).sqrt(),
        numerical_rank: rank,
        rank_deficient,
        singular_values: s,
    })
}

/// Relative tolerance for matching an observed eigenvalue to a reference one.
pub const MATCH_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct DensityReport {
    pub counts: SpectrumCounts,
    /// `ε/π`
    pub bound: f64,
    pub max_density: f64,
    pub meets_budget: bool,
}

/// Counts `N`, `S` and `d = N − S` at every reference eigenvalue, matching
/// observed modes to reference ones by relative distance.
pub fn mode_density_report(observed: &ModeSet, reference: &ModeSet, epsilon: f64) -> Result<DensityReport> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let refs = reference.lambdas();
    if refs.is_empty() {
        return Err(Error::Data("empty reference spectrum".into()));
    }
    let mut matched = vec![false; refs.len()];
    for m in observed.modes() {
        let pos = refs.partition_point(|&r| r < m.lambda);
        let close = |j: usize| (refs[j] - m.lambda).abs() <= MATCH_TOLERANCE * refs[j].abs().max(1.0);
        let candidates: Vec<usize> = [pos.wrapping_sub(1), pos]
            .into_iter()
            .filter(|&j| j < refs.len() && close(j))
            .collect();
        let Some(&j) = candidates
            .iter()
            .min_by(|&&a, &&b| (refs[a] - m.lambda).abs().total_cmp(&(refs[b] - m.lambda).abs()))
        else {
            continue;
        };
        if matched[j] {
            return Err(Error::Matching(format!(
                "two observed modes match the reference eigenvalue {}",
                refs[j]
            )));
        }
        matched[j] = true;
    }
    let mut total = Vec::with_capacity(refs.len());
    let mut seen = Vec::with_capacity(refs.len());
    let mut vanishing = Vec::with_capacity(refs.len());
    let mut s = 0;
    for (i, &hit) in matched.iter().enumerate() {
        if hit {
            s += 1;
        }
        total.push(i + 1);
        seen.push(s);
        vanishing.push(i + 1 - s);
    }
    let counts = SpectrumCounts::new(refs, total, seen, vanishing)?;
    Ok(DensityReport {
        bound: epsilon / PI,
        max_density: counts.max_vanishing_density(),
        meets_budget: counts.meets_budget(epsilon),
        counts,
    })
}

/// Modes whose coefficient is not a deep local dip: `|cₖ| ≥ τ·max(|cₖ₋₁|, |cₖ₊₁|)`.
pub fn observed_modes(lambdas: &[f64], coefficients: &[f64], tau: f64, interval_length: f64) -> Result<ModeSet> {
    if lambdas.len() != coefficients.len() {
        return Err(Error::Validation("eigenvalue and coefficient counts differ".into()));
    }
    let n = lambdas.len();
    let scale = numerics::sup_norm(coefficients);
    let mut modes = Vec::new();
    for i in 0..n {
        let left = if i > 0 { coefficients[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { coefficients[i + 1].abs() } else { 0.0 };
        let c = coefficients[i].abs();
        let vanishing = c < tau * left.max(right) || c <= 1e-14 * scale;
        if !vanishing {
            modes.push(Mode {
                lambda: lambdas[i],
                amplitude: coefficients[i],
                confidence: 1.0,
                index: Some(i + 1),
            });
        }
    }
    ModeSet::new(modes, interval_length)
}
