//! Shooting, Dirichlet spectra and eigenfunctions for `−ψ″ + qψ = λψ`
//! and for the weighted form `−c²v″ = μv`.
//!
//! Both problems are integrated as `y″ = −w(x) y` with
//! `w = λ·ρ(x) − q(x)` using a fourth-order Magnus propagator on every
//! grid cell, with step-doubling error control. The scaled Prüfer angle
//! `θ = atan2(s·y, y′)` is tracked alongside; the `k`-th Dirichlet
//! eigenvalue is the unique `λ` with `θ(L; λ) = kπ`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::modes::ModeSet;
use crate::numerics;
use crate::profile::{Profile, ProfileKind};

/// Largest admissible `log |y|`; beyond it `f64` overflows.
pub const MAX_LOG_SCALE: f64 = 700.0;

const STEP_TOLERANCE: f64 = 1e-11;
const MAX_SUBSTEPS: usize = 50_000_000;
const ANGLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointData {
    pub value: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub index: usize,
    pub lambda: f64,
    pub eigenfunction: Profile,
    pub left_slope: f64,
    pub right_slope: f64,
}

/// Coefficients of `y″ = −(λρ − q) y` on a grid of cells.
#[derive(Clone, Copy)]
struct Operator<'a> {
    left: f64,
    right: f64,
    cells: usize,
    potential: Option<&'a Profile>,
    weight: Option<&'a Profile>,
}

impl<'a> Operator<'a> {
    fn schrodinger(q: &'a Profile) -> Self {
        Self {
            left: q.left(),
            right: q.right(),
            cells: q.count() - 1,
            potential: Some(q),
            weight: None,
        }
    }

    fn weighted(weight: &'a Profile) -> Self {
        Self {
            left: weight.left(),
            right: weight.right(),
            cells: weight.count() - 1,
            potential: None,
            weight: Some(weight),
        }
    }

    fn length(&self) -> f64 {
        self.right - self.left
    }

    #[inline]
    fn rho(&self, x: f64) -> f64 {
        self.weight.map_or(1.0, |p| p.eval_clamped(x))
    }

    #[inline]
    fn w(&self, x: f64, lambda: f64) -> f64 {
        let q = self.potential.map_or(0.0, |p| p.eval_clamped(x));
        lambda * self.rho(x) - q
    }

    fn bounds(&self, samples: Option<&Profile>) -> (f64, f64) {
        match samples {
            Some(p) => p
                .samples()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
            None => (0.0, 0.0),
        }
    }

    fn weight_bounds(&self) -> (f64, f64) {
        if self.weight.is_some() {
            self.bounds(self.weight)
        } else {
            (1.0, 1.0)
        }
    }

    fn potential_bounds(&self) -> (f64, f64) {
        self.bounds(self.potential)
    }
}

/// State after a sweep from the left end.
struct Sweep {
    value: f64,
    slope: f64,
    log_scale: f64,
    theta: f64,
    /// `∫ρψ²` in the current scale.
    weighted_norm: f64,
    /// `(value, slope, log_scale)` at every grid node when recorded.
    nodes: Vec<(f64, f64, f64)>,
}

/// One Magnus step of length `h` starting at `x0`; returns the propagator.
#[inline]
fn magnus_step(op: &Operator, x0: f64, h: f64, lambda: f64) -> [f64; 4] {
    const G: f64 = 0.288_675_134_594_812_9; // √3/6
    let w1 = op.w(x0 + h * (0.5 - G), lambda);
    let w2 = op.w(x0 + h * (0.5 + G), lambda);
    let wbar = 0.5 * (w1 + w2);
    let delta = 0.5 * G * h * h * (w2 - w1);
    let mu2 = delta * delta - h * h * wbar;
    let (c, s) = if mu2.abs() < 1e-3 {
        let m = mu2;
        (
            1.0 + m * (0.5 + m * (1.0 / 24.0 + m * (1.0 / 720.0 + m / 40320.0))),
            1.0 + m * (1.0 / 6.0 + m * (1.0 / 120.0 + m * (1.0 / 5040.0 + m / 362880.0))),
        )
    } else if mu2 > 0.0 {
        let mu = mu2.sqrt();
        (mu.cosh(), mu.sinh() / mu)
    } else {
        let nu = (-mu2).sqrt();
        (nu.cos(), nu.sin() / nu)
    };
    [c + s * delta, s * h, -s * h * wbar, c - s * delta]
}

#[inline]
fn apply(m: &[f64; 4], y: (f64, f64)) -> (f64, f64) {
    (m[0] * y.0 + m[1] * y.1, m[2] * y.0 + m[3] * y.1)
}

#[inline]
fn wrap_angle(d: f64) -> f64 {
    let mut d = d;
    while d > PI {
        d -= 2.0 * PI;
    }
    while d <= -PI {
        d += 2.0 * PI;
    }
    d
}

fn sweep(op: &Operator, lambda: f64, s: f64, record: bool) -> Result<Sweep> {
    sweep_from(op, lambda, s, record, (0.0, 1.0))
}

fn sweep_from(op: &Operator, lambda: f64, s: f64, record: bool, initial: (f64, f64)) -> Result<Sweep> {
    let cell = op.length() / op.cells as f64;
    let length = op.length();
    let mut y = initial;
    let mut log_scale = 0.0;
    let mut principal = (s * y.0).atan2(y.1);
    let mut theta = principal;
    let mut weighted_norm = 0.0;
    let mut nodes = Vec::with_capacity(if record { op.cells + 1 } else { 0 });
    if record {
        nodes.push((y.0, y.1, 0.0));
    }
    let mut total_substeps = 0usize;
    for i in 0..op.cells {
        let a = op.left + cell * i as f64;
        let wmax = op
            .w(a, lambda)
            .abs()
            .max(op.w(a + 0.5 * cell, lambda).abs())
            .max(op.w(a + cell, lambda).abs());
        let mut n = ((wmax.sqrt() * cell).ceil() as usize).max(1);
        'cell: loop {
            total_substeps += n;
            if total_substeps > MAX_SUBSTEPS {
                return Err(Error::Range(format!(
                    "λ = {lambda:e} needs more than {MAX_SUBSTEPS} integration steps"
                )));
            }
            let h = cell / n as f64;
            let tol = STEP_TOLERANCE * (h / length).max(1e-3);
            let mut z = y;
            let mut zt = theta;
            let mut zp = principal;
            let mut zn = weighted_norm;
            for j in 0..n {
                let x0 = a + h * j as f64;
                let full = apply(&magnus_step(op, x0, h, lambda), z);
                let mid = apply(&magnus_step(op, x0, 0.5 * h, lambda), z);
                let half = apply(&magnus_step(op, x0 + 0.5 * h, 0.5 * h, lambda), mid);
                let scale = z.0.abs().max(z.1.abs() / s).max(half.0.abs()).max(half.1.abs() / s);
                let err = (full.0 - half.0).abs().max((full.1 - half.1).abs() / s) / 15.0;
                if err > tol * scale && n < 1 << 20 {
                    n *= 2;
                    continue 'cell;
                }
                let next = (
                    half.0 + (half.0 - full.0) / 15.0,
                    half.1 + (half.1 - full.1) / 15.0,
                );
                zn += h / 6.0
                    * (op.rho(x0) * z.0 * z.0
                        + 4.0 * op.rho(x0 + 0.5 * h) * mid.0 * mid.0
                        + op.rho(x0 + h) * next.0 * next.0);
                let p = (s * next.0).atan2(next.1);
                zt += wrap_angle(p - zp);
                zp = p;
                z = next;
            }
            y = z;
            theta = zt;
            principal = zp;
            weighted_norm = zn;
            break;
        }
        let r = y.0.abs().max(y.1.abs());
        if r > 0.0 && (r > 1e50 || r < 1e-50) {
            y = (y.0 / r, y.1 / r);
            weighted_norm /= r * r;
            log_scale += r.ln();
        }
        if record {
            nodes.push((y.0, y.1, log_scale));
        }
    }
    let r = y.0.abs().max(y.1.abs());
    if r > 0.0 {
        y = (y.0 / r, y.1 / r);
        weighted_norm /= r * r;
        log_scale += r.ln();
    }
    Ok(Sweep {
        value: y.0,
        slope: y.1,
        log_scale,
        theta,
        weighted_norm,
        nodes,
    })
}

fn endpoint(sw: &Sweep) -> Result<EndpointData> {
    if sw.log_scale > MAX_LOG_SCALE {
        return Err(Error::Range(format!(
            "solution magnitude e^{:.1} exceeds the representable range",
            sw.log_scale
        )));
    }
    let f = sw.log_scale.exp();
    Ok(EndpointData {
        value: sw.value * f,
        slope: sw.slope * f,
    })
}

/// `(ψ(L), ψ′(L))` for `−ψ″ + qψ = λψ`, `ψ(0) = 0`, `ψ′(0) = 1`.
///
/// Fails with a range error when `|ψ|` would exceed `e^700`, which for
/// constant `q` happens once `√(q − λ)·L > 700`.
pub fn shoot(q: &Profile, lambda: f64) -> Result<EndpointData> {
    check_finite(lambda)?;
    let op = Operator::schrodinger(q);
    endpoint(&sweep(&op, lambda, prufer_scale(&op, lambda), false)?)
}

/// `(v(ξ, 1), ∂ₓv(ξ, 1))` for `−c²v″ = ξ²v`, `v(0) = 0`, `v′(0) = 1`.
pub fn frozen_wave_solution(c: &Profile, xi: f64) -> Result<EndpointData> {
    check_finite(xi)?;
    let weight = inverse_square(c)?;
    let op = Operator::weighted(&weight);
    let lambda = xi * xi;
    endpoint(&sweep(&op, lambda, prufer_scale(&op, lambda), false)?)
}

/// Node values `(y, y′)` of `y″ = (q − λ) y` started from `initial` at the
/// left end of `q`.
pub fn propagate(q: &Profile, lambda: f64, initial: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    check_finite(lambda)?;
    let op = Operator::schrodinger(q);
    let sw = sweep_from(&op, lambda, prufer_scale(&op, lambda), true, initial)?;
    if sw.nodes.iter().any(|n| n.2 > MAX_LOG_SCALE) {
        return Err(Error::Range("solution exceeds the representable range".into()));
    }
    Ok(sw
        .nodes
        .iter()
        .map(|&(v, d, ls)| (v * ls.exp(), d * ls.exp()))
        .collect())
}

fn check_finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite spectral parameter {v}")))
    }
}

/// `1/c²` on the grid of `c`.
pub fn inverse_square(c: &Profile) -> Result<Profile> {
    if c.samples().iter().any(|&v| v <= 0.0) {
        return Err(Error::Positivity("speed must be positive".into()));
    }
    c.map(ProfileKind::Auxiliary, |_, v| 1.0 / (v * v))
}

fn prufer_scale(op: &Operator, lambda: f64) -> f64 {
    let (_, rhi) = op.weight_bounds();
    let (_, qhi) = op.potential_bounds();
    (lambda * rhi - qhi).abs().sqrt().max(1.0)
}

fn scale_for_index(op: &Operator, k: usize) -> f64 {
    (k as f64 * PI / op.length()).max(1.0)
}

/// Largest index resolvable on `count` grid nodes.
pub fn max_reliable_index(count: usize) -> usize {
    (count.saturating_sub(1)) / 4
}

/// `k`-th Dirichlet eigenvalue, searching above `lower` (which must lie
/// below it).
fn find_eigenvalue(op: &Operator, k: usize, lower: Option<f64>) -> Result<f64> {
    let s = scale_for_index(op, k);
    let target = k as f64 * PI;
    let f = |lambda: f64| -> Result<(f64, f64)> {
        let sw = sweep(op, lambda, s, false)?;
        let denom = s * s * sw.value * sw.value + sw.slope * sw.slope;
        Ok((sw.theta - target, s * sw.weighted_norm / denom))
    };
    let (rlo, rhi) = op.weight_bounds();
    let (qlo, qhi) = op.potential_bounds();
    let base = (k as f64 * PI / op.length()).powi(2);
    let guess_lo = if base + qlo >= 0.0 { (base + qlo) / rhi } else { (base + qlo) / rlo };
    let guess_hi = if base + qhi >= 0.0 { (base + qhi) / rlo } else { (base + qhi) / rhi };

    let mut lo = match lower {
        Some(l) => l,
        None => guess_lo - 1e-9 * guess_lo.abs() - 1e-9,
    };
    let mut step = guess_lo.abs().max(1.0);
    let mut flo = f(lo)?.0;
    while flo >= 0.0 {
        lo -= step;
        step *= 2.0;
        flo = f(lo)?.0;
    }
    let mut hi = guess_hi.max(lo) + 1e-9 * guess_hi.abs() + 1e-9;
    step = guess_hi.abs().max(1.0) * 0.1;
    let (mut fhi, _) = f(hi)?;
    while fhi < 0.0 {
        lo = hi;
        hi += step;
        step *= 2.0;
        fhi = f(hi)?.0;
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x)?;
        if fx.abs() < ANGLE_TOLERANCE {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        x = if dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

fn check_index(q: &Profile, k: usize) -> Result<()> {
    let max = max_reliable_index(q.count());
    if k == 0 {
        return Err(Error::Domain("eigenvalue count must be at least 1".into()));
    }
    if k > max {
        return Err(Error::Resolution(format!(
            "requested {k} eigenvalues but a {}-node grid resolves at most {max}",
            q.count()
        )));
    }
    Ok(())
}

fn eigenvalue_list(op: &Operator, k_max: usize) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let lower = out.last().copied();
        out.push(find_eigenvalue(op, k, lower)?);
    }
    Ok(out)
}

/// First `k_max` Dirichlet eigenvalues of `−∂² + q` on the interval of `q`.
pub fn dirichlet_eigenvalues(q: &Profile, k_max: usize) -> Result<ModeSet> {
    check_index(q, k_max)?;
    let op = Operator::schrodinger(q);
    ModeSet::from_eigenvalues(&eigenvalue_list(&op, k_max)?, q.length())
}

/// First `k_max` Dirichlet eigenvalues of `−c²∂²` on the interval of `c`.
pub fn weighted_dirichlet_eigenvalues(c: &Profile, k_max: usize) -> Result<ModeSet> {
    check_index(c, k_max)?;
    let weight = inverse_square(c)?;
    let op = Operator::weighted(&weight);
    ModeSet::from_eigenvalues(&eigenvalue_list(&op, k_max)?, c.length())
}

/// The `k`-th Dirichlet eigenvalue alone.
pub fn dirichlet_eigenvalue(q: &Profile, k: usize) -> Result<f64> {
    check_index(q, k)?;
    find_eigenvalue(&Operator::schrodinger(q), k, None)
}

fn pair_from_sweep(q: &Profile, lambda: f64, sw: &Sweep) -> Result<EigenPair> {
    let index = (sw.theta / PI).round();
    let miss = (sw.theta - index * PI).abs();
    if index < 1.0 || miss > 1e-6 {
        return Err(Error::Spectral(format!(
            "λ = {lambda} is not a Dirichlet eigenvalue (Prüfer angle {:.3}π)",
            sw.theta / PI
        )));
    }
    let ref_scale = sw
        .nodes
        .iter()
        .map(|n| n.2 + n.0.abs().max(n.1.abs()).max(1e-300).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut values: Vec<f64> = sw.nodes.iter().map(|n| n.0 * (n.2 - ref_scale).exp()).collect();
    let slope_left = (-ref_scale).exp();
    let last = sw.nodes.last().unwrap();
    let slope_right = last.1 * (last.2 - ref_scale).exp();
    let h = q.step();
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    let norm = numerics::trapezoid(&sq, h).sqrt();
    for v in &mut values {
        *v /= norm;
    }
    let eigenfunction = Profile::new(ProfileKind::Auxiliary, q.left(), q.right(), values)?;
    Ok(EigenPair {
        index: index as usize,
        lambda,
        eigenfunction,
        left_slope: slope_left / norm,
        right_slope: slope_right / norm,
    })
}

/// Normalised eigenfunction for an eigenvalue `lambda` of `−∂² + q`.
pub fn dirichlet_eigenfunction(q: &Profile, lambda: f64) -> Result<EigenPair> {
    check_finite(lambda)?;
    let op = Operator::schrodinger(q);
    let sw = sweep(&op, lambda, prufer_scale(&op, lambda), true)?;
    pair_from_sweep(q, lambda, &sw)
}

/// First `k_max` eigenpairs of `−∂² + q`.
pub fn dirichlet_eigenpairs(q: &Profile, k_max: usize) -> Result<Vec<EigenPair>> {
    check_index(q, k_max)?;
    let op = Operator::schrodinger(q);
    let lambdas = eigenvalue_list(&op, k_max)?;
    lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let sw = sweep(&op, l, scale_for_index(&op, i + 1), true)?;
            pair_from_sweep(q, l, &sw)
        })
        .collect()
}

/// Eigenpairs for the listed indices only.
pub fn dirichlet_eigenpairs_at(q: &Profile, indices: &[usize]) -> Result<Vec<EigenPair>> {
    if let Some(&k) = indices.iter().max() {
        check_index(q, k)?;
    }
    let op = Operator::schrodinger(q);
    indices
        .iter()
        .map(|&k| {
            let l = find_eigenvalue(&op, k, None)?;
            let sw = sweep(&op, l, scale_for_index(&op, k), true)?;
            pair_from_sweep(q, l, &sw)
        })
        .collect()
}

/// Feynman–Hellmann sensitivity `∂λₖ/∂q(x) = φₖ(x)²`.
pub fn eigenvalue_sensitivity(q: &Profile, pair: &EigenPair) -> Result<Profile> {
    let phi = &pair.eigenfunction;
    if phi.count() != q.count() || phi.left() != q.left() || phi.right() != q.right() {
        return Err(Error::Validation(
            "eigenpair grid does not match the potential grid".into(),
        ));
    }
    phi.map(ProfileKind::Auxiliary, |_, v| v * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(n: usize) -> Profile {
        Profile::constant(ProfileKind::Potential, 0.0, 1.0, n, 0.0).unwrap()
    }

    #[test]
    fn shoot_free_at_first_eigenvalue() {
        let e = shoot(&zero(65), PI * PI).unwrap();
        assert!(e.value.abs() < 1e-9, "{e:?}");
        assert!((e.slope + 1.0).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn shoot_at_zero_is_linear() {
        let e = shoot(&zero(65), 0.0).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!((e.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shoot_constant_shift() {
        let q = Profile::constant(ProfileKind::Potential, 0.0, 1.0, 33, 5.5).unwrap();
        let e = shoot(&q, 5.5 + PI * PI).unwrap();
        assert!(e.value.abs() < 1e-9);
        assert!((e.slope + 1.0).abs() < 1e-8);
    }

    #[test]
    fn shoot_negative_lambda_matches_sinh() {
        let e = shoot(&zero(65), -400.0).unwrap();
        let exact = 20.0f64.sinh() / 20.0;
        assert!((e.value / exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shoot_overflow_is_range_error() {
        assert!(matches!(shoot(&zero(65), -1e6), Err(Error::Range(_))));
    }

    #[test]
    fn free_spectrum() {
        let ms = dirichlet_eigenvalues(&zero(129), 5).unwrap();
        for (k, l) in ms.lambdas().iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((l / exact - 1.0).abs() < 1e-9, "k={} {l}", k + 1);
        }
    }

    #[test]
    fn shifted_spectrum() {
        let q = Profile::constant(ProfileKind::Potential, 0.0, 1.0, 65, 7.0).unwrap();
        let ms = dirichlet_eigenvalues(&q, 3).unwrap();
        for (k, l) in ms.lambdas().iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2) + 7.0;
            assert!((l / exact - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_eigenvalues_is_resolution_error() {
        match dirichlet_eigenvalues(&zero(33), 9) {
            Err(Error::Resolution(msg)) => assert!(msg.contains("at most 8")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eigenfunction_of_free_problem() {
        let q = zero(257);
        let p = dirichlet_eigenfunction(&q, PI * PI).unwrap();
        assert_eq!(p.index, 1);
        assert!((p.right_slope + 2f64.sqrt() * PI).abs() < 1e-7);
        assert!((p.left_slope - 2f64.sqrt() * PI).abs() < 1e-7);
        let p2 = dirichlet_eigenfunction(&q, 4.0 * PI * PI).unwrap();
        assert!((p2.right_slope - 2f64.sqrt() * 2.0 * PI).abs() < 1e-7);
        for (x, v) in p.eigenfunction.nodes().zip(p.eigenfunction.samples()) {
            assert!((v - 2f64.sqrt() * (PI * x).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn non_eigenvalue_rejected() {
        assert!(matches!(
            dirichlet_eigenfunction(&zero(65), 12.0),
            Err(Error::Spectral(_))
        ));
    }

    #[test]
    fn sensitivity_of_free_mode() {
        let q = zero(257);
        let pair = dirichlet_eigenfunction(&q, PI * PI).unwrap();
        let s = eigenvalue_sensitivity(&q, &pair).unwrap();
        assert!((s.integral() - 1.0).abs() < 1e-8);
        for (x, v) in s.nodes().zip(s.samples()) {
            assert!((v - 2.0 * (PI * x).sin().powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn frozen_solution_free() {
        let c = Profile::constant(ProfileKind::Speed, 0.0, 1.0, 65, 1.0).unwrap();
        let e = frozen_wave_solution(&c, PI).unwrap();
        assert!(e.value.abs() < 1e-9 && (e.slope + 1.0).abs() < 1e-8);
        let e = frozen_wave_solution(&c, 1e-6).unwrap();
        assert!((e.value - 1.0).abs() < 1e-6 && (e.slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn weighted_spectrum_of_constant_speed() {
        let c = Profile::constant(ProfileKind::Speed, 0.0, 1.0, 65, 2.0).unwrap();
        let ms = weighted_dirichlet_eigenvalues(&c, 4).unwrap();
        for (k, l) in ms.lambdas().iter().enumerate() {
            let exact = (2.0 * (k + 1) as f64 * PI).powi(2);
            assert!((l / exact - 1.0).abs() < 1e-9);
        }
    }
}
