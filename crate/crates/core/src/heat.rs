//! Convection–diffusion `u_t − u_xx + b u_x = 0` on `(0, 1)` with Dirichlet
//! ends and `u(0,·) = g`, observed through the flux `∂ₓu(t, 1)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::liouville::{convection_to_potential, gauge_initial_data, GaugeDirection};
use crate::numerics;
use crate::profile::Profile;
use crate::sturm::{self, EigenPair};
use crate::trace::{BoundaryTrace, TraceFlavor};

#[derive(Debug, Clone, PartialEq)]
pub struct HeatRunOptions {
    pub times: Vec<f64>,
    /// Eigenpairs used by modal synthesis.
    pub mode_count: usize,
    /// Nodes of the finite-difference grid.
    pub fd_resolution: usize,
    /// Nominal Crank–Nicolson step.
    pub fd_dt: f64,
}

impl HeatRunOptions {
    /// `count` uniform samples on `[t1, t2]`.
    pub fn uniform(t1: f64, t2: f64, count: usize) -> Self {
        let times = if count == 1 {
            vec![t1]
        } else {
            (0..count)
                .map(|i| t1 + (t2 - t1) * i as f64 / (count - 1) as f64)
                .collect()
        };
        Self {
            times,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::Validation("no sample times".into()));
        }
        if self.times[0] <= 0.0 || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "sample times must be positive and strictly increasing".into(),
            ));
        }
        if self.mode_count == 0 {
            return Err(Error::Validation("mode_count must be at least 1".into()));
        }
        if self.fd_resolution < 5 || !(self.fd_dt > 0.0) {
            return Err(Error::Resolution("finite-difference grid too coarse".into()));
        }
        Ok(())
    }

    fn uniform_step(&self) -> Result<(f64, f64)> {
        let t0 = self.times[0];
        if self.times.len() == 1 {
            return Ok((t0, 1.0));
        }
        let dt = (self.times[self.times.len() - 1] - t0) / (self.times.len() - 1) as f64;
        for (i, t) in self.times.iter().enumerate() {
            if (t - (t0 + dt * i as f64)).abs() > 1e-9 * dt.max(t.abs()) {
                return Err(Error::Validation(
                    "a BoundaryTrace needs uniformly spaced sample times".into(),
                ));
            }
        }
        Ok((t0, dt))
    }
}

impl Default for HeatRunOptions {
    fn default() -> Self {
        Self {
            times: (1..=100).map(|i| 0.01 * i as f64).collect(),
            mode_count: 60,
            fd_resolution: 2049,
            fd_dt: 1e-4,
        }
    }
}

/// Modal synthesis result.
#[derive(Debug, Clone)]
pub struct ModalHeatRun {
    pub values: Vec<f64>,
    /// `⟨h, φₖ⟩`
    pub coefficients: Vec<f64>,
    pub pairs: Vec<EigenPair>,
    /// Bound on the omitted modes at the earliest sample time.
    pub tail_bound: f64,
}

fn check_heat_inputs(b: &Profile, g: &Profile) -> Result<()> {
    if b.left() != 0.0 || b.right() != 1.0 || g.left() != 0.0 || g.right() != 1.0 {
        return Err(Error::Domain("heat coefficients and data live on [0, 1]".into()));
    }
    let scale = g.sup_norm().max(1e-300);
    let ends = g.samples()[0].abs().max(g.samples()[g.count() - 1].abs());
    if ends > 1e-10 * scale.max(1.0) {
        return Err(Error::Validation(
            "initial data must vanish at both endpoints".into(),
        ));
    }
    Ok(())
}

/// `Σₖ ⟨h, φₖ⟩ e^{−λₖt} φₖ′(1)` with `h` the gauged data and `(λₖ, φₖ)` the
/// eigenpairs of `−∂² + V`, `V = −½b′ + ¼b²`.
pub fn heat_flux_modal(b: &Profile, g: &Profile, times: &[f64], mode_count: usize) -> Result<ModalHeatRun> {
    check_heat_inputs(b, g)?;
    let g = if g.count() == b.count() {
        g.clone()
    } else {
        g.resample(b.count())?
    };
    let h = gauge_initial_data(&g, b, GaugeDirection::Forward)?;
    let v = convection_to_potential(b)?;
    let pairs = sturm::dirichlet_eigenpairs(&v, mode_count)?;
    let coefficients: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let prod: Vec<f64> = h
                .samples()
                .iter()
                .zip(p.eigenfunction.samples())
                .map(|(a, b)| a * b)
                .collect();
            numerics::simpson(&prod, h.step())
        })
        .collect();
    let values = times
        .iter()
        .map(|&t| {
            pairs
                .iter()
                .zip(&coefficients)
                .map(|(p, c)| c * (-p.lambda * t).exp() * p.right_slope)
                .sum()
        })
        .collect();
    let tail_bound = modal_tail_bound(&pairs, h.l2_norm(), v.integral(), times[0]);
    Ok(ModalHeatRun {
        values,
        coefficients,
        pairs,
        tail_bound,
    })
}

/// `Σ_{k>K} ‖h‖ √2·√λₖ e^{−λₖt}` with `λₖ ≈ (kπ)² + ∫V`.
fn modal_tail_bound(pairs: &[EigenPair], h_norm: f64, mean_v: f64, t: f64) -> f64 {
    let k0 = pairs.len();
    let floor = pairs.last().map_or(0.0, |p| p.lambda);
    let mut total = 0.0;
    for k in k0 + 1..k0 + 10_000 {
        let lambda = ((k as f64 * PI).powi(2) + mean_v - 1.0).max(floor);
        let term = h_norm * (2.0 * lambda).sqrt() * 1.5 * (-lambda * t).exp();
        total += term;
        if term < 1e-300 || term < 1e-17 * total {
            break;
        }
    }
    total
}

/// Modal flux trace at uniformly spaced `opts.times`.
pub fn solve_heat_modal(b: &Profile, g: &Profile, opts: &HeatRunOptions) -> Result<(BoundaryTrace, f64)> {
    opts.validate()?;
    let (t0, dt) = opts.uniform_step()?;
    let run = heat_flux_modal(b, g, &opts.times, opts.mode_count)?;
    let trace = BoundaryTrace::new(t0, dt, run.values, TraceFlavor::Neumann)?;
    Ok((trace, run.tail_bound))
}

/// Crank–Nicolson flux `∂ₓu(t, 1)` at arbitrary increasing `times`, with
/// two backward-Euler half steps to damp the start-up transient.
pub fn heat_flux_fd(b: &Profile, g: &Profile, times: &[f64], nodes: usize, dt: f64) -> Result<Vec<f64>> {
    check_heat_inputs(b, g)?;
    if nodes < 5 {
        return Err(Error::Resolution("finite-difference grid needs at least 5 nodes".into()));
    }
    let n = nodes - 1;
    let h = 1.0 / n as f64;
    let bx: Vec<f64> = (0..=n).map(|i| b.eval_clamped(h * i as f64)).collect();
    let mut u: Vec<f64> = (0..=n).map(|i| g.eval_clamped(h * i as f64)).collect();
    u[0] = 0.0;
    u[n] = 0.0;
    // A u = u_xx − b u_x on interior nodes: sub, diag, sup coefficients.
    let lower: Vec<f64> = (0..=n).map(|i| 1.0 / (h * h) + bx[i] / (2.0 * h)).collect();
    let centre = -2.0 / (h * h);
    let upper: Vec<f64> = (0..=n).map(|i| 1.0 / (h * h) - bx[i] / (2.0 * h)).collect();

    // theta = 1 is backward Euler, theta = ½ Crank–Nicolson.
    let advance = |u: &mut Vec<f64>, tau: f64, theta: f64| {
        let m = n - 1;
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for j in 0..m {
            let i = j + 1;
            let au = lower[i] * u[i - 1] + centre * u[i] + upper[i] * u[i + 1];
            rhs[j] = u[i] + (1.0 - theta) * tau * au;
            sub[j] = -theta * tau * lower[i];
            diag[j] = 1.0 - theta * tau * centre;
            sup[j] = -theta * tau * upper[i];
        }
        let sol = numerics::solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
        u[1..n].copy_from_slice(&sol);
    };

    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut started = false;
    for &target in times {
        if target < t {
            return Err(Error::Validation("sample times must increase".into()));
        }
        while target - t > 1e-14 {
            if !started {
                let tau = dt.min(target - t);
                advance(&mut u, 0.5 * tau, 1.0);
                advance(&mut u, 0.5 * tau, 1.0);
                t += tau;
                started = true;
                continue;
            }
            let steps = ((target - t) / dt - 1e-9).ceil().max(1.0);
            let tau = (target - t) / steps;
            for _ in 0..steps as usize {
                advance(&mut u, tau, 0.5);
            }
            t = target;
        }
        out.push(
            (25.0 * u[n] - 48.0 * u[n - 1] + 36.0 * u[n - 2] - 16.0 * u[n - 3] + 3.0 * u[n - 4]) / (12.0 * h),
        );
    }
    Ok(out)
}

/// Crank–Nicolson flux trace at uniformly spaced `opts.times`.
pub fn solve_heat_fd(b: &Profile, g: &Profile, opts: &HeatRunOptions) -> Result<BoundaryTrace> {
    opts.validate()?;
    let (t0, dt) = opts.uniform_step()?;
    let values = heat_flux_fd(b, g, &opts.times, opts.fd_resolution, opts.fd_dt)?;
    BoundaryTrace::new(t0, dt, values, TraceFlavor::Neumann)
}
