//! Half-line wave equation `u_tt = c²u_xx`, `u(t,0) = 0`, `u(0,·) = f`,
//! `u_t(0,·) = 0`, observed at `x = 1`.

use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::trace::{BoundaryTrace, TraceFlavor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveBoundary {
    /// Mur outgoing condition `u_t + c0 u_x = 0` at `1 + margin`.
    Transparent,
    /// Dirichlet wall far enough out that no reflection returns by `t_max`.
    Padded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveRunOptions {
    pub t_max: f64,
    /// Courant factor `c_max·dt/dx`; `1` is allowed and exact for constant speed.
    pub cfl: f64,
    pub boundary: WaveBoundary,
    pub pad_factor: f64,
    pub margin: f64,
    /// Grid cells on `[0, 1]`.
    pub resolution: usize,
    /// Record every this many time units instead of every step; runs at
    /// different resolutions then share sample times.
    pub sample_dt: Option<f64>,
}

impl Default for WaveRunOptions {
    fn default() -> Self {
        Self {
            t_max: 4.0,
            cfl: 0.9,
            boundary: WaveBoundary::Transparent,
            pad_factor: 1.0,
            margin: 0.25,
            resolution: 1024,
            sample_dt: None,
        }
    }
}

/// Trace plus solver-internal diagnostics.
#[derive(Debug, Clone)]
pub struct WaveRun {
    pub trace: BoundaryTrace,
    /// Centred spatial difference `∂ₓu(t, 1)` at every trace sample.
    pub flux: Vec<f64>,
    /// Discrete energy at every half step (conserved with a padded wall).
    pub energy: Vec<f64>,
    pub dx: f64,
    pub dt: f64,
}

/// Discretisation shared by the forward run and its adjoint.
#[derive(Debug, Clone)]
pub struct WaveGrid {
    pub dx: f64,
    pub dt: f64,
    /// Index of the node at `x = 1`.
    pub observe: usize,
    /// `(c_i dt/dx)²` at every node.
    r2: Vec<f64>,
    inv_c2: Vec<f64>,
    /// Mur coefficient, `None` for a reflecting wall.
    mur: Option<f64>,
    pub steps: usize,
    /// Simulation steps per recorded sample.
    pub stride: usize,
}

impl WaveGrid {
    /// Grid on `[0, 1 + extra]` with `resolution` cells per unit length and
    /// `samples` recorded values spaced `sample_dt` apart (a multiple of the
    /// simulation step).
    pub fn new(
        c: &Profile,
        resolution: usize,
        cfl: f64,
        extra: f64,
        transparent: bool,
        sample_dt: Option<f64>,
        t_max: f64,
    ) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Stability(format!("CFL factor {cfl} outside (0, 1]")));
        }
        if resolution < 8 {
            return Err(Error::Resolution(format!("wave resolution {resolution} below 8 cells")));
        }
        if !(t_max > 0.0) {
            return Err(Error::Domain(format!("t_max must be positive, got {t_max}")));
        }
        let c0 = c.samples()[0];
        c.check_background(c0)?;
        let dx = 1.0 / resolution as f64;
        let nodes = resolution + (extra / dx).ceil() as usize + 1;
        let speeds: Vec<f64> = (0..nodes).map(|i| c.eval_extended(dx * i as f64)).collect();
        if speeds.iter().any(|&v| v <= 0.0) {
            return Err(Error::Positivity("speed must be positive".into()));
        }
        let cmax = speeds.iter().cloned().fold(0.0, f64::max);
        let dt_limit = cfl * dx / cmax;
        let (dt, stride, steps) = match sample_dt {
            Some(sdt) => {
                let stride = ((sdt / dt_limit) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                let dt = sdt / stride as f64;
                let samples = (t_max / sdt + 1e-9).floor() as usize;
                (dt, stride, samples * stride)
            }
            None => {
                let steps = ((t_max / dt_limit) * (1.0 - 1e-12)).ceil() as usize;
                (t_max / steps as f64, 1, steps)
            }
        };
        let r2: Vec<f64> = speeds.iter().map(|v| (v * dt / dx).powi(2)).collect();
        let r = c0 * dt / dx;
        if r > 1.0 + 1e-12 {
            return Err(Error::Stability(format!("Courant number {r} exceeds 1")));
        }
        Ok(Self {
            dx,
            dt,
            observe: resolution,
            inv_c2: speeds.iter().map(|v| 1.0 / (v * v)).collect(),
            r2,
            mur: transparent.then_some((r - 1.0) / (r + 1.0)),
            steps,
            stride,
        })
    }

    pub fn nodes(&self) -> usize {
        self.r2.len()
    }

    pub fn samples(&self) -> usize {
        self.steps / self.stride + 1
    }

    pub fn sample_dt(&self) -> f64 {
        self.dt * self.stride as f64
    }

    fn first_step(&self, u0: &[f64], u1: &mut [f64]) {
        let n = u0.len() - 1;
        u1[0] = 0.0;
        for i in 1..n {
            u1[i] = u0[i] + 0.5 * self.r2[i] * (u0[i + 1] - 2.0 * u0[i] + u0[i - 1]);
        }
        u1[n] = match self.mur {
            Some(beta) => u0[n - 1] + beta * (u1[n - 1] - u0[n]),
            None => 0.0,
        };
    }

    fn step(&self, prev: &[f64], cur: &[f64], next: &mut [f64]) {
        let n = cur.len() - 1;
        next[0] = 0.0;
        for i in 1..n {
            next[i] = 2.0 * cur[i] - prev[i] + self.r2[i] * (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]);
        }
        next[n] = match self.mur {
            Some(beta) => cur[n - 1] + beta * (next[n - 1] - cur[n]),
            None => 0.0,
        };
    }

    fn energy(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() - 1;
        let mut kinetic = 0.0;
        for i in 1..n {
            let v = (b[i] - a[i]) / self.dt;
            kinetic += v * v * self.inv_c2[i];
        }
        let mut strain = 0.0;
        for i in 0..n {
            strain += (b[i + 1] - b[i]) * (a[i + 1] - a[i]) / (self.dx * self.dx);
        }
        (kinetic + strain) * self.dx
    }

    /// Runs from initial data `u0` (all nodes), calling `observe(step, u)`
    /// after every step including step 0.
    fn run(&self, u0: Vec<f64>, mut observe: impl FnMut(usize, &[f64], Option<&[f64]>)) {
        let m = u0.len();
        let mut prev = u0;
        let mut cur = vec![0.0; m];
        let mut next = vec![0.0; m];
        observe(0, &prev, None);
        if self.steps == 0 {
            return;
        }
        self.first_step(&prev, &mut cur);
        observe(1, &cur, Some(&prev));
        for n in 1..self.steps {
            self.step(&prev, &cur, &mut next);
            observe(n + 1, &next, Some(&cur));
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
    }

    /// Recorded traces at `x = 1` for initial values on nodes `1..observe`.
    pub fn forward(&self, f_interior: &[f64]) -> Vec<f64> {
        let mut u0 = vec![0.0; self.nodes()];
        u0[1..self.observe].copy_from_slice(f_interior);
        let mut out = Vec::with_capacity(self.samples());
        let (stride, obs) = (self.stride, self.observe);
        self.run(u0, |n, u, _| {
            if n % stride == 0 {
                out.push(u[obs]);
            }
        });
        out
    }

    /// Exact transpose of [`WaveGrid::forward`].
    pub fn adjoint(&self, residual: &[f64]) -> Vec<f64> {
        let m = self.nodes();
        let last = m - 1;
        let total = self.steps;
        let seed = |n: usize, a: &mut Vec<f64>| {
            if n % self.stride == 0 {
                a[self.observe] += residual[n / self.stride];
            }
        };
        let fresh = |n: usize| {
            let mut a = vec![0.0; m];
            seed(n, &mut a);
            a
        };
        if total == 0 {
            let a = fresh(0);
            return a[1..self.observe].to_vec();
        }
        let mut next = fresh(total);
        let mut cur = fresh(total - 1);
        let mut prev = if total >= 2 { fresh(total - 2) } else { vec![0.0; m] };
        for n in (1..total).rev() {
            // Step n maps (u^{n-1}, u^n) to u^{n+1}; boundary first.
            if let Some(beta) = self.mur {
                let g = next[last];
                cur[last - 1] += g;
                next[last - 1] += beta * g;
                cur[last] -= beta * g;
            }
            for i in 1..last {
                let g = next[i];
                if g == 0.0 {
                    continue;
                }
                let r2 = self.r2[i];
                cur[i] += (2.0 - 2.0 * r2) * g;
                cur[i + 1] += r2 * g;
                cur[i - 1] += r2 * g;
                prev[i] -= g;
            }
            next = std::mem::replace(&mut cur, std::mem::take(&mut prev));
            prev = if n >= 2 { fresh(n - 2) } else { vec![0.0; m] };
        }
        // First step: u¹ from u⁰.
        let mut first = next;
        let u0_adj = &mut cur;
        if let Some(beta) = self.mur {
            let g = first[last];
            u0_adj[last - 1] += g;
            first[last - 1] += beta * g;
            u0_adj[last] -= beta * g;
        }
        for i in 1..last {
            let g = first[i];
            let r2 = self.r2[i];
            u0_adj[i] += (1.0 - r2) * g;
            u0_adj[i + 1] += 0.5 * r2 * g;
            u0_adj[i - 1] += 0.5 * r2 * g;
        }
        u0_adj[1..self.observe].to_vec()
    }
}

fn extra_length(c: &Profile, opts: &WaveRunOptions) -> f64 {
    match opts.boundary {
        WaveBoundary::Transparent => opts.margin,
        WaveBoundary::Padded => opts.pad_factor * c.samples()[0] * opts.t_max / 2.0 + opts.margin,
    }
}

/// Full run with diagnostics.
pub fn run_wave(c: &Profile, f: &Profile, opts: &WaveRunOptions) -> Result<WaveRun> {
    if !(opts.pad_factor >= 0.0) || !(opts.margin >= 0.0) {
        return Err(Error::Validation("pad_factor and margin must be non-negative".into()));
    }
    f.check_support(0.0, 1.0, "F_supp")?;
    if f.left() > 0.0 || f.right() < 1.0 {
        return Err(Error::Validation("F_supp: initial data must be given on [0, 1]".into()));
    }
    let grid = WaveGrid::new(
        c,
        opts.resolution,
        opts.cfl,
        extra_length(c, opts),
        opts.boundary == WaveBoundary::Transparent,
        opts.sample_dt,
        opts.t_max,
    )?;
    let mut u0 = vec![0.0; grid.nodes()];
    for (i, v) in u0.iter_mut().enumerate().take(grid.observe).skip(1) {
        *v = f.eval_clamped(grid.dx * i as f64);
    }
    let obs = grid.observe;
    let mut values = Vec::with_capacity(grid.steps + 1);
    let mut flux = Vec::with_capacity(grid.steps + 1);
    let mut energy = Vec::with_capacity(grid.steps);
    let stride = grid.stride;
    grid.run(u0, |n, u, previous| {
        if n % stride == 0 {
            values.push(u[obs]);
            flux.push((u[obs + 1] - u[obs - 1]) / (2.0 * grid.dx));
        }
        if let Some(p) = previous {
            energy.push(grid.energy(p, u));
        }
    });
    let trace = BoundaryTrace::new(0.0, grid.dt * stride as f64, values, TraceFlavor::Dirichlet)?;
    Ok(WaveRun {
        trace,
        flux,
        energy,
        dx: grid.dx,
        dt: grid.dt,
    })
}

/// Dirichlet trace `u(t, 1)` by leapfrog.
pub fn solve_wave(c: &Profile, f: &Profile, opts: &WaveRunOptions) -> Result<BoundaryTrace> {
    Ok(run_wave(c, f, opts)?.trace)
}

/// Fourth-order time derivative of a uniformly sampled signal.
pub fn time_derivative(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 5 {
        return Err(Error::Resolution(format!(
            "time derivative needs at least 5 samples, got {n}"
        )));
    }
    let v = values;
    let mut d = vec![0.0; n];
    let s = 12.0 * dt;
    d[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / s;
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / s;
    for i in 2..n - 2 {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / s;
    }
    d[n - 2] = (-v[n - 5] + 6.0 * v[n - 4] - 18.0 * v[n - 3] + 10.0 * v[n - 2] + 3.0 * v[n - 1]) / s;
    d[n - 1] = (3.0 * v[n - 5] - 16.0 * v[n - 4] + 36.0 * v[n - 3] - 48.0 * v[n - 2] + 25.0 * v[n - 1]) / s;
    Ok(d)
}

/// `∂ₓu(t, 1) = −(1/c0) ∂ₜu(t, 1)` for purely outgoing waves.
pub fn neumann_trace_from_dirichlet(trace: &BoundaryTrace, c0: f64) -> Result<BoundaryTrace> {
    if trace.flavor() != TraceFlavor::Dirichlet {
        return Err(Error::Validation("expected a Dirichlet trace".into()));
    }
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("background speed must be positive, got {c0}")));
    }
    let d = time_derivative(trace.values(), trace.dt())?;
    let values = d.into_iter().map(|v| -v / c0).collect();
    BoundaryTrace::new(trace.t0(), trace.dt(), values, TraceFlavor::Neumann)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileKind;

    fn unit_speed() -> Profile {
        Profile::constant(ProfileKind::Speed, 0.0, 1.0, 33, 1.0).unwrap()
    }

    fn bump(a: f64, b: f64) -> Profile {
        Profile::from_fn(ProfileKind::InitialData, 0.0, 1.0, 1025, |x| {
            if x > a && x < b {
                let s = (x - a) / (b - a);
                (s * (1.0 - s)).powi(4) * 256.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn finite_speed_of_propagation() {
        let opts = WaveRunOptions { t_max: 1.0, ..Default::default() };
        let tr = solve_wave(&unit_speed(), &bump(0.4, 0.6), &opts).unwrap();
        let peak = tr.peak();
        for (t, v) in tr.times().zip(tr.values()) {
            if t < 0.39 {
                assert!(v.abs() < 1e-6 * peak, "t={t} v={v}");
            }
        }
        let first = tr.times().zip(tr.values()).find(|(_, v)| v.abs() > 1e-3 * peak).unwrap().0;
        assert!((first - 0.4).abs() < 0.03, "first arrival {first}");
    }

    #[test]
    fn unit_cfl_is_exact_dalembert() {
        let f = bump(0.3, 0.7);
        let opts = WaveRunOptions { t_max: 2.5, cfl: 1.0, resolution: 256, ..Default::default() };
        let tr = solve_wave(&unit_speed(), &f, &opts).unwrap();
        for (t, v) in tr.times().zip(tr.values()) {
            let exact = if t < 1.0 {
                0.5 * f.eval_clamped(1.0 - t)
            } else {
                -0.5 * f.eval_clamped((t - 1.0).min(1.0))
            };
            assert!((v - exact).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn cfl_violation_is_stability_error() {
        let opts = WaveRunOptions { cfl: 1.2, ..Default::default() };
        let r = solve_wave(&unit_speed(), &bump(0.4, 0.6), &opts);
        assert!(matches!(r, Err(Error::Stability(_))));
    }

    #[test]
    fn support_violation_is_validation_error() {
        let f = Profile::from_fn(ProfileKind::InitialData, 0.0, 1.0, 65, |x| x).unwrap();
        let r = solve_wave(&unit_speed(), &f, &WaveRunOptions::default());
        assert!(matches!(r, Err(Error::Validation(m)) if m.contains("F_supp")));
    }

    #[test]
    fn adjoint_is_transpose() {
        let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 65, |x| {
            1.0 + 0.2 * (std::f64::consts::PI * x).sin().powi(2)
        })
        .unwrap();
        let grid = WaveGrid::new(&c, 32, 0.8, 0.25, true, Some(0.05), 1.5).unwrap();
        let n = grid.observe - 1;
        let x: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let y: Vec<f64> = (0..grid.samples()).map(|i| ((i * 5 % 13) as f64 - 6.0) / 4.0).collect();
        let ax = grid.forward(&x);
        let aty = grid.adjoint(&y);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn zero_trace_has_zero_neumann_trace() {
        let tr = BoundaryTrace::new(0.0, 0.1, vec![0.0; 10], TraceFlavor::Dirichlet).unwrap();
        let n = neumann_trace_from_dirichlet(&tr, 1.0).unwrap();
        assert!(n.values().iter().all(|v| *v == 0.0));
        assert_eq!(n.flavor(), TraceFlavor::Neumann);
    }

    #[test]
    fn neumann_needs_five_samples() {
        let tr = BoundaryTrace::new(0.0, 0.1, vec![0.0; 4], TraceFlavor::Dirichlet).unwrap();
        assert!(matches!(neumann_trace_from_dirichlet(&tr, 1.0), Err(Error::Resolution(_))));
    }

    #[test]
    fn time_derivative_exact_on_quartics() {
        let dt = 0.1;
        let v: Vec<f64> = (0..12).map(|i| (i as f64 * dt).powi(4) - (i as f64 * dt)).collect();
        let d = time_derivative(&v, dt).unwrap();
        for (i, dv) in d.iter().enumerate() {
            let t = i as f64 * dt;
            assert!((dv - (4.0 * t.powi(3) - 1.0)).abs() < 1e-10);
        }
    }
}
