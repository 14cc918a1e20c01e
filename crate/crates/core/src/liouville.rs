//! Travel-time coordinates, the Liouville potential, and the convection gauge.

use crate::error::{Error, Result};
use crate::numerics;
use crate::profile::{Profile, ProfileKind};
use crate::sturm;

/// Riccati solutions beyond this magnitude are treated as blow-up.
pub const RICCATI_BLOWUP: f64 = 1e6;

/// `y(x) = ∫₀ˣ 1/c` and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeMap {
    pub forward: Profile,
    pub inverse: Profile,
    pub length: f64,
}

impl TravelTimeMap {
    pub fn to_travel_time(&self, x: f64) -> Result<f64> {
        self.forward.eval(x)
    }

    pub fn to_position(&self, y: f64) -> Result<f64> {
        self.inverse.eval(y)
    }
}

/// Travel time `∫ 1/c` over the interval of `c`.
pub fn travel_time(c: &Profile) -> Result<f64> {
    let slowness = c.map(ProfileKind::Auxiliary, |_, v| 1.0 / v)?;
    Ok(*slowness.cumulative_integral().last().unwrap())
}

/// Liouville potential `q(y) = ¼c′² − ½c c″` on the uniform travel-time grid
/// `[0, L]` (same node count as `c`), together with the coordinate map.
pub fn speed_to_potential(c: &Profile, c0: f64) -> Result<(Profile, TravelTimeMap)> {
    if c.kind() != ProfileKind::Speed {
        return Err(Error::Validation(format!("expected a speed profile, got {}", c.kind())));
    }
    if c.samples().iter().any(|&v| v <= 0.0) {
        return Err(Error::Positivity("speed touches zero".into()));
    }
    c.check_background(c0)?;
    let d1 = c.derivative(1)?;
    let d2 = c.derivative(2)?;
    let n = c.count();
    let flat = |i: usize| {
        c.samples()[i.saturating_sub(6)..(i + 7).min(n)]
            .iter()
            .all(|v| (v - c0).abs() <= 1e-15 * c0)
    };
    // Stencils that only see background samples give exactly zero.
    let qx: Vec<f64> = (0..n)
        .map(|i| {
            let (v, a, b) = (c.samples()[i], d1.samples()[i], d2.samples()[i]);
            if flat(i) {
                0.0
            } else {
                0.25 * a * a - 0.5 * v * b
            }
        })
        .collect();
    let qx = Profile::new(ProfileKind::Auxiliary, c.left(), c.right(), qx)?;

    let slowness = c.map(ProfileKind::Auxiliary, |_, v| 1.0 / v)?;
    let ys: Vec<f64> = slowness.cumulative_integral();
    let xs: Vec<f64> = c.nodes().collect();
    let length = *ys.last().unwrap();
    let forward = Profile::new(ProfileKind::Auxiliary, c.left(), c.right(), ys.clone())?;
    let hy = length / (n - 1) as f64;
    let xs_of_y: Vec<f64> = (0..n)
        .map(|j| numerics::hermite_eval(&ys, &xs, c.samples(), hy * j as f64))
        .collect();
    let inverse = Profile::new(ProfileKind::Auxiliary, 0.0, length, xs_of_y.clone())?;
    let q: Vec<f64> = xs_of_y.iter().map(|&x| qx.eval_clamped(x)).collect();
    let q = Profile::new(ProfileKind::Potential, 0.0, length, q)?;
    Ok((q, TravelTimeMap { forward, inverse, length }))
}

/// Speed on `[0, x(L)]` whose Liouville potential is `q`, from `u″ = q u`,
/// `u(0) = c0^{-1/2}`, `u′(0) = 0`, `c̃ = u⁻²`, `x(y) = ∫₀ʸ c̃`.
pub fn potential_to_speed(q: &Profile, c0: f64) -> Result<Profile> {
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("background speed must be positive, got {c0}")));
    }
    let states = sturm::propagate(q, 0.0, (c0.powf(-0.5), 0.0))?;
    if let Some(j) = states.iter().position(|s| s.0 <= 0.0) {
        return Err(Error::Reconstruction(format!(
            "u = c^(-1/2) reaches zero near y = {:.6}; q does not arise from a positive speed",
            q.node(j)
        )));
    }
    let ctilde: Vec<f64> = states.iter().map(|s| 1.0 / (s.0 * s.0)).collect();
    let ct = Profile::new(ProfileKind::Speed, q.left(), q.right(), ctilde.clone())?;
    let xs = ct.cumulative_integral();
    let ys: Vec<f64> = q.nodes().collect();
    let right = *xs.last().unwrap();
    let n = q.count();
    let dy: Vec<f64> = ctilde.iter().map(|v| 1.0 / v).collect();
    let hx = right / (n - 1) as f64;
    let c: Vec<f64> = (0..n)
        .map(|i| {
            let y = numerics::hermite_eval(&xs, &ys, &dy, hx * i as f64);
            ct.eval_clamped(y)
        })
        .collect();
    Profile::new(ProfileKind::Speed, 0.0, right, c)
}

/// `V = −½b′ + ¼b²` on the grid of `b`.
pub fn convection_to_potential(b: &Profile) -> Result<Profile> {
    let d = b.derivative(1)?;
    let v = b
        .samples()
        .iter()
        .zip(d.samples())
        .map(|(bv, dv)| -0.5 * dv + 0.25 * bv * bv)
        .collect();
    Profile::new(ProfileKind::Potential, b.left(), b.right(), v)
}

/// Solves `b′ = b²/2 − 2V` backward from `b(right) = b_right`.
pub fn recover_convection(v: &Profile, b_right: f64) -> Result<Profile> {
    let rhs = |x: f64, b: f64| 0.5 * b * b - 2.0 * v.eval_clamped(x);
    let n = v.count();
    let h_cell = v.step();
    let mut out = vec![0.0; n];
    out[n - 1] = b_right;
    let mut b = b_right;
    let tol = 1e-12;
    let mut h = -h_cell;
    for i in (0..n - 1).rev() {
        let x_end = v.node(i);
        let mut x = v.node(i + 1);
        while x > x_end {
            if x + h < x_end {
                h = x_end - x;
            }
            let (b_new, err) = dormand_prince(&rhs, x, b, h);
            let scale = 1.0 + b.abs().max(b_new.abs());
            if err <= tol * scale || h.abs() < 1e-14 {
                x += h;
                b = b_new;
                if !b.is_finite() || b.abs() > RICCATI_BLOWUP {
                    return Err(Error::Reconstruction(format!(
                        "Riccati solution blows up near x = {x:.6}"
                    )));
                }
                let grow = if err > 0.0 { 0.9 * (tol * scale / err).powf(0.2) } else { 5.0 };
                h *= grow.clamp(0.2, 5.0);
                h = h.max(-h_cell);
            } else {
                h *= (0.9 * (tol * scale / err).powf(0.2)).max(0.1);
            }
        }
        out[i] = b;
    }
    Profile::new(ProfileKind::Convection, v.left(), v.right(), out)
}

fn dormand_prince(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> (f64, f64) {
    let k1 = f(x, y);
    let k2 = f(x + h / 5.0, y + h * k1 / 5.0);
    let k3 = f(x + 3.0 * h / 10.0, y + h * (3.0 * k1 + 9.0 * k2) / 40.0);
    let k4 = f(x + 4.0 * h / 5.0, y + h * (44.0 * k1 / 45.0 - 56.0 * k2 / 15.0 + 32.0 * k3 / 9.0));
    let k5 = f(
        x + 8.0 * h / 9.0,
        y + h * (19372.0 * k1 / 6561.0 - 25360.0 * k2 / 2187.0 + 64448.0 * k3 / 6561.0 - 212.0 * k4 / 729.0),
    );
    let k6 = f(
        x + h,
        y + h
            * (9017.0 * k1 / 3168.0 - 355.0 * k2 / 33.0 + 46732.0 * k3 / 5247.0 + 49.0 * k4 / 176.0
                - 5103.0 * k5 / 18656.0),
    );
    let y5 = y + h * (35.0 * k1 / 384.0 + 500.0 * k3 / 1113.0 + 125.0 * k4 / 192.0 - 2187.0 * k5 / 6784.0
        + 11.0 * k6 / 84.0);
    let k7 = f(x + h, y5);
    let y4 = y + h
        * (5179.0 * k1 / 57600.0 + 7571.0 * k3 / 16695.0 + 393.0 * k4 / 640.0 - 92097.0 * k5 / 339200.0
            + 187.0 * k6 / 2100.0
            + k7 / 40.0);
    (y5, (y5 - y4).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeDirection {
    /// `g ↦ h = e^{−½∫₁ˣ b} g`
    Forward,
    /// `h ↦ g = e^{+½∫₁ˣ b} h`
    Inverse,
}

/// Multiplies by `e^{∓½∫₁ˣ b}`; `g` and `b` must share one grid.
pub fn gauge_initial_data(g: &Profile, b: &Profile, direction: GaugeDirection) -> Result<Profile> {
    if g.count() != b.count() || g.left() != b.left() || g.right() != b.right() {
        return Err(Error::Validation(
            "initial data and convection must share one grid".into(),
        ));
    }
    let cum = b.cumulative_integral();
    let total = *cum.last().unwrap();
    let sign = match direction {
        GaugeDirection::Forward => -0.5,
        GaugeDirection::Inverse => 0.5,
    };
    let out = g
        .samples()
        .iter()
        .zip(&cum)
        .map(|(v, c)| v * (sign * (c - total)).exp())
        .collect();
    Profile::new(g.kind(), g.left(), g.right(), out)
}

/// Gauge factor `e^{−½∫₁ˣ b}` at every node.
pub fn gauge_factor(b: &Profile) -> Vec<f64> {
    let cum = b.cumulative_integral();
    let total = *cum.last().unwrap();
    cum.iter().map(|c| (-0.5 * (c - total)).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(kind: ProfileKind, v: f64) -> Profile {
        Profile::constant(kind, 0.0, 1.0, 65, v).unwrap()
    }

    #[test]
    fn constant_speed_has_zero_potential() {
        let (q, map) = speed_to_potential(&constant(ProfileKind::Speed, 2.0), 2.0).unwrap();
        assert!((map.length - 0.5).abs() < 1e-14);
        assert!(q.sup_norm() < 1e-14);
        assert!((q.right() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn background_violation_rejected() {
        let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 33, |x| 1.0 + 0.1 * x).unwrap();
        assert!(matches!(speed_to_potential(&c, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn zero_potential_gives_constant_speed() {
        let c = potential_to_speed(&constant(ProfileKind::Potential, 0.0), 1.0).unwrap();
        assert!((c.right() - 1.0).abs() < 1e-14);
        assert!(c.samples().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn strongly_negative_potential_fails() {
        let q = Profile::constant(ProfileKind::Potential, 0.0, 1.0, 257, -200.0).unwrap();
        match potential_to_speed(&q, 1.0) {
            Err(Error::Reconstruction(msg)) => {
                // u = cos(√200 y) first vanishes at y = π/(2√200) ≈ 0.111.
                assert!(msg.contains("0.11"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_convection() {
        let v = convection_to_potential(&constant(ProfileKind::Convection, 1.5)).unwrap();
        assert!(v.samples().iter().all(|x| (x - 0.5625).abs() < 1e-12));
        let b = recover_convection(&v, 1.5).unwrap();
        assert!(b.samples().iter().all(|x| (x - 1.5).abs() < 1e-10));
    }

    #[test]
    fn linear_convection() {
        let b = Profile::from_fn(ProfileKind::Convection, 0.0, 1.0, 65, |x| 2.0 * x).unwrap();
        let v = convection_to_potential(&b).unwrap();
        for (x, val) in v.nodes().zip(v.samples()) {
            assert!((val - (x * x - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_potential_zero_anchor() {
        let b = recover_convection(&constant(ProfileKind::Potential, 0.0), 0.0).unwrap();
        assert_eq!(b.sup_norm(), 0.0);
    }

    #[test]
    fn riccati_blowup_reported() {
        // b′ = b²/2 backward from a large anchor diverges.
        let r = recover_convection(&constant(ProfileKind::Potential, 0.0), -10.0);
        assert!(matches!(r, Err(Error::Reconstruction(_))));
    }

    #[test]
    fn gauge_closed_form_and_identity() {
        let beta = 0.7;
        let b = constant(ProfileKind::Convection, beta);
        let g = Profile::from_fn(ProfileKind::InitialData, 0.0, 1.0, 65, |x| (3.0 * x).sin() * x).unwrap();
        let h = gauge_initial_data(&g, &b, GaugeDirection::Forward).unwrap();
        for ((x, hv), gv) in h.nodes().zip(h.samples()).zip(g.samples()) {
            assert!((hv - (-beta * (x - 1.0) / 2.0).exp() * gv).abs() < 1e-13);
        }
        let back = gauge_initial_data(&h, &b, GaugeDirection::Inverse).unwrap();
        assert!(back.sup_distance(&g) < 1e-14);
        let same = gauge_initial_data(&g, &constant(ProfileKind::Convection, 0.0), GaugeDirection::Forward).unwrap();
        assert_eq!(same.samples(), g.samples());
    }

    #[test]
    fn gauge_preserves_support() {
        let g = Profile::from_fn(ProfileKind::InitialData, 0.0, 1.0, 101, |x| {
            if x < 0.1 { (x * (0.1 - x)).powi(2) } else { 0.0 }
        })
        .unwrap();
        let b = Profile::from_fn(ProfileKind::Convection, 0.0, 1.0, 101, |x| (5.0 * x).cos()).unwrap();
        let h = gauge_initial_data(&g, &b, GaugeDirection::Forward).unwrap();
        for (x, v) in h.nodes().zip(h.samples()) {
            if x > 0.1 + 1e-12 {
                assert_eq!(*v, 0.0);
            }
        }
    }
}
