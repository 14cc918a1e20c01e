mod common;

use passive_inverse::liouville::{
    convection_to_potential, gauge_initial_data, potential_to_speed, recover_convection, speed_to_potential,
    GaugeDirection,
};
use passive_inverse::sturm::{dirichlet_eigenvalues, frozen_wave_solution, shoot, weighted_dirichlet_eigenvalues};
use passive_inverse::{Profile, ProfileKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bump_speed(amp: f64, centre: f64) -> impl Fn(f64) -> f64 {
    let w = common::smooth_window(0.1, 0.9, 0.1);
    move |x: f64| 1.0 + amp * (-100.0 * (x - centre) * (x - centre)).exp() * w(x)
}

/// Sixth-order central differences of a closed-form function.
fn d1(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3;
    (45.0 * (f(x + h) - f(x - h)) - 9.0 * (f(x + 2.0 * h) - f(x - 2.0 * h)) + (f(x + 3.0 * h) - f(x - 3.0 * h)))
        / (60.0 * h)
}

fn d2(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3;
    (2.0 * (f(x + 3.0 * h) + f(x - 3.0 * h)) - 27.0 * (f(x + 2.0 * h) + f(x - 2.0 * h))
        + 270.0 * (f(x + h) + f(x - h))
        - 490.0 * f(x))
        / (180.0 * h * h)
}

/// Composite Simpson with `n` (even) panels.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn potential_matches_closed_form_oracle() {
    let cf = bump_speed(0.3, 0.5);
    let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 2049, &cf).unwrap();
    let (q, map) = speed_to_potential(&c, 1.0).unwrap();
    let slowness = |x: f64| 1.0 / cf(x);
    let length = simpson(&slowness, 0.0, 1.0, 20000);
    assert!((map.length / length - 1.0).abs() < 1e-10);
    let mut err = 0.0f64;
    for (y, qv) in q.nodes().zip(q.samples()) {
        // Invert y(x) by bisection on the closed-form travel time.
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if simpson(&slowness, 0.0, mid, 2000) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        let oracle = 0.25 * d1(&cf, x).powi(2) - 0.5 * cf(x) * d2(&cf, x);
        err = err.max((qv - oracle).abs());
        if y < 0.05 || y > map.length - 0.05 {
            assert!(qv.abs() < 1e-8);
        }
    }
    assert!(err < 1e-5, "err = {err}");
}

#[test]
fn potential_integral_by_change_of_variables() {
    let cf = bump_speed(0.3, 0.5);
    let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 4097, &cf).unwrap();
    let (q, map) = speed_to_potential(&c, 1.0).unwrap();
    let in_x = simpson(
        &|x| q.eval_clamped(map.to_travel_time(x).unwrap()) / cf(x),
        0.0,
        1.0,
        20000,
    );
    assert!((q.integral() / in_x - 1.0).abs() < 1e-8, "{} vs {in_x}", q.integral());
}

#[test]
fn travel_time_map_is_invertible() {
    let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 1025, bump_speed(0.3, 0.45)).unwrap();
    let (_, map) = speed_to_potential(&c, 1.0).unwrap();
    assert_eq!(map.forward.samples()[0], 0.0);
    assert!(map.forward.samples().windows(2).all(|w| w[1] > w[0]));
    for i in 0..100 {
        let x = i as f64 / 99.0;
        let y = map.to_travel_time(x).unwrap();
        let back = map.to_position(y.min(map.length)).unwrap();
        assert!((back - x).abs() < 1e-8, "x={x} back={back}");
    }
}

#[test]
fn spectral_commutation() {
    for (amp, centre) in [(0.3, 0.5), (-0.25, 0.4), (0.5, 0.6)] {
        let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 2049, bump_speed(amp, centre)).unwrap();
        let (q, _) = speed_to_potential(&c, 1.0).unwrap();
        let weighted = weighted_dirichlet_eigenvalues(&c, 15).unwrap().lambdas();
        let schrod = dirichlet_eigenvalues(&q, 15).unwrap().lambdas();
        for (k, (a, b)) in weighted.iter().zip(&schrod).enumerate() {
            assert!((a / b - 1.0).abs() < 1e-7, "amp {amp} k={} {a} vs {b}", k + 1);
        }
    }
}

#[test]
fn frozen_solution_matches_liouville_path() {
    let c0 = 1.5;
    let cf = {
        let base = bump_speed(0.3, 0.5);
        move |x: f64| c0 * base(x)
    };
    let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 2049, cf).unwrap();
    let (q, map) = speed_to_potential(&c, c0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let xi: f64 = rng.random_range(0.5..60.0);
        let direct = frozen_wave_solution(&c, xi).unwrap();
        let path = shoot(&q, xi * xi).unwrap();
        let (v, vx) = (c0 * path.value, path.slope);
        let value_scale = direct.value.abs() + direct.slope.abs() / xi;
        let slope_scale = xi * direct.value.abs() + direct.slope.abs();
        assert!((direct.value - v).abs() < 1e-7 * value_scale, "ξ={xi} {direct:?} vs ({v}, {vx})");
        assert!((direct.slope - vx).abs() < 1e-7 * slope_scale, "ξ={xi} {direct:?} vs ({v}, {vx})");
    }
    assert!(map.length > 0.0);
}

#[test]
fn frozen_solution_bounded_on_compact_range() {
    let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 513, bump_speed(0.3, 0.5)).unwrap();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..200 {
        let xi = 0.1 + 0.2 * i as f64;
        let e = frozen_wave_solution(&c, xi).unwrap();
        let m = e.value.abs() + e.slope.abs();
        lo = lo.min(m);
        hi = hi.max(m);
    }
    assert!(lo > 1e-3 && hi < 1e3, "{lo} {hi}");
}

#[test]
fn frozen_zeros_are_weighted_spectrum() {
    let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 2049, bump_speed(0.3, 0.5)).unwrap();
    let (q, _) = speed_to_potential(&c, 1.0).unwrap();
    let spectrum = dirichlet_eigenvalues(&q, 15).unwrap().lambdas();
    for (k, lambda) in spectrum.iter().enumerate() {
        // Bracket the k-th zero of ξ ↦ v(ξ, 1) around √λ and bisect.
        let xi0 = lambda.sqrt();
        let (mut a, mut b) = (xi0 * (1.0 - 1e-3), xi0 * (1.0 + 1e-3));
        let mut fa = frozen_wave_solution(&c, a).unwrap().value;
        assert!(fa * frozen_wave_solution(&c, b).unwrap().value < 0.0, "k={}", k + 1);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let fm = frozen_wave_solution(&c, m).unwrap().value;
            if fm * fa <= 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        let zero = 0.5 * (a + b);
        assert!((zero * zero / lambda - 1.0).abs() < 1e-7);
    }
}

#[test]
fn speed_round_trip() {
    let c = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, 2049, bump_speed(0.3, 0.5)).unwrap();
    let (q, _) = speed_to_potential(&c, 1.0).unwrap();
    let back = potential_to_speed(&q, 1.0).unwrap();
    assert!((back.right() - 1.0).abs() < 1e-8);
    let err = back.sup_distance(&c);
    assert!(err < 1e-6, "err = {err}");
}

fn bump_convection(x: f64) -> f64 {
    0.8 * (-60.0 * (x - 0.25) * (x - 0.25)).exp() - 0.8 * (-60.0f64 * 0.5625).exp()
}

#[test]
fn convection_potential_oracle() {
    let b = Profile::from_fn(ProfileKind::Convection, 0.0, 1.0, 1025, bump_convection).unwrap();
    let v = convection_to_potential(&b).unwrap();
    let err = v
        .nodes()
        .zip(v.samples())
        .map(|(x, val)| {
            let bx = bump_convection(x);
            (val - (-0.5 * d1(&bump_convection, x) + 0.25 * bx * bx)).abs()
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "err = {err}");
}

#[test]
fn convection_round_trip() {
    let b = Profile::from_fn(ProfileKind::Convection, 0.0, 1.0, 1025, bump_convection).unwrap();
    let v = convection_to_potential(&b).unwrap();
    let back = recover_convection(&v, b.samples()[1024]).unwrap();
    let err = back.sup_distance(&b);
    assert!(err < 1e-5, "err = {err}");
    let again = convection_to_potential(&back).unwrap();
    assert!(again.sup_distance(&v) < 1e-6);
}

#[test]
fn gauge_round_trip() {
    let b = Profile::from_fn(ProfileKind::Convection, 0.0, 1.0, 513, bump_convection).unwrap();
    let g = Profile::from_fn(ProfileKind::InitialData, 0.0, 1.0, 513, |x| (x * (1.0 - x)).powi(2) * (9.0 * x).cos())
        .unwrap();
    let h = gauge_initial_data(&g, &b, GaugeDirection::Forward).unwrap();
    let back = gauge_initial_data(&h, &b, GaugeDirection::Inverse).unwrap();
    assert!(back.sup_distance(&g) < 1e-9);
}

#[test]
fn gauge_spectral_invariance() {
    let b = Profile::from_fn(ProfileKind::Convection, 0.0, 1.0, 1025, bump_convection).unwrap();
    let v = convection_to_potential(&b).unwrap();
    let ours = dirichlet_eigenvalues(&v, 10).unwrap().lambdas();
    // Non-symmetric centred scheme for −u″ + b u′, reduced to symmetric
    // tridiagonal form by a diagonal similarity.
    let oracle = |n: usize, k: usize| {
        let h = 1.0 / (n - 1) as f64;
        let m = n - 2;
        let d = vec![2.0 / (h * h); m];
        let e: Vec<f64> = (0..m - 1)
            .map(|i| {
                let xi = h * (i + 1) as f64;
                let xn = h * (i + 2) as f64;
                let upper = -1.0 / (h * h) + bump_convection(xi) / (2.0 * h);
                let lower = -1.0 / (h * h) - bump_convection(xn) / (2.0 * h);
                -(upper * lower).sqrt()
            })
            .collect();
        common::tridiagonal_eigenvalue(&d, &e, k)
    };
    for (k, l) in ours.iter().enumerate() {
        let r = (4.0 * oracle(4097, k + 1) - oracle(2049, k + 1)) / 3.0;
        assert!((l / r - 1.0).abs() < 1e-6, "k={} {l} vs {r}", k + 1);
    }
}
