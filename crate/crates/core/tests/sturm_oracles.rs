mod common;

use std::f64::consts::PI;

use passive_inverse::sturm::{
    dirichlet_eigenfunction, dirichlet_eigenpairs, dirichlet_eigenvalues, eigenvalue_sensitivity, shoot,
};
use passive_inverse::{Profile, ProfileKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bump_q(n: usize) -> Profile {
    let q = common::bump(10.0, 0.3, 1.0 / 50.0);
    Profile::from_fn(ProfileKind::Potential, 0.0, 1.0, n, q).unwrap()
}

#[test]
fn bump_spectrum_matches_matrix_oracle() {
    let q = bump_q(1025);
    let ms = dirichlet_eigenvalues(&q, 20).unwrap();
    let qf = common::bump(10.0, 0.3, 1.0 / 50.0);
    for (i, l) in ms.lambdas().iter().enumerate() {
        let oracle = common::fd_eigenvalue(&qf, 1.0, 2049, i + 1);
        assert!((l / oracle - 1.0).abs() < 1e-6, "k={} {l} vs {oracle}", i + 1);
    }
}

#[test]
fn bump_eigenfunction_matches_matrix_oracle() {
    let q = bump_q(1025);
    let lambda = dirichlet_eigenvalues(&q, 5).unwrap().lambdas()[4];
    let pair = dirichlet_eigenfunction(&q, lambda).unwrap();
    assert_eq!(pair.index, 5);
    let qf = common::bump(10.0, 0.3, 1.0 / 50.0);
    let coarse = common::fd_eigenvector(&qf, 1.0, 1025, 5);
    let fine = common::fd_eigenvector(&qf, 1.0, 2049, 5);
    let mut err = 0.0f64;
    let mut asym = 0.0f64;
    for (i, x) in pair.eigenfunction.nodes().enumerate() {
        let oracle = (4.0 * fine[2 * i] - coarse[i]) / 3.0;
        let v = pair.eigenfunction.samples()[i];
        err = err.max((v - oracle).abs());
        asym = asym.max((v - 2f64.sqrt() * (5.0 * PI * x).sin()).abs());
    }
    assert!(err < 1e-5, "err = {err}");
    assert!(asym < 1.0, "asymptotic gap {asym}");
}

#[test]
fn eigenpair_invariants() {
    let q = bump_q(513);
    let pairs = dirichlet_eigenpairs(&q, 12).unwrap();
    for (i, p) in pairs.iter().enumerate() {
        assert_eq!(p.index, i + 1);
        let phi = &p.eigenfunction;
        let norm: f64 = phi.samples().iter().map(|v| v * v).sum::<f64>() * phi.step();
        assert!((norm - 1.0).abs() < 1e-8);
        assert!(phi.samples()[0].abs() < 1e-8 && phi.samples().last().unwrap().abs() < 1e-8);
        assert!(p.left_slope > 0.0 && p.right_slope != 0.0);
        let interior = &phi.samples()[1..phi.count() - 1];
        let changes = interior.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        assert_eq!(changes, i, "mode {}", i + 1);
        let e = shoot(&q, p.lambda).unwrap();
        assert!(e.value.abs() / (e.value.abs() + e.slope.abs()) < 1e-8);
        assert!(e.value.abs() < 1e-8 * (1.0 + e.slope.abs()));
    }
    for w in pairs.windows(2) {
        assert!(w[1].lambda > w[0].lambda);
    }
}

#[test]
fn eigenvalue_asymptotics() {
    let potentials: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(common::bump(10.0, 0.3, 1.0 / 50.0)),
        Box::new(|x: f64| 5.0 * (2.0 * PI * x).cos() + 3.0 * x),
        Box::new(|x: f64| -8.0 * x * (1.0 - x) + 2.0 * (7.0 * x).sin()),
    ];
    for qf in potentials {
        let q = Profile::from_fn(ProfileKind::Potential, 0.0, 1.0, 1025, &qf).unwrap();
        let mean = q.integral();
        let abs_mean: f64 = q.map(ProfileKind::Auxiliary, |_, v| v.abs()).unwrap().integral();
        let ls = dirichlet_eigenvalues(&q, 50).unwrap().lambdas();
        let mut prev = f64::INFINITY;
        for k in 40..=50 {
            let gap = (ls[k - 1] - (k as f64 * PI).powi(2) - mean).abs();
            assert!(gap < 0.05 * (1.0 + abs_mean), "k={k} gap={gap}");
            prev = prev.min(gap);
        }
        let early = (ls[4] - 25.0 * PI * PI - mean).abs();
        assert!(prev <= early + 1e-9);
    }
}

#[test]
fn eigenfunction_asymptotic_trend() {
    let q = bump_q(2049);
    let pairs = dirichlet_eigenpairs(&q, 50).unwrap();
    let dev: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let k = p.index as f64;
            p.eigenfunction
                .nodes()
                .zip(p.eigenfunction.samples())
                .map(|(x, v)| (v - 2f64.sqrt() * (k * PI * x).sin()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let c_fit = (5..=50).map(|k| dev[k - 1] * k as f64).fold(0.0, f64::max);
    for k in 5..=50 {
        assert!(dev[k - 1] <= c_fit / k as f64 + 1e-12);
    }
    // Coarse monotone trend: block averages decrease.
    let block = |a: usize, b: usize| dev[a - 1..b].iter().sum::<f64>() / (b - a + 1) as f64;
    assert!(block(5, 15) > block(20, 30) && block(20, 30) > block(40, 50));
}

#[test]
fn constant_shift_moves_every_eigenvalue() {
    let q = bump_q(513);
    let shifted = q.map(ProfileKind::Potential, |_, v| v + 0.125).unwrap();
    let a = dirichlet_eigenvalues(&q, 10).unwrap().lambdas();
    let b = dirichlet_eigenvalues(&shifted, 10).unwrap().lambdas();
    for (x, y) in a.iter().zip(&b) {
        assert!((y - x - 0.125).abs() < 1e-8);
    }
}

#[test]
fn sensitivity_matches_finite_differences() {
    let q = bump_q(513);
    let pairs = dirichlet_eigenpairs(&q, 3).unwrap();
    let sens = eigenvalue_sensitivity(&q, &pairs[2]).unwrap();
    assert!((sens.integral() - 1.0).abs() < 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    for _ in 0..5 {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        let f: f64 = rng.random_range(1.0..4.0);
        let eta = move |x: f64| a * (f * PI * x).sin() + b * (x - 0.5) * (x - 0.5);
        let plus = q.map(ProfileKind::Potential, |x, v| v + h * eta(x)).unwrap();
        let minus = q.map(ProfileKind::Potential, |x, v| v - h * eta(x)).unwrap();
        let lp = dirichlet_eigenvalues(&plus, 3).unwrap().lambdas()[2];
        let lm = dirichlet_eigenvalues(&minus, 3).unwrap().lambdas()[2];
        let fd = (lp - lm) / (2.0 * h);
        let inner = sens.map(ProfileKind::Auxiliary, |x, v| v * eta(x)).unwrap().integral();
        assert!((fd / inner - 1.0).abs() < 1e-4, "fd={fd} inner={inner}");
    }
}
