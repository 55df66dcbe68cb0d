mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shdoa::sh::{
    mode_strength, sph_harm, sph_harm_dphi, sph_harm_dtheta, sph_harm_vector, spherical_bessel_j, Direction, ShBasis,
    ShIndex,
};

use common::{bessel_series, gauss_legendre};

#[test]
fn quadrature_orthonormality_to_degree_four() {
    let basis = ShBasis::new(4);
    // exact for products up to degree 8: 10 Gauss–Legendre rings × 20 azimuths
    let rings = gauss_legendre(10);
    let n_phi = 20;
    let p = basis.dim();
    let mut gram = vec![vec![0.0; p]; p];
    for &(x, w) in &rings {
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            let y = sph_harm_vector(basis, Direction::new(x.acos(), phi));
            let wq = w * 2.0 * std::f64::consts::PI / n_phi as f64;
            for a in 0..p {
                for b in 0..p {
                    gram[a][b] += wq * y[a] * y[b];
                }
            }
        }
    }
    for (a, row) in gram.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            assert!((v - target).abs() < 1e-8, "({a},{b}) {v}");
        }
    }
}

#[test]
fn matches_cartesian_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pi = std::f64::consts::PI;
    for _ in 0..200 {
        let d = Direction::new(rng.random_range(0.0..pi), rng.random_range(0.0..2.0 * pi));
        let [x, y, z] = d.unit_vector();
        let c1 = (3.0 / (4.0 * pi)).sqrt();
        let c2 = 0.5 * (15.0 / pi).sqrt();
        let oracle = [
            0.5 / pi.sqrt(),
            c1 * y,
            c1 * z,
            c1 * x,
            c2 * x * y,
            c2 * y * z,
            0.25 * (5.0 / pi).sqrt() * (3.0 * z * z - 1.0),
            c2 * x * z,
            0.5 * c2 * (x * x - y * y),
        ];
        let got = sph_harm_vector(ShBasis::new(2), d);
        for (g, o) in got.iter().zip(oracle) {
            assert!((g - o).abs() < 1e-13, "{d:?}: {g} vs {o}");
        }
    }
}

#[test]
fn derivatives_match_central_differences_at_1000_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(0..=4usize);
        let m = rng.random_range(-(n as i64)..=n as i64);
        let idx = ShIndex::new(n, m).unwrap();
        let d = Direction::new(
            rng.random_range(0.05..std::f64::consts::PI - 0.05),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let fd_t = (sph_harm(idx, Direction::new(d.theta + h, d.phi))
            - sph_harm(idx, Direction::new(d.theta - h, d.phi)))
            / (2.0 * h);
        let fd_p = (sph_harm(idx, Direction::new(d.theta, d.phi + h))
            - sph_harm(idx, Direction::new(d.theta, d.phi - h)))
            / (2.0 * h);
        for (a, f) in [(sph_harm_dtheta(idx, d).unwrap(), fd_t), (sph_harm_dphi(idx, d), fd_p)] {
            // relative to the function's scale where the derivative itself vanishes
            let rel = (a - f).abs() / a.abs().max(1e-3);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn bessel_agrees_with_power_series() {
    for n in 0..=6 {
        for i in 1..=30 {
            let x = 0.1 * i as f64;
            let a = spherical_bessel_j(n, x);
            let b = bessel_series(n, x);
            assert!((a - b).abs() < 1e-12 * b.abs().max(1e-3), "n={n} x={x}: {a} vs {b}");
        }
    }
}

#[test]
fn mode_strength_phase_cycles_with_order() {
    for n in 0..6 {
        let b = mode_strength(n, 1.3);
        let expected = num_complex::Complex64::i().powi(n as i32) * 4.0 * std::f64::consts::PI * bessel_series(n, 1.3);
        assert!((b - expected).norm() < 1e-12);
    }
}

proptest! {
    #[test]
    fn addition_theorem_holds_everywhere(theta in 0.0f64..std::f64::consts::PI, phi in -10.0f64..10.0) {
        let d = Direction::new(theta, phi);
        let y = sph_harm_vector(ShBasis::new(6), d);
        for n in 0..=6usize {
            let s: f64 = y[n * n..(n + 1) * (n + 1)].iter().map(|v| v * v).sum();
            let target = (2 * n + 1) as f64 / (4.0 * std::f64::consts::PI);
            prop_assert!((s - target).abs() < 1e-10);
        }
    }

    #[test]
    fn azimuth_is_periodic(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU, k in -3i32..3) {
        let a = sph_harm_vector(ShBasis::new(4), Direction::new(theta, phi));
        let b = sph_harm_vector(ShBasis::new(4), Direction::new(theta, phi + 2.0 * std::f64::consts::PI * k as f64));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn antipodal_parity(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU) {
        // Y_n^m(−u) = (−1)^n Y_n^m(u)
        let basis = ShBasis::new(4);
        let a = sph_harm_vector(basis, Direction::new(theta, phi));
        let b = sph_harm_vector(basis, Direction::new(std::f64::consts::PI - theta, phi + std::f64::consts::PI));
        for (i, idx) in basis.indices().enumerate() {
            let sign = if idx.n % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((b[i] - sign * a[i]).abs() < 1e-12);
        }
    }
}
