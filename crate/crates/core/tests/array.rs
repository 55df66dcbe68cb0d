mod common;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shdoa::array::{
    check_orthonormality, make_encoder, make_icosahedral_array, regularized_inverse, steering_matrix, ArrayGeometry,
    Encoder, SteeringForm,
};
use shdoa::sh::{mode_strength, sph_harm_vector, Direction, ShBasis};

use common::{bessel_series, legendre_p};

const RADIUS: f64 = 0.15;

fn grid(n: usize) -> Vec<Direction> {
    let pi = std::f64::consts::PI;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            out.push(Direction::new(
                (i as f64 + 0.5) * pi / n as f64,
                j as f64 * 2.0 * pi / n as f64,
            ));
        }
    }
    out
}

/// `Σ_{n>N} (2n+1)|j_n(kr)|`, which bounds `|a_i − a_i^(N)|` since `|P_n| ≤ 1`.
fn tail(order: usize, kr: f64) -> f64 {
    (order + 1..60)
        .map(|n| (2 * n + 1) as f64 * bessel_series(n, kr).abs())
        .sum()
}

fn encoding_error(enc: &Encoder, geom: &ArrayGeometry, k: f64, d: Direction) -> Vec<f64> {
    let a = steering_matrix(geom, enc.basis, k, &[d], SteeringForm::Direct).entries;
    let col: DVector<Complex64> = a.column(0).into_owned();
    let e = enc.encode(&col);
    let y = sph_harm_vector(enc.basis, d);
    e.iter()
        .zip(&y)
        .map(|(g, t)| (g - Complex64::new(*t, 0.0)).norm())
        .collect()
}

#[test]
fn perfect_encoding_within_truncation_bound() {
    let geom = make_icosahedral_array(RADIUS).unwrap();
    let basis = ShBasis::new(2);
    for kr in [0.5, 1.0, 2.0] {
        let k = kr / RADIUS;
        let enc = make_encoder(&geom, basis, k).unwrap();
        let t = tail(2, kr);
        let bounds: Vec<f64> = basis
            .degrees()
            .into_iter()
            .enumerate()
            .map(|(p, n)| {
                let row: f64 = enc.gamma.row(p).iter().map(|g| g.norm()).sum();
                let b = mode_strength(n, kr);
                let reg = (Complex64::new(1.0, 0.0) - b * regularized_inverse(b)).norm();
                // |y_p| ≤ √((2n+1)/4π) by the addition theorem
                row * t + reg * ((2 * n + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt()
            })
            .collect();
        for d in grid(20) {
            for (p, e) in encoding_error(&enc, &geom, k, d).iter().enumerate() {
                assert!(
                    *e <= bounds[p] * (1.0 + 1e-9),
                    "kr={kr} {d:?} row {p}: {e} > {}",
                    bounds[p]
                );
            }
        }
    }
}

#[test]
fn encoder_error_at_unit_kr() {
    let geom = make_icosahedral_array(RADIUS).unwrap();
    let basis = ShBasis::new(2);
    let k = 1.0 / RADIUS;
    let enc = make_encoder(&geom, basis, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_row = vec![0.0f64; 9];
    for _ in 0..100 {
        let z: f64 = rng.random_range(-1.0..1.0);
        let d = Direction::new(z.acos(), rng.random_range(0.0..std::f64::consts::TAU));
        for (w, e) in worst_row.iter_mut().zip(encoding_error(&enc, &geom, k, d)) {
            *w = w.max(e);
        }
    }
    let worst = worst_row.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 0.02, "{worst_row:?}");
}

#[test]
fn direct_steering_matches_order_twenty_expansion() {
    let geom = make_icosahedral_array(RADIUS).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for kr in [0.5, 1.0, 2.75] {
        let k = kr / RADIUS;
        let doas: Vec<Direction> = (0..5)
            .map(|_| {
                Direction::new(
                    rng.random_range(0.0..std::f64::consts::PI),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let a = steering_matrix(&geom, ShBasis::new(2), k, &doas, SteeringForm::Direct).entries;
        for (i, mic) in geom.mics().iter().enumerate() {
            for (l, d) in doas.iter().enumerate() {
                let u = mic.unit_vector();
                let v = d.unit_vector();
                let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                // Jacobi–Anger: e^{j kr cosγ} = Σ jⁿ (2n+1) j_n(kr) P_n(cosγ)
                let oracle: Complex64 = (0..=20)
                    .map(|n| {
                        Complex64::i().powi(n as i32) * ((2 * n + 1) as f64 * bessel_series(n, kr) * legendre_p(n, cos))
                    })
                    .sum();
                assert!((a[(i, l)] - oracle).norm() < 1e-12, "kr={kr}");
            }
        }
    }
}

#[test]
fn sh_steering_within_tail_of_direct() {
    let geom = make_icosahedral_array(RADIUS).unwrap();
    for order in [1, 2, 3] {
        let basis = ShBasis::new(order);
        for kr in [0.5, 1.0, 2.0] {
            let k = kr / RADIUS;
            let doas = grid(8);
            let a = steering_matrix(&geom, basis, k, &doas, SteeringForm::Direct).entries;
            let b = steering_matrix(&geom, basis, k, &doas, SteeringForm::SphericalHarmonic).entries;
            let t = tail(order, kr);
            let worst = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(worst <= t * (1.0 + 1e-9), "N={order} kr={kr}: {worst} > {t}");
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let axis = Direction::new(
        rng.random_range(0.0..std::f64::consts::PI),
        rng.random_range(0.0..std::f64::consts::TAU),
    )
    .unit_vector();
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = angle.sin_cos();
    let [x, y, z] = axis;
    [
        [
            c + x * x * (1.0 - c),
            x * y * (1.0 - c) - z * s,
            x * z * (1.0 - c) + y * s,
        ],
        [
            y * x * (1.0 - c) + z * s,
            c + y * y * (1.0 - c),
            y * z * (1.0 - c) - x * s,
        ],
        [
            z * x * (1.0 - c) - y * s,
            z * y * (1.0 - c) + x * s,
            c + z * z * (1.0 - c),
        ],
    ]
}

#[test]
fn orthonormality_survives_rotation() {
    let geom = make_icosahedral_array(RADIUS).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let rot = random_rotation(&mut rng);
        let turned = geom.rotated(&rot);
        for order in 0..=2 {
            let basis = ShBasis::new(order);
            let a = check_orthonormality(&geom, basis);
            let b = check_orthonormality(&turned, basis);
            assert!((a - b).abs() < 1e-9 && b < 1e-10);
        }
    }
}

#[test]
fn icosahedron_is_a_design_up_to_order_two_only() {
    let geom = make_icosahedral_array(RADIUS).unwrap();
    assert!(check_orthonormality(&geom, ShBasis::new(2)) < 1e-10);
    assert!(check_orthonormality(&geom, ShBasis::new(3)) > 0.01);
    let neighbour = 1.0f64 / 5f64.sqrt();
    for (i, a) in geom.mics().iter().enumerate() {
        let mut nearest: Vec<f64> = geom
            .mics()
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, b)| a.angle_to(b))
            .collect();
        nearest.sort_by(f64::total_cmp);
        // five neighbours at arccos(1/√5)
        for d in &nearest[..5] {
            assert!((d - neighbour.acos()).abs() < 1e-12);
        }
        assert!(nearest[5] > nearest[4] + 0.1);
    }
    let total: f64 = geom.weights().iter().sum();
    assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-12);
}
