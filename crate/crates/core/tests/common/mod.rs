#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use shdoa::sh::{sph_harm_vector, Direction, ShBasis};

/// Central finite difference of `y(θ, φ)` along one angle.
pub fn fd_sh_vector(basis: ShBasis, d: Direction, axis_theta: bool, h: f64) -> Vec<f64> {
    let (a, b) = if axis_theta {
        (Direction::new(d.theta + h, d.phi), Direction::new(d.theta - h, d.phi))
    } else {
        (Direction::new(d.theta, d.phi + h), Direction::new(d.theta, d.phi - h))
    };
    let ya = sph_harm_vector(basis, a);
    let yb = sph_harm_vector(basis, b);
    ya.iter().zip(&yb).map(|(x, y)| (x - y) / (2.0 * h)).collect()
}

/// Fisher matrix over `[θ_1..θ_L, φ_1..φ_L]` by summing, per snapshot, the
/// outer product of mean derivatives weighted by an explicit `C_b⁻¹`.
/// Derivatives come from finite differences when `fd_step` is given.
pub fn fisher_by_summation(
    basis: ShBasis,
    doas: &[Direction],
    s: &DMatrix<f64>,
    cb: &DMatrix<f64>,
    derivs: &dyn Fn(Direction, bool) -> Vec<f64>,
) -> DMatrix<f64> {
    let l = doas.len();
    let p = basis.dim();
    let cinv = cb.clone().try_inverse().expect("invertible C_b");
    let mut f = DMatrix::zeros(2 * l, 2 * l);
    let dy: Vec<(DVector<f64>, DVector<f64>)> = doas
        .iter()
        .map(|d| {
            (
                DVector::from_vec(derivs(*d, true)),
                DVector::from_vec(derivs(*d, false)),
            )
        })
        .collect();
    for t in 0..s.ncols() {
        // ∂η(t)/∂Θ_k as a P-vector for every parameter k
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(2 * l);
        for r in 0..l {
            cols.push(&dy[r].0 * s[(r, t)]);
        }
        for r in 0..l {
            cols.push(&dy[r].1 * s[(r, t)]);
        }
        for a in 0..2 * l {
            let ca = &cinv * &cols[a];
            for b in 0..2 * l {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += cols[b][k] * ca[k];
                }
                f[(a, b)] += acc;
            }
        }
    }
    f
}

pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.abs().max().max(b.abs().max()).max(f64::MIN_POSITIVE);
    (a - b).abs().max() / scale
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre_p(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return p0;
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let p = legendre_p(n, x);
                let dp = n as f64 * (x * p - legendre_p(n - 1, x)) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let dp = n as f64 * (x * legendre_p(n, x) - legendre_p(n - 1, x)) / (x * x - 1.0);
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `j_n(x)` from its power series; accurate for small `x`.
pub fn bessel_series(n: usize, x: f64) -> f64 {
    let mut double_fact = 1.0;
    for k in 0..=n {
        double_fact *= (2 * k + 1) as f64;
    }
    let mut term = x.powi(n as i32) / double_fact;
    let mut sum = term;
    for k in 1..60 {
        term *= -x * x / (2.0 * k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}
