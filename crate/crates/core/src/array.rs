//! Spherical microphone arrays, steering matrices and the narrowband SH encoder.

use std::f64::consts::{E, PI};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::sh::{mode_strength, sph_harm_vector, Direction, ShBasis};

const FOUR_PI: f64 = 4.0 * PI;

/// Floor on `|b_n(kr)|` below which the encoder is declared ill-conditioned.
/// The same value is the Tikhonov constant in the regularized inverse.
pub const MODE_STRENGTH_FLOOR: f64 = 1e-3 * FOUR_PI;

/// Microphone directions on a sphere of `radius` with quadrature weights `α_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    radius: f64,
    mics: Vec<Direction>,
    weights: Vec<f64>,
}

impl ArrayGeometry {
    /// Validates lengths, positivity, and `Σ α_i = 4π` (within 1e-9).
    pub fn new(radius: f64, mics: Vec<Direction>, weights: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("array radius must be positive, got {radius}")));
        }
        if mics.is_empty() || mics.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} mic directions but {} weights",
                mics.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::Config(format!("sampling weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - FOUR_PI).abs() > 1e-9 {
            return Err(Error::Config(format!("sampling weights sum to {total}, expected 4π")));
        }
        Ok(Self { radius, mics, weights })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mics(&self) -> &[Direction] {
        &self.mics
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_mics(&self) -> usize {
        self.mics.len()
    }

    /// Cartesian positions `r·u(Φ_i)` relative to the array centre.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.mics
            .iter()
            .map(|d| {
                let u = d.unit_vector();
                [self.radius * u[0], self.radius * u[1], self.radius * u[2]]
            })
            .collect()
    }

    /// Same geometry with every microphone rotated by `rot` (row-major 3×3).
    pub fn rotated(&self, rot: &[[f64; 3]; 3]) -> Self {
        let mics = self
            .mics
            .iter()
            .map(|d| {
                let u = d.unit_vector();
                let v = [0, 1, 2].map(|r| rot[r][0] * u[0] + rot[r][1] * u[1] + rot[r][2] * u[2]);
                Direction::from_vector(v)
            })
            .collect();
        Self {
            radius: self.radius,
            mics,
            weights: self.weights.clone(),
        }
    }

    /// Loads `(theta_deg, phi_deg, weight)` records from a CSV file.
    ///
    /// The header row is required; lines starting with `#` are ignored.
    pub fn from_csv_file(path: &Path, radius: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text, radius).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_csv_str(text: &str, radius: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Record {
            theta_deg: f64,
            phi_deg: f64,
            weight: f64,
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut mics = Vec::new();
        let mut weights = Vec::new();
        for rec in reader.deserialize::<Record>() {
            let rec = rec.map_err(|e| Error::Parse {
                path: "<geometry>".into(),
                message: e.to_string(),
            })?;
            if !(0.0..=180.0).contains(&rec.theta_deg) {
                return Err(Error::Parse {
                    path: "<geometry>".into(),
                    message: format!("theta_deg {} outside [0, 180]", rec.theta_deg),
                });
            }
            mics.push(Direction::from_degrees(rec.theta_deg, rec.phi_deg));
            weights.push(rec.weight);
        }
        Self::new(radius, mics, weights)
    }
}

/// 12 microphones at the vertices of an icosahedron (a spherical 5-design),
/// each weighted `4π/12`. One vertex sits at each pole; the other ten form two
/// rings at colatitude `atan 2` and `π − atan 2`, staggered by 36°.
pub fn make_icosahedral_array(radius: f64) -> Result<ArrayGeometry> {
    let ring = 2.0f64.atan();
    let mut mics = vec![Direction::new(0.0, 0.0)];
    for k in 0..5 {
        mics.push(Direction::new(ring, (72.0 * k as f64).to_radians()));
    }
    for k in 0..5 {
        mics.push(Direction::new(PI - ring, (36.0 + 72.0 * k as f64).to_radians()));
    }
    mics.push(Direction::new(PI, 0.0));
    let weights = vec![FOUR_PI / 12.0; 12];
    ArrayGeometry::new(radius, mics, weights)
}

/// `I × P` matrix whose rows are `y(Φ_i)`.
pub fn array_sh_matrix(geom: &ArrayGeometry, basis: ShBasis) -> DMatrix<f64> {
    sh_matrix_rows(basis, geom.mics())
}

/// Stacks `y(Ψ_l)` as rows: the `L × P` source SH matrix `Y(Ψ)`.
pub fn sh_matrix_rows(basis: ShBasis, dirs: &[Direction]) -> DMatrix<f64> {
    let p = basis.dim();
    let mut out = DMatrix::zeros(dirs.len(), p);
    for (r, d) in dirs.iter().enumerate() {
        for (c, v) in sph_harm_vector(basis, *d).into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    out
}

/// Mode strengths `b_n(kr)` laid out along the flat SH index.
pub fn mode_strength_diagonal(basis: ShBasis, kr: f64) -> Vec<Complex64> {
    basis.degrees().into_iter().map(|n| mode_strength(n, kr)).collect()
}

/// Construction route for [`steering_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringForm {
    /// `exp(−j k_lᵀ r_i)` evaluated directly.
    Direct,
    /// `Y(Φ) B(kr) Y(Ψ)ᵀ` truncated at the basis order.
    SphericalHarmonic,
}

/// `I × L` element-domain steering matrix `A(Ψ)`.
#[derive(Debug, Clone)]
pub struct SteeringMatrix {
    pub entries: DMatrix<Complex64>,
    pub wavenumber: f64,
    /// Set when the array radius exceeds the truncation radius `2N/(e k)`.
    pub truncation_warning: Option<String>,
}

/// Builds `A(Ψ)` for plane waves from `doas`.
///
/// The wave vector is `k_l = −k u(Ψ_l)`, so entry `(i, l)` of the direct form is
/// `exp(j k r u(Ψ_l)·u(Φ_i))`.
pub fn steering_matrix(
    geom: &ArrayGeometry,
    basis: ShBasis,
    k: f64,
    doas: &[Direction],
    form: SteeringForm,
) -> SteeringMatrix {
    let entries = match form {
        SteeringForm::Direct => direct_steering(geom, k, doas),
        SteeringForm::SphericalHarmonic => {
            let ya = array_sh_matrix(geom, basis);
            let b = mode_strength_diagonal(basis, k * geom.radius());
            let yb = DMatrix::from_fn(ya.nrows(), ya.ncols(), |r, c| b[c] * ya[(r, c)]);
            yb * sh_matrix_rows(basis, doas).transpose().map(|v| Complex64::new(v, 0.0))
        }
    };
    let limit = truncation_radius(basis, k);
    let truncation_warning = (geom.radius() > limit).then(|| {
        format!(
            "array radius {:.4} m exceeds the order-{} truncation radius {:.4} m at k = {:.3} rad/m",
            geom.radius(),
            basis.order(),
            limit,
            k
        )
    });
    SteeringMatrix {
        entries,
        wavenumber: k,
        truncation_warning,
    }
}

/// `r̂ = 2N / (e k)`.
pub fn truncation_radius(basis: ShBasis, k: f64) -> f64 {
    2.0 * basis.order() as f64 / (E * k)
}

fn direct_steering(geom: &ArrayGeometry, k: f64, doas: &[Direction]) -> DMatrix<Complex64> {
    let pos = geom.positions();
    let units: Vec<[f64; 3]> = doas.iter().map(Direction::unit_vector).collect();
    DMatrix::from_fn(pos.len(), doas.len(), |i, l| {
        let u = units[l];
        let r = pos[i];
        let phase = k * (u[0] * r[0] + u[1] * r[1] + u[2] * r[2]);
        Complex64::from_polar(1.0, phase)
    })
}

/// Tikhonov-regularized `1/b`: `b* / (|b|² + ε²)`.
pub fn regularized_inverse(b: Complex64) -> Complex64 {
    b.conj() / (b.norm_sqr() + MODE_STRENGTH_FLOOR * MODE_STRENGTH_FLOOR)
}

/// Narrowband encoder `Γ = B⁻¹(kr) Y(Φ)ᵀ Σ`, `P × I`.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub gamma: DMatrix<Complex64>,
    pub basis: ShBasis,
    pub kr: f64,
}

impl Encoder {
    /// Real-part SH noise variances induced by complex element noise whose real
    /// and imaginary parts each have variance `sigma2`: `σ² Σ_i |Γ_pi|²`.
    pub fn induced_noise_variances(&self, sigma2: f64) -> Vec<f64> {
        self.gamma
            .row_iter()
            .map(|row| sigma2 * row.iter().map(|g| g.norm_sqr()).sum::<f64>())
            .collect()
    }

    /// Full covariance of `Re(Γ n)`: `σ² (Re Γ Re Γᵀ + Im Γ Im Γᵀ)`.
    pub fn induced_noise_covariance(&self, sigma2: f64) -> DMatrix<f64> {
        let re = self.gamma.map(|g| g.re);
        let im = self.gamma.map(|g| g.im);
        (&re * re.transpose() + &im * im.transpose()) * sigma2
    }

    /// `Γ x` for a single complex element snapshot.
    pub fn encode(&self, x: &nalgebra::DVector<Complex64>) -> nalgebra::DVector<Complex64> {
        &self.gamma * x
    }
}

/// Builds `Γ` for wavenumber `k`. Fails when there are fewer microphones than
/// SH coefficients or when some `|b_n(kr)|` lies below [`MODE_STRENGTH_FLOOR`].
pub fn make_encoder(geom: &ArrayGeometry, basis: ShBasis, k: f64) -> Result<Encoder> {
    let p = basis.dim();
    let i = geom.num_mics();
    if p > i {
        return Err(Error::DimensionMismatch(format!(
            "order {} needs {p} microphones, array has {i}",
            basis.order()
        )));
    }
    let kr = k * geom.radius();
    for n in 0..=basis.order() {
        let mag = mode_strength(n, kr).norm();
        if mag < MODE_STRENGTH_FLOOR {
            return Err(Error::Conditioning {
                order: n,
                magnitude: mag,
                floor: MODE_STRENGTH_FLOOR,
                kr,
            });
        }
    }
    let b = mode_strength_diagonal(basis, kr);
    let ya = array_sh_matrix(geom, basis);
    let w = geom.weights();
    let gamma = DMatrix::from_fn(p, i, |row, col| regularized_inverse(b[row]) * (ya[(col, row)] * w[col]));
    Ok(Encoder { gamma, basis, kr })
}

/// `max |Y(Φ)ᵀ Σ Y(Φ) − I|` over all entries.
pub fn check_orthonormality(geom: &ArrayGeometry, basis: ShBasis) -> f64 {
    let ya = array_sh_matrix(geom, basis);
    let mut weighted = ya.clone();
    for (r, w) in geom.weights().iter().enumerate() {
        weighted.row_mut(r).scale_mut(*w);
    }
    let gram = ya.transpose() * weighted;
    let mut worst = 0.0f64;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((gram[(r, c)] - target).abs());
        }
    }
    worst
}
