//! Ground-truth scene synthesis.
//!
//! Two generators produce HOA observations `b(t)`:
//!
//! - [`synth_hoa_direct`] draws `b(t) = Y(Ψ)ᵀ s(t) + z(t)` with Gaussian SH-domain
//!   noise; it is the reference generator for estimator and bound validation.
//! - [`synth_hoa_element`] builds microphone signals `x(t) = A(Ψ) s(t) + n(t)`
//!   (optionally with shoebox reflections), encodes them with `Γ` and keeps the
//!   real part.
//!
//! SNR is defined per SH channel: mean signal power over the `P` channels
//! divided by mean noise variance over the same channels.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array::{sh_matrix_rows, steering_matrix, ArrayGeometry, Encoder, SteeringForm};
use crate::error::{Error, Result};
use crate::sh::{mode_strength, Direction, ShBasis};

const FOUR_PI: f64 = 4.0 * PI;

/// RNG stream for source waveforms; noise uses [`NOISE_STREAM`].
pub const SIGNAL_STREAM: u64 = 1;
pub const NOISE_STREAM: u64 = 2;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Plane-wave sources and their waveforms.
#[derive(Debug, Clone)]
pub struct Scene {
    pub doas: Vec<Direction>,
    /// Wavenumber `k`, rad/m.
    pub wavenumber: f64,
    /// `L × Ns` real source waveforms.
    pub source_signals: DMatrix<f64>,
    /// Seed for the noise stream.
    pub seed: u64,
}

impl Scene {
    pub fn new(doas: Vec<Direction>, wavenumber: f64, source_signals: DMatrix<f64>, seed: u64) -> Result<Self> {
        if doas.is_empty() {
            return Err(Error::Config("a scene needs at least one source".into()));
        }
        if source_signals.nrows() != doas.len() || source_signals.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} DOAs but a {}×{} signal matrix",
                doas.len(),
                source_signals.nrows(),
                source_signals.ncols()
            )));
        }
        for (l, row) in source_signals.row_iter().enumerate() {
            if row.iter().all(|v| *v == 0.0) {
                return Err(Error::Config(format!("source {l} has zero power")));
            }
        }
        Ok(Self {
            doas,
            wavenumber,
            source_signals,
            seed,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.doas.len()
    }

    pub fn num_snapshots(&self) -> usize {
        self.source_signals.ncols()
    }

    /// `S_s = Σ_t s(t) s(t)ᵀ`.
    pub fn signal_gram(&self) -> DMatrix<f64> {
        &self.source_signals * self.source_signals.transpose()
    }
}

/// Noise model. Variances are per real component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// SH-domain white noise, covariance `σ² I`.
    Uniform { sigma2: f64 },
    /// SH-domain noise with covariance `diag(q)`.
    Diagonal { q: Vec<f64> },
    /// Complex microphone noise; real and imaginary parts each have variance `σ²`.
    ElementDomain { sigma2: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            NoiseSpec::Uniform { sigma2 } | NoiseSpec::ElementDomain { sigma2 } => *sigma2 > 0.0,
            NoiseSpec::Diagonal { q } => !q.is_empty() && q.iter().all(|v| *v > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("noise variances must be positive: {self:?}")))
        }
    }

    /// SH-domain covariance diagonal for SH-domain kinds.
    pub fn sh_variances(&self, basis: ShBasis) -> Result<Vec<f64>> {
        match self {
            NoiseSpec::Uniform { sigma2 } => Ok(vec![*sigma2; basis.dim()]),
            NoiseSpec::Diagonal { q } if q.len() == basis.dim() => Ok(q.clone()),
            NoiseSpec::Diagonal { q } => Err(Error::DimensionMismatch(format!(
                "{} noise variances for {} SH channels",
                q.len(),
                basis.dim()
            ))),
            NoiseSpec::ElementDomain { .. } => Err(Error::Config(
                "element-domain noise has no SH covariance without an encoder".into(),
            )),
        }
    }
}

/// Mean per-channel SH signal power for `num_sources` uncorrelated unit-power
/// sources: `L/(4π)`, independent of the directions by the addition theorem.
pub fn nominal_channel_signal_power(num_sources: usize) -> f64 {
    num_sources as f64 / FOUR_PI
}

/// Uniform SH noise variance giving `snr_db` per channel.
pub fn uniform_sigma2_for_snr(num_sources: usize, snr_db: f64) -> f64 {
    nominal_channel_signal_power(num_sources) / 10f64.powf(snr_db / 10.0)
}

/// Channel profile `1/|b_n(kr)|²` of the noise an encoder induces from white
/// microphone noise, normalized to unit mean.
pub fn mode_strength_noise_profile(basis: ShBasis, kr: f64) -> Vec<f64> {
    let raw: Vec<f64> = basis
        .degrees()
        .into_iter()
        .map(|n| 1.0 / mode_strength(n, kr).norm_sqr())
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.into_iter().map(|v| v / mean).collect()
}

/// Diagonal SH noise shaped by `profile` (unit mean) at per-channel `snr_db`.
pub fn diagonal_noise_for_snr(profile: &[f64], num_sources: usize, snr_db: f64) -> NoiseSpec {
    let sigma2 = uniform_sigma2_for_snr(num_sources, snr_db);
    NoiseSpec::Diagonal {
        q: profile.iter().map(|p| p * sigma2).collect(),
    }
}

/// Element-domain `σ²` whose encoded noise has mean channel variance matching `snr_db`.
pub fn element_sigma2_for_snr(enc: &Encoder, num_sources: usize, snr_db: f64) -> f64 {
    let per_unit = enc.induced_noise_variances(1.0);
    let mean = per_unit.iter().sum::<f64>() / per_unit.len() as f64;
    uniform_sigma2_for_snr(num_sources, snr_db) / mean
}

/// HOA observation: column `t` of `frames` is `b(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoaSignal {
    pub frames: DMatrix<f64>,
    pub basis: ShBasis,
}

impl HoaSignal {
    pub fn new(frames: DMatrix<f64>, basis: ShBasis) -> Result<Self> {
        if frames.nrows() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for an order-{} basis ({} channels)",
                frames.nrows(),
                basis.order(),
                basis.dim()
            )));
        }
        if frames.ncols() == 0 {
            return Err(Error::DimensionMismatch("HOA signal has no snapshots".into()));
        }
        Ok(Self { frames, basis })
    }

    pub fn num_snapshots(&self) -> usize {
        self.frames.ncols()
    }

    pub fn dim(&self) -> usize {
        self.frames.nrows()
    }

    /// `Σ_t b(t) b(t)ᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.frames * self.frames.transpose()
    }
}

/// Waveform families for [`synth_source_signals`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Gaussian,
    Constant,
    SinusoidBank,
}

const SINUSOIDS_PER_SOURCE: usize = 3;

/// `L × Ns` unit-average-power waveforms, deterministic in `seed`.
pub fn synth_source_signals(
    num_sources: usize,
    num_snapshots: usize,
    kind: SignalKind,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if num_sources == 0 || num_snapshots == 0 {
        return Err(Error::Config("source and snapshot counts must be ≥ 1".into()));
    }
    let mut rng = rng_for(seed, SIGNAL_STREAM);
    let out = match kind {
        SignalKind::Constant => DMatrix::from_element(num_sources, num_snapshots, 1.0),
        SignalKind::Gaussian => {
            // row-major draw order keeps each source's stream contiguous
            let mut m = DMatrix::zeros(num_sources, num_snapshots);
            for l in 0..num_sources {
                for t in 0..num_snapshots {
                    m[(l, t)] = rng.sample::<f64, _>(StandardNormal);
                }
            }
            m
        }
        SignalKind::SinusoidBank => {
            let amp = (2.0 / SINUSOIDS_PER_SOURCE as f64).sqrt();
            let mut m = DMatrix::zeros(num_sources, num_snapshots);
            for l in 0..num_sources {
                let tones: Vec<(f64, f64)> = (0..SINUSOIDS_PER_SOURCE)
                    .map(|_| (rng.random_range(0.01..0.49), rng.random_range(0.0..2.0 * PI)))
                    .collect();
                for t in 0..num_snapshots {
                    m[(l, t)] = tones
                        .iter()
                        .map(|(f, ph)| amp * (2.0 * PI * f * t as f64 + ph).cos())
                        .sum();
                }
            }
            m
        }
    };
    Ok(out)
}

fn standard_normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major: one snapshot's channels are drawn together
    let mut m = DMatrix::zeros(rows, cols);
    for t in 0..cols {
        for r in 0..rows {
            m[(r, t)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    m
}

/// `b(t) = Y(Ψ)ᵀ s(t) + z(t)` with Gaussian SH-domain noise.
pub fn synth_hoa_direct(scene: &Scene, basis: ShBasis, noise: &NoiseSpec) -> Result<HoaSignal> {
    noise.validate()?;
    let q = noise.sh_variances(basis)?;
    let y = sh_matrix_rows(basis, &scene.doas);
    let mut frames = y.transpose() * &scene.source_signals;
    let mut rng = rng_for(scene.seed, NOISE_STREAM);
    let z = standard_normal_matrix(&mut rng, basis.dim(), scene.num_snapshots());
    for (r, qr) in q.iter().enumerate() {
        let sd = qr.sqrt();
        for t in 0..frames.ncols() {
            frames[(r, t)] += sd * z[(r, t)];
        }
    }
    HoaSignal::new(frames, basis)
}

/// `b(t) = Y(Ψ)ᵀ s(t)` without noise.
pub fn synth_hoa_noiseless(scene: &Scene, basis: ShBasis) -> Result<HoaSignal> {
    let y = sh_matrix_rows(basis, &scene.doas);
    HoaSignal::new(y.transpose() * &scene.source_signals, basis)
}

/// Shoebox room with a scalar, frequency-flat wall reflection coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Room size, meters.
    pub dimensions: [f64; 3],
    pub array_position: [f64; 3],
    pub source_positions: Vec<[f64; 3]>,
    pub reflection_coeff: f64,
    pub max_image_order: usize,
}

pub const MAX_IMAGE_ORDER: usize = 4;

impl RoomSpec {
    /// Places one source per DOA at `distance` meters from the array.
    pub fn with_sources_at(
        dimensions: [f64; 3],
        array_position: [f64; 3],
        doas: &[Direction],
        distance: f64,
        reflection_coeff: f64,
        max_image_order: usize,
    ) -> Result<Self> {
        let source_positions = doas
            .iter()
            .map(|d| {
                let u = d.unit_vector();
                [0, 1, 2].map(|i| array_position[i] + distance * u[i])
            })
            .collect();
        let room = Self {
            dimensions,
            array_position,
            source_positions,
            reflection_coeff,
            max_image_order,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |p: &[f64; 3]| (0..3).all(|i| p[i] > 0.0 && p[i] < self.dimensions[i]);
        if self.dimensions.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config(format!(
                "room dimensions must be positive: {:?}",
                self.dimensions
            )));
        }
        if !inside(&self.array_position) {
            return Err(Error::Config(format!(
                "array position {:?} outside the room",
                self.array_position
            )));
        }
        if let Some(p) = self.source_positions.iter().find(|p| !inside(p)) {
            return Err(Error::Config(format!("source position {p:?} outside the room")));
        }
        if !(0.0..1.0).contains(&self.reflection_coeff) {
            return Err(Error::Config(format!(
                "reflection coefficient {} outside [0, 1)",
                self.reflection_coeff
            )));
        }
        if self.max_image_order > MAX_IMAGE_ORDER {
            return Err(Error::Config(format!(
                "image order {} exceeds {MAX_IMAGE_ORDER}",
                self.max_image_order
            )));
        }
        Ok(())
    }

    /// Direction of each source as seen from the array.
    pub fn source_directions(&self) -> Vec<Direction> {
        self.source_positions
            .iter()
            .map(|p| Direction::from_vector([0, 1, 2].map(|i| p[i] - self.array_position[i])))
            .collect()
    }

    /// Image sources `(position, bounce count)` up to `max_image_order`,
    /// the direct path included.
    pub fn image_sources(&self, source_index: usize) -> Vec<([f64; 3], usize)> {
        let src = self.source_positions[source_index];
        let r = self.max_image_order as i64;
        let axis = |a: usize| -> Vec<(f64, usize)> {
            let mut v = Vec::new();
            for n in -r..=r {
                for q in 0..=1i64 {
                    let pos = 2.0 * n as f64 * self.dimensions[a] + (1 - 2 * q) as f64 * src[a];
                    let bounces = (2 * n - q).unsigned_abs() as usize;
                    if bounces <= self.max_image_order {
                        v.push((pos, bounces));
                    }
                }
            }
            v
        };
        let (xs, ys, zs) = (axis(0), axis(1), axis(2));
        let mut out = Vec::new();
        for (x, bx) in &xs {
            for (y, by) in &ys {
                for (z, bz) in &zs {
                    let b = bx + by + bz;
                    if b <= self.max_image_order {
                        out.push(([*x, *y, *z], b));
                    }
                }
            }
        }
        out
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Spherical-wave image-source steering vector for one source.
///
/// Each image contributes `β^bounces · (d₀/d_i) · exp(−j k (d_i − d₀))` at
/// microphone `i`, where `d_i` is the image-to-microphone distance and `d₀` the
/// source-to-centre distance, so the direct path has unit gain and zero phase
/// at the array centre.
pub fn image_source_steering(
    room: &RoomSpec,
    geom: &ArrayGeometry,
    k: f64,
    source_index: usize,
) -> Result<DVector<Complex64>> {
    room.validate()?;
    if source_index >= room.source_positions.len() {
        return Err(Error::DimensionMismatch(format!(
            "source index {source_index} but the room has {} sources",
            room.source_positions.len()
        )));
    }
    Ok(image_sum(room, geom, k, source_index, 0))
}

fn image_sum(
    room: &RoomSpec,
    geom: &ArrayGeometry,
    k: f64,
    source_index: usize,
    min_bounces: usize,
) -> DVector<Complex64> {
    let mics: Vec<[f64; 3]> = geom
        .positions()
        .into_iter()
        .map(|p| [0, 1, 2].map(|i| room.array_position[i] + p[i]))
        .collect();
    let d0 = distance(&room.source_positions[source_index], &room.array_position);
    let mut v = DVector::from_element(mics.len(), Complex64::new(0.0, 0.0));
    for (img, bounces) in room.image_sources(source_index) {
        if bounces < min_bounces {
            continue;
        }
        let gain = room.reflection_coeff.powi(bounces as i32);
        if gain == 0.0 {
            continue;
        }
        for (i, m) in mics.iter().enumerate() {
            let d = distance(&img, m);
            v[i] += Complex64::from_polar(gain * d0 / d, -k * (d - d0));
        }
    }
    v
}

/// Element-domain synthesis: `b(t) = Re{Γ (A s(t) + n(t))}`.
///
/// The direct path is the plane-wave steering of the scene DOAs; a room adds
/// every image with at least one reflection on top of it.
pub fn synth_hoa_element(
    scene: &Scene,
    geom: &ArrayGeometry,
    enc: &Encoder,
    noise: &NoiseSpec,
    room: Option<&RoomSpec>,
) -> Result<HoaSignal> {
    noise.validate()?;
    let sigma2 = match noise {
        NoiseSpec::ElementDomain { sigma2 } => *sigma2,
        other => {
            return Err(Error::Config(format!(
                "element synthesis needs element-domain noise, got {other:?}"
            )))
        }
    };
    let kr = scene.wavenumber * geom.radius();
    if (kr - enc.kr).abs() > 1e-9 * kr.max(1.0) {
        return Err(Error::Config(format!(
            "encoder built for kr = {}, scene has kr = {kr}",
            enc.kr
        )));
    }
    if enc.gamma.ncols() != geom.num_mics() {
        return Err(Error::DimensionMismatch(format!(
            "encoder expects {} microphones, geometry has {}",
            enc.gamma.ncols(),
            geom.num_mics()
        )));
    }
    let mut steering = steering_matrix(geom, enc.basis, scene.wavenumber, &scene.doas, SteeringForm::Direct).entries;
    if let Some(room) = room {
        room.validate()?;
        if room.source_positions.len() != scene.num_sources() {
            return Err(Error::DimensionMismatch(format!(
                "room has {} sources, scene has {}",
                room.source_positions.len(),
                scene.num_sources()
            )));
        }
        for l in 0..scene.num_sources() {
            let refl = image_sum(room, geom, scene.wavenumber, l, 1);
            let mut col = steering.column_mut(l);
            col += refl;
        }
    }
    let s = scene.source_signals.map(|v| Complex64::new(v, 0.0));
    let mut x = steering * s;
    let mut rng = rng_for(scene.seed, NOISE_STREAM);
    let sd = sigma2.sqrt();
    for t in 0..x.ncols() {
        for i in 0..x.nrows() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            x[(i, t)] += Complex64::new(sd * re, sd * im);
        }
    }
    let b = (&enc.gamma * x).map(|z| z.re);
    HoaSignal::new(b, enc.basis)
}
