//! Scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::{make_icosahedral_array, ArrayGeometry};
use crate::error::{Error, Result};
use crate::scene::{RoomSpec, SignalKind};
use crate::sh::{Direction, ShBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Em,
    UniformMl,
    Music,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Em => "em",
            EstimatorKind::UniformMl => "uniform_ml",
            EstimatorKind::Music => "music",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "em" => Ok(EstimatorKind::Em),
            "uniform_ml" => Ok(EstimatorKind::UniformMl),
            "music" => Ok(EstimatorKind::Music),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?} (expected em, uniform_ml or music)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayConfig {
    Icosahedral {
        radius: f64,
    },
    /// CSV with `theta_deg,phi_deg,weight` rows, resolved relative to the
    /// scenario file.
    File {
        path: PathBuf,
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    pub kind: SignalKind,
    /// One snapshot count or a list to sweep.
    #[serde(deserialize_with = "one_or_many")]
    pub snapshots: Vec<usize>,
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::One(n) => vec![n],
        Raw::Many(v) => v,
    })
}

/// Either an explicit wavenumber or frequency plus sound speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcousticsConfig {
    pub wavenumber: Option<f64>,
    pub frequency_hz: Option<f64>,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
}

fn default_sound_speed() -> f64 {
    343.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// SH-domain white noise.
    Uniform,
    /// SH-domain diagonal noise shaped by `1/|b_n(kr)|²`.
    ModeStrength,
    /// SH-domain diagonal noise shaped by `profile` (rescaled to unit mean).
    Diagonal,
    /// White microphone noise passed through the encoder.
    Element,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub model: NoiseModel,
    /// `P` positive channel weights, only for `diagonal`.
    pub profile: Option<Vec<f64>>,
    pub snr_db: Vec<f64>,
}

/// Shoebox room; sources sit at `source_distance` along their DOAs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub dimensions: [f64; 3],
    pub array_position: [f64; 3],
    pub source_distance: f64,
    pub reflection_coeff: f64,
    pub max_image_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub array: ArrayConfig,
    #[serde(default = "default_order")]
    pub order: usize,
    pub sources: Vec<SourceConfig>,
    pub signal: SignalConfig,
    pub acoustics: AcousticsConfig,
    pub noise: NoiseConfig,
    pub room: Option<RoomConfig>,
    pub estimators: Vec<EstimatorKind>,
    pub trials: usize,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_order() -> usize {
    2
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.noise.snr_db.is_empty() {
            return Err(Error::Config("snr_db list is empty".into()));
        }
        if self.noise.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("snr_db values must be finite".into()));
        }
        if self.sources.is_empty() {
            return Err(Error::Config("at least one source is required".into()));
        }
        for s in &self.sources {
            if !(0.0..=180.0).contains(&s.theta_deg) || !s.phi_deg.is_finite() {
                return Err(Error::Config(format!(
                    "invalid source angle θ={}°, φ={}°",
                    s.theta_deg, s.phi_deg
                )));
            }
        }
        if self.sources.len() >= ShBasis::new(self.order).dim() {
            return Err(Error::Config(format!(
                "{} sources need more than {} SH channels",
                self.sources.len(),
                ShBasis::new(self.order).dim()
            )));
        }
        if self.sources.len() > 8 {
            return Err(Error::Config("at most 8 sources are supported".into()));
        }
        if self.signal.snapshots.is_empty() || self.signal.snapshots.contains(&0) {
            return Err(Error::Config("signal.snapshots must be non-empty and ≥ 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        self.wavenumber()?;
        let p = ShBasis::new(self.order).dim();
        match (self.noise.model, &self.noise.profile) {
            (NoiseModel::Diagonal, Some(q)) if q.len() == p && q.iter().all(|v| *v > 0.0) => {}
            (NoiseModel::Diagonal, _) => {
                return Err(Error::Config(format!(
                    "diagonal noise needs a profile of {p} positive entries"
                )))
            }
            (_, Some(_)) => return Err(Error::Config("noise.profile is only used by the diagonal model".into())),
            _ => {}
        }
        if self.room.is_some() && self.noise.model != NoiseModel::Element {
            return Err(Error::Config(
                "a room needs the element noise model (reflections are simulated at the microphones)".into(),
            ));
        }
        if self.room.is_some() {
            self.room_spec()?;
        }
        Ok(())
    }

    pub fn basis(&self) -> ShBasis {
        ShBasis::new(self.order)
    }

    pub fn doas(&self) -> Vec<Direction> {
        self.sources
            .iter()
            .map(|s| Direction::from_degrees(s.theta_deg, s.phi_deg))
            .collect()
    }

    pub fn wavenumber(&self) -> Result<f64> {
        let a = &self.acoustics;
        let k = match (a.wavenumber, a.frequency_hz) {
            (Some(k), None) => k,
            (None, Some(f)) => 2.0 * std::f64::consts::PI * f / a.sound_speed,
            _ => {
                return Err(Error::Config(
                    "give exactly one of acoustics.wavenumber or acoustics.frequency_hz".into(),
                ))
            }
        };
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Config(format!("wavenumber must be positive, got {k}")));
        }
        Ok(k)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        match &self.array {
            ArrayConfig::Icosahedral { radius } => make_icosahedral_array(*radius),
            ArrayConfig::File { path, radius } => {
                let full = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                ArrayGeometry::from_csv_file(&full, *radius)
            }
        }
    }

    pub fn room_spec(&self) -> Result<Option<RoomSpec>> {
        self.room
            .as_ref()
            .map(|r| {
                RoomSpec::with_sources_at(
                    r.dimensions,
                    r.array_position,
                    &self.doas(),
                    r.source_distance,
                    r.reflection_coeff,
                    r.max_image_order,
                )
            })
            .transpose()
    }

    /// Whether observations go through the microphone array.
    pub fn uses_element_path(&self) -> bool {
        self.noise.model == NoiseModel::Element
    }
}

const BUILTINS: &[(&str, &str)] = &[
    ("free-field", include_str!("../../scenarios/free-field.toml")),
    ("single-source", include_str!("../../scenarios/single-source.toml")),
    (
        "element-free-field",
        include_str!("../../scenarios/element-free-field.toml"),
    ),
    ("reverberant", include_str!("../../scenarios/reverberant.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_scenario(name: &str) -> Option<ScenarioConfig> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| ScenarioConfig::from_toml_str(text, Path::new(n)).expect("builtin scenarios are valid"))
}

/// Builtin name or path to a TOML file.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    match builtin_scenario(spec) {
        Some(cfg) => Ok(cfg),
        None => ScenarioConfig::from_file(Path::new(spec)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for name in builtin_names() {
            let cfg = builtin_scenario(name).unwrap();
            assert_eq!(cfg.name, name);
            cfg.geometry().unwrap();
        }
    }

    #[test]
    fn default_kr() {
        let cfg = builtin_scenario("free-field").unwrap();
        let kr = cfg.wavenumber().unwrap() * 0.15;
        assert!((kr - 2.748).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = builtin_scenario("free-field").unwrap();
        let mut c = base.clone();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.noise.snr_db.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.sources[0].theta_deg = 200.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.acoustics.wavenumber = Some(3.0);
        assert!(c.validate().is_err());
        let mut c = base;
        c.room = Some(RoomConfig {
            dimensions: [6.0, 5.0, 3.0],
            array_position: [3.0, 2.5, 1.5],
            source_distance: 2.0,
            reflection_coeff: 0.5,
            max_image_order: 1,
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = builtin_scenario("reverberant").unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml(), Path::new("x")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = builtin_scenario("free-field").unwrap().to_toml() + "\nbogus = 1\n";
        assert!(matches!(
            ScenarioConfig::from_toml_str(&text, Path::new("f.toml")),
            Err(Error::Parse { .. })
        ));
    }
}
