use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Analytic θ-derivative is singular at a pole for m ≠ 0.
    #[error("analytic theta derivative is singular at the pole (n={n}, m={m})")]
    Pole { n: usize, m: i64 },

    /// |b_n(kr)| fell below the regularization floor.
    #[error("mode strength of order {order} is below the floor ({magnitude:.3e} < {floor:.3e}); encoder is ill-conditioned at kr={kr}")]
    Conditioning {
        order: usize,
        magnitude: f64,
        floor: f64,
        kr: f64,
    },

    #[error("source SH matrix is rank deficient (smallest/largest eigenvalue ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix in {block}")]
    Singular { block: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
