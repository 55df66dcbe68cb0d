#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Direction-of-arrival estimation of acoustic plane waves in the
//! spherical-harmonic domain.

pub mod array;
pub mod bench;
pub mod crb;
pub mod error;
pub mod estimators;
pub mod scene;
pub mod sh;

pub use error::{Error, Result};
