//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state {j} outside 0..={m}")]
    StateOutOfRange { j: u64, m: u64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("price response must be strictly positive and finite, got {value} at price {price}")]
    NonPositiveResponse { price: f64, value: f64 },

    #[error("invalid price path: {0}")]
    InvalidPricePath(String),

    #[error("invalid observed path: {0}")]
    InvalidPath(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("event index {i} out of range 0..={n}")]
    IndexOutOfRange { i: usize, n: usize },

    #[error("perturbation {delta} outside the admissible range [0, {max}]")]
    DeltaOutOfRange { delta: f64, max: f64 },

    #[error("path has no adoptions; the alpha' maximizer sits at the boundary")]
    NoAdoptions,

    #[error("need at least {needed} adoptions to fit, path has {found}")]
    InsufficientData { needed: u64, found: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
