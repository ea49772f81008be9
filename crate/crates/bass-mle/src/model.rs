//! Bass model parameters, the (α', β') reparametrization, and the adoption
//! intensity.
//!
//! # The model
//! ```text
//! λ(j, r) = ξ(j) · x(r),          ξ(j) = (m − j)(α + β·j/m)
//! ```
//! where `j` is the cumulative number of adoptions, `m` the market size,
//! `α` the innovation rate, `β` the imitation rate and `x(r)` a strictly
//! positive price-response factor. `ξ(j)` is the portion of the adoption
//! rate unaffected by price.
//!
//! # The transformation
//! ```text
//! α' = α − β,   β' = β / (α − β)      (requires α > β)
//! β  = β'·α',   α  = α' + β'·α'
//! ```
//! In the transformed coordinates the price-free rate factors as
//! `ξ(j) = (m − j) · α'(1 + (1 + j/m)β')`, which is the form the estimator
//! works in.

use crate::error::{Error, Result};

/// Natural Bass parameters (α, β) together with the market size m.
///
/// Invariants enforced at construction: `α > 0`, `β > 0`, both finite,
/// `m ≥ 1`. `α > β` is *not* required here; it is required only when
/// converting to [`TransformedParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    alpha: f64,
    beta: f64,
    m: u64,
}

impl MarketParams {
    pub fn new(alpha: f64, beta: f64, m: u64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and > 0, got {alpha}"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and > 0, got {beta}"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("market size m must be >= 1".into()));
        }
        Ok(Self { alpha, beta, m })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Price-free adoption rate `ξ(j) = (m − j)(α + β·j/m)`.
    ///
    /// Zero exactly at `j = m` (market saturated), positive below.
    pub fn xi(&self, j: u64) -> Result<f64> {
        if j > self.m {
            return Err(Error::StateOutOfRange { j, m: self.m });
        }
        let m = self.m as f64;
        let j = j as f64;
        Ok((m - j) * (self.alpha + self.beta * j / m))
    }

    /// Full adoption intensity `λ(j, r) = ξ(j)·x(r)`.
    pub fn lambda(&self, j: u64, price: f64, x: &PriceResponse) -> Result<f64> {
        Ok(self.xi(j)? * x.eval_checked(price)?)
    }

    /// Convert to the estimator's (α', β') coordinates. Requires `α > β`.
    pub fn to_transformed(&self) -> Result<TransformedParams> {
        if self.alpha <= self.beta {
            return Err(Error::InvalidParameter(format!(
                "transformation requires alpha > beta, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        let alpha_p = self.alpha - self.beta;
        TransformedParams::new(alpha_p, self.beta / alpha_p)
    }
}

/// Transformed parameters α' = α − β and β' = β/(α − β), both strictly
/// positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedParams {
    alpha_p: f64,
    beta_p: f64,
}

impl TransformedParams {
    pub fn new(alpha_p: f64, beta_p: f64) -> Result<Self> {
        if !alpha_p.is_finite() || alpha_p <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha' must be finite and > 0, got {alpha_p}"
            )));
        }
        if !beta_p.is_finite() || beta_p <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta' must be finite and > 0, got {beta_p}"
            )));
        }
        Ok(Self { alpha_p, beta_p })
    }

    pub fn alpha_p(&self) -> f64 {
        self.alpha_p
    }

    pub fn beta_p(&self) -> f64 {
        self.beta_p
    }

    /// Invert the transformation: `β = β'·α'`, `α = α' + β'·α'`.
    pub fn to_market(&self, m: u64) -> Result<MarketParams> {
        let beta = self.beta_p * self.alpha_p;
        MarketParams::new(self.alpha_p + beta, beta, m)
    }

    /// Rate multiplier `α'(1 + (1 + j/m)β')`, the transformed form of
    /// `α + β·j/m`.
    pub fn rate_factor(&self, j: u64, m: u64) -> f64 {
        let q = 1.0 + j as f64 / m as f64;
        self.alpha_p * (1.0 + q * self.beta_p)
    }

    /// Price-free adoption rate in transformed coordinates:
    /// `ξ(j) = (m − j)·α'(1 + (1 + j/m)β')`.
    ///
    /// Agrees with [`MarketParams::xi`] after [`Self::to_market`].
    pub fn xi(&self, j: u64, m: u64) -> Result<f64> {
        if m == 0 {
            return Err(Error::InvalidParameter("market size m must be >= 1".into()));
        }
        if j > m {
            return Err(Error::StateOutOfRange { j, m });
        }
        Ok((m - j) as f64 * self.rate_factor(j, m))
    }
}

/// Price-response factor `x(r)`, a pure map from price to a strictly
/// positive multiplier on the adoption rate.
///
/// The model places no structure on `x` beyond positivity, so arbitrary
/// responses can be plugged in via [`PriceResponse::Custom`].
#[derive(Clone, Copy)]
pub enum PriceResponse {
    /// `x(r) ≡ c` for a fixed `c > 0`.
    Constant(f64),
    /// `x(r) = e^{−r}`.
    Exponential,
    /// User-supplied pure function.
    Custom(fn(f64) -> f64),
}

impl PriceResponse {
    /// `x ≡ 1`, the identity response.
    pub fn unit() -> Self {
        PriceResponse::Constant(1.0)
    }

    pub fn eval(&self, price: f64) -> f64 {
        match self {
            PriceResponse::Constant(c) => *c,
            PriceResponse::Exponential => (-price).exp(),
            PriceResponse::Custom(f) => f(price),
        }
    }

    /// Evaluate and reject outputs that are not strictly positive and
    /// finite (e.g. a non-positive constant, or `e^{−r}` underflowing).
    pub fn eval_checked(&self, price: f64) -> Result<f64> {
        let value = self.eval(price);
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::NonPositiveResponse { price, value });
        }
        Ok(value)
    }
}

impl std::fmt::Debug for PriceResponse {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PriceResponse::Constant(c) => write!(f, "Constant({c})"),
            PriceResponse::Exponential => write!(f, "Exponential"),
            PriceResponse::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}
