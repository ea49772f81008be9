//! Exact sample paths of the adoption counting process.
//!
//! # Algorithm
//!
//! From state `j` at time `s`, the next adoption time `u` solves
//!
//! ```text
//! ξ(j) · ∫_s^u x(r_v) dv = E,   E ~ Exponential(1),
//! ```
//!
//! inverted exactly segment by segment over the piecewise-constant price
//! path (the integrand is constant within a segment, so the cumulative
//! intensity is piecewise linear). There is no discretization error.
//!
//! The pricing policy is re-queried at every adoption event and at its own
//! review times, which keeps the realized price path piecewise constant by
//! construction. Runs are deterministic for a fixed seed; replications use
//! independent streams derived from (master seed, replication index) via
//! [`mix_seed`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{MarketParams, PriceResponse};
use crate::pricing::{realize_policy, History, PricePath, PriceSegment, PricingPolicy};

/// Sampling attempts before giving up on the conditional (fixed-n, positive
/// tail) rejection loop.
const MAX_REJECTION_ATTEMPTS: u64 = 1_000_000;

/// The continuously observed record: adoption times, the realized price
/// path, the market size and the observation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPath {
    m: u64,
    horizon: f64,
    adoption_times: Vec<f64>,
    price_path: PricePath,
}

impl ObservedPath {
    pub fn new(
        m: u64,
        horizon: f64,
        adoption_times: Vec<f64>,
        price_path: PricePath,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPath("market size m must be >= 1".into()));
        }
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::InvalidPath(format!(
                "horizon must be finite and >= 0, got {horizon}"
            )));
        }
        if adoption_times.len() as u64 > m {
            return Err(Error::InvalidPath(format!(
                "{} adoptions exceed market size {m}",
                adoption_times.len()
            )));
        }
        let mut prev = 0.0;
        for (k, &t) in adoption_times.iter().enumerate() {
            if !t.is_finite() || t <= prev {
                return Err(Error::InvalidPath(format!(
                    "adoption times must satisfy 0 < t_1 < t_2 < ... ; offending index {k}"
                )));
            }
            prev = t;
        }
        if prev > horizon {
            return Err(Error::InvalidPath(format!(
                "last adoption at {prev} exceeds horizon {horizon}"
            )));
        }
        if price_path.horizon() != horizon {
            return Err(Error::InvalidPath(format!(
                "price path covers [0, {}] but horizon is {horizon}",
                price_path.horizon()
            )));
        }
        Ok(Self {
            m,
            horizon,
            adoption_times,
            price_path,
        })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn adoption_times(&self) -> &[f64] {
        &self.adoption_times
    }

    pub fn price_path(&self) -> &PricePath {
        &self.price_path
    }

    /// Cumulative adoptions at the horizon, `D_t`.
    pub fn adoptions(&self) -> u64 {
        self.adoption_times.len() as u64
    }
}

/// When a simulation run stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Observe on `[0, t]`.
    Horizon(f64),
    /// Stop at exactly `n` adoptions, recording `tail` extra observation
    /// time past the n-th. With `tail > 0` the path is conditioned on no
    /// further adoption inside the tail window (rejection sampling), so the
    /// record is distributed as a horizon-`t_n + tail` path given
    /// `D = n`.
    TargetAdoptions { n: u64, tail: f64 },
}

/// Everything a simulation run needs. One stop rule, one seed.
pub struct SimConfig<'a> {
    pub params: MarketParams,
    pub x: PriceResponse,
    pub policy: &'a dyn PricingPolicy,
    pub stop: StopRule,
    pub seed: u64,
}

impl SimConfig<'_> {
    fn validate(&self) -> Result<()> {
        match self.stop {
            StopRule::Horizon(t) => {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "horizon must be finite and >= 0, got {t}"
                    )));
                }
            }
            StopRule::TargetAdoptions { n, tail } => {
                if n > self.params.m() {
                    return Err(Error::InvalidConfig(format!(
                        "target n = {n} exceeds market size {}",
                        self.params.m()
                    )));
                }
                if !tail.is_finite() || tail < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "tail must be finite and >= 0, got {tail}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generate one exact sample path under the configured stop rule.
pub fn simulate(config: &SimConfig<'_>) -> Result<ObservedPath> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        if let Some(path) = attempt(config, &mut rng)? {
            return Ok(path);
        }
    }
    Err(Error::InvalidConfig(format!(
        "conditional sampler rejected {MAX_REJECTION_ATTEMPTS} paths; \
         the post-n tail window is too unlikely to stay empty"
    )))
}

/// Convenience wrapper: run until exactly `n` adoptions with the given
/// post-n observation window (`tail`, usually 0).
pub fn simulate_until_n(
    params: MarketParams,
    x: PriceResponse,
    policy: &dyn PricingPolicy,
    n: u64,
    tail: f64,
    seed: u64,
) -> Result<ObservedPath> {
    simulate(&SimConfig {
        params,
        x,
        policy,
        stop: StopRule::TargetAdoptions { n, tail },
        seed,
    })
}

/// One path attempt. Returns `Ok(None)` when a fixed-n path is rejected
/// because an extra adoption landed inside the tail window.
fn attempt(config: &SimConfig<'_>, rng: &mut ChaCha8Rng) -> Result<Option<ObservedPath>> {
    let params = config.params;
    let m = params.m();
    let target = match config.stop {
        StopRule::TargetAdoptions { n, .. } => Some(n),
        StopRule::Horizon(_) => None,
    };

    let mut times: Vec<f64> = Vec::new();
    let mut segments: Vec<PriceSegment> = Vec::new();
    let mut now = 0.0f64;
    let mut seg_start = 0.0f64;
    let mut price = realize_policy(config.policy, &History::empty(), 0.0);
    let mut x_val = config.x.eval_checked(price)?;

    // Absolute stop time, known upfront for a horizon rule and fixed once
    // the n-th adoption lands for a target rule.
    let mut end: Option<f64> = match config.stop {
        StopRule::Horizon(t) => Some(t),
        StopRule::TargetAdoptions { n: 0, tail } => Some(tail),
        StopRule::TargetAdoptions { .. } => None,
    };

    let finish = |end_time: f64,
                  times: Vec<f64>,
                  mut segments: Vec<PriceSegment>,
                  seg_start: f64,
                  price: f64|
     -> Result<ObservedPath> {
        if end_time > seg_start {
            segments.push(PriceSegment {
                start: seg_start,
                end: end_time,
                price,
            });
        }
        ObservedPath::new(m, end_time, times, PricePath::new(segments)?)
    };

    if end == Some(0.0) {
        return Ok(Some(finish(0.0, times, segments, seg_start, price)?));
    }

    'events: loop {
        let j = times.len() as u64;
        let xi_j = params.xi(j)?;
        if xi_j == 0.0 {
            // Market saturated: no further events, close at the stop time.
            // Reachable only with j == m, in which case `end` is set.
            let end_time = end.expect("stop time fixed at saturation");
            return Ok(Some(finish(end_time, times, segments, seg_start, price)?));
        }

        let mut remaining: f64 = rng.sample(Exp1);
        loop {
            let rate = xi_j * x_val;
            let review = match config.policy.next_review(now) {
                Some(rv) if rv <= now => {
                    return Err(Error::InvalidConfig(format!(
                        "policy review time {rv} is not after current time {now}"
                    )));
                }
                other => other,
            };
            let boundary = match (review, end) {
                (Some(rv), Some(e)) => Some(rv.min(e)),
                (Some(rv), None) => Some(rv),
                (None, e) => e,
            };

            let t_event = now + remaining / rate;
            let crosses = match boundary {
                Some(b) => t_event > b || !t_event.is_finite(),
                None => false,
            };
            if crosses {
                let b = boundary.unwrap();
                remaining = (remaining - rate * (b - now)).max(0.0);
                now = b;
                if end == Some(b) {
                    return Ok(Some(finish(b, times, segments, seg_start, price)?));
                }
                // Review epoch: re-query the policy; merge if unchanged.
                let h = History {
                    adoption_times: &times,
                    past_segments: &segments,
                    current_price: Some(price),
                };
                let new_price = realize_policy(config.policy, &h, b);
                if new_price != price {
                    segments.push(PriceSegment {
                        start: seg_start,
                        end: b,
                        price,
                    });
                    seg_start = b;
                    price = new_price;
                    x_val = config.x.eval_checked(price)?;
                }
                continue;
            }

            // Adoption. Nudge forward if rounding collapsed the gap.
            let t_rec = if t_event > now {
                t_event
            } else {
                now.next_up()
            };
            if let Some(b) = boundary {
                if t_rec > b {
                    // The nudge crossed the boundary; treat as a crossing.
                    remaining = 0.0;
                    now = b;
                    if end == Some(b) {
                        return Ok(Some(finish(b, times, segments, seg_start, price)?));
                    }
                    continue;
                }
            }
            if target == Some(times.len() as u64) {
                // An extra adoption inside the tail window: reject the path.
                return Ok(None);
            }
            times.push(t_rec);
            now = t_rec;

            if let StopRule::TargetAdoptions { n, tail } = config.stop {
                if times.len() as u64 == n {
                    if tail == 0.0 {
                        return Ok(Some(finish(now, times, segments, seg_start, price)?));
                    }
                    end = Some(now + tail);
                }
            }

            // Adoption is a decision epoch: re-query the policy.
            let h = History {
                adoption_times: &times,
                past_segments: &segments,
                current_price: Some(price),
            };
            let new_price = realize_policy(config.policy, &h, now);
            if new_price != price {
                segments.push(PriceSegment {
                    start: seg_start,
                    end: now,
                    price,
                });
                seg_start = now;
                price = new_price;
                x_val = config.x.eval_checked(price)?;
            }
            continue 'events;
        }
    }
}

/// Derive an independent stream seed from a master seed and an index
/// (SplitMix64 finalizer over the combined words). Chaining calls gives
/// reproducible per-(grid point, replication) streams.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
