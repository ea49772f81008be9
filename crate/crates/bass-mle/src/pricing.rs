//! Price trajectories and non-anticipating pricing policies.
//!
//! Prices are piecewise constant between decision epochs, which keeps every
//! compensator integral in closed form and makes the simulator's inversion
//! sampling exact. A [`PricingPolicy`] is re-queried at every adoption event
//! and at its own scheduled review times, so the realized [`PricePath`] is
//! piecewise constant by construction.

use crate::error::{Error, Result};
use crate::model::PriceResponse;

/// One piecewise-constant piece of a price trajectory: price `price` is
/// posted on `[start, end)` (the last segment of a path is closed at its
/// right end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceSegment {
    pub start: f64,
    pub end: f64,
    pub price: f64,
}

/// Piecewise-constant price trajectory covering `[0, horizon]`.
///
/// Segments are sorted, non-overlapping and gap-free; the first starts at 0
/// and the last ends at the horizon. An empty segment list is the degenerate
/// trajectory with horizon 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    segments: Vec<PriceSegment>,
}

impl PricePath {
    pub fn new(segments: Vec<PriceSegment>) -> Result<Self> {
        if let Some(first) = segments.first() {
            if first.start != 0.0 {
                return Err(Error::InvalidPricePath(format!(
                    "first segment must start at 0, starts at {}",
                    first.start
                )));
            }
        }
        let mut prev_end = 0.0;
        for (k, seg) in segments.iter().enumerate() {
            if !seg.start.is_finite() || !seg.end.is_finite() || !seg.price.is_finite() {
                return Err(Error::InvalidPricePath(format!(
                    "segment {k} has non-finite fields: {seg:?}"
                )));
            }
            if k > 0 && seg.start != prev_end {
                return Err(Error::InvalidPricePath(format!(
                    "segment {k} starts at {} but previous ends at {prev_end}",
                    seg.start
                )));
            }
            if seg.end <= seg.start {
                return Err(Error::InvalidPricePath(format!(
                    "segment {k} must have end > start, got [{}, {}]",
                    seg.start, seg.end
                )));
            }
            prev_end = seg.end;
        }
        Ok(Self { segments })
    }

    /// A single constant-price segment over `[0, horizon]` (empty when
    /// `horizon == 0`).
    pub fn constant(price: f64, horizon: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::InvalidPricePath(format!(
                "horizon must be finite and >= 0, got {horizon}"
            )));
        }
        if horizon == 0.0 {
            return Self::new(Vec::new());
        }
        Self::new(vec![PriceSegment {
            start: 0.0,
            end: horizon,
            price,
        }])
    }

    pub fn segments(&self) -> &[PriceSegment] {
        &self.segments
    }

    pub fn horizon(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// Index of the segment containing `s` under the `[start, end)`
    /// convention, with the last segment closed at the horizon.
    fn segment_index_at(&self, s: f64) -> Result<usize> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&s) || self.segments.is_empty() {
            return Err(Error::TimeOutOfRange { t: s, horizon });
        }
        // partition_point: first segment with end > s; the last segment
        // owns s == horizon.
        let idx = self.segments.partition_point(|seg| seg.end <= s);
        Ok(idx.min(self.segments.len() - 1))
    }

    /// Price posted at time `s`. Segment boundaries belong to the segment
    /// on their right; the horizon belongs to the last segment.
    pub fn price_at(&self, s: f64) -> Result<f64> {
        Ok(self.segments[self.segment_index_at(s)?].price)
    }

    /// Left-limit price at `s`, i.e. the price in force just before `s`.
    ///
    /// At a segment boundary this is the price of the segment *ending* at
    /// `s`, which is the intensity-relevant price for an adoption occurring
    /// exactly when a policy posts a new price. Requires `s > 0`.
    pub fn price_before(&self, s: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(s > 0.0 && s <= horizon) {
            return Err(Error::TimeOutOfRange { t: s, horizon });
        }
        let idx = self.segments.partition_point(|seg| seg.end < s);
        Ok(self.segments[idx].price)
    }

    /// Exact `∫_a^b x(r_s) ds`, summed segment by segment.
    pub fn integrate_x(&self, x: &PriceResponse, a: f64, b: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < a || b > horizon {
            return Err(Error::InvalidInterval { a, b });
        }
        if a == b {
            return Ok(0.0);
        }
        let mut total = 0.0;
        let start_idx = self.segments.partition_point(|seg| seg.end <= a);
        for seg in &self.segments[start_idx..] {
            if seg.start >= b {
                break;
            }
            let lo = seg.start.max(a);
            let hi = seg.end.min(b);
            if hi > lo {
                total += x.eval_checked(seg.price)? * (hi - lo);
            }
        }
        Ok(total)
    }
}

/// Observable history available to a pricing policy at a decision epoch:
/// everything recorded strictly before `now`.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    /// Adoption times up to and including the current epoch.
    pub adoption_times: &'a [f64],
    /// Price segments already closed before the current epoch.
    pub past_segments: &'a [PriceSegment],
    /// Price posted on the still-open segment, if any.
    pub current_price: Option<f64>,
}

impl History<'_> {
    pub fn empty() -> History<'static> {
        History {
            adoption_times: &[],
            past_segments: &[],
            current_price: None,
        }
    }

    /// Cumulative adoptions observed so far.
    pub fn adoptions(&self) -> u64 {
        self.adoption_times.len() as u64
    }
}

/// A non-anticipating pricing rule: the price posted at time `t` may depend
/// only on the history up to `t`.
///
/// Policies are queried at decision epochs: every adoption event, every
/// time reported by [`PricingPolicy::next_review`], and the start of the
/// run. The returned price is posted until the next epoch.
pub trait PricingPolicy {
    /// Price to post from `now` until the next decision epoch.
    fn price(&self, history: &History<'_>, now: f64) -> f64;

    /// Next scheduled review strictly after `now`, if the policy has one.
    fn next_review(&self, _now: f64) -> Option<f64> {
        None
    }
}

/// Price the policy posts at `now` given the observable history.
pub fn realize_policy(policy: &dyn PricingPolicy, history: &History<'_>, now: f64) -> f64 {
    policy.price(history, now)
}

/// Posts the same price forever.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy {
    pub price: f64,
}

impl PricingPolicy for ConstantPolicy {
    fn price(&self, _history: &History<'_>, _now: f64) -> f64 {
        self.price
    }
}

/// State-feedback rule `r(j) = base + per_adoption · j` where `j` is the
/// number of adoptions observed so far.
#[derive(Debug, Clone, Copy)]
pub struct StateFeedbackPolicy {
    pub base: f64,
    pub per_adoption: f64,
}

impl PricingPolicy for StateFeedbackPolicy {
    fn price(&self, history: &History<'_>, _now: f64) -> f64 {
        self.base + self.per_adoption * history.adoptions() as f64
    }
}

/// Follows a fixed schedule; reviews at each schedule breakpoint. Past the
/// schedule's horizon the last price is held.
#[derive(Debug, Clone)]
pub struct SchedulePolicy {
    schedule: PricePath,
}

impl SchedulePolicy {
    pub fn new(schedule: PricePath) -> Result<Self> {
        if schedule.segments().is_empty() {
            return Err(Error::InvalidPricePath(
                "schedule must have at least one segment".into(),
            ));
        }
        Ok(Self { schedule })
    }

    pub fn schedule(&self) -> &PricePath {
        &self.schedule
    }
}

impl PricingPolicy for SchedulePolicy {
    fn price(&self, _history: &History<'_>, now: f64) -> f64 {
        if now >= self.schedule.horizon() {
            self.schedule.segments().last().expect("non-empty").price
        } else {
            self.schedule.price_at(now.max(0.0)).expect("in range")
        }
    }

    fn next_review(&self, now: f64) -> Option<f64> {
        self.schedule
            .segments()
            .iter()
            .map(|seg| seg.start)
            .find(|&s| s > now)
    }
}
