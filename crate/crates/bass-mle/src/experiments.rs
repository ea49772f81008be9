//! Monte Carlo harness: empirical verification of the O(1/(n+1)) MSE rate,
//! the m-invariance of its constant, and the proof-inequality diagnostics.
//!
//! Conditioning on `D_t = n` is realized by simulating until exactly `n`
//! adoptions rather than rejection-sampling horizon-t paths: with a zero
//! post-event tail the conditional law given n events is exactly the law of
//! the first n inter-adoption intervals. Replications are independent work
//! items executed in parallel; every stream is derived from the master seed
//! so reports are bit-reproducible.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{fit_mle, FitOptions};
use crate::likelihood::{fisher_sandwich, hellinger_gap, Direction};
use crate::model::{MarketParams, PriceResponse, TransformedParams};
use crate::pricing::PricingPolicy;
use crate::simulator::{mix_seed, simulate_until_n};

/// Seed-domain tags so the MSE grid, the m-invariance grid and the
/// bootstrap never share a stream.
const DOMAIN_MSE: u64 = 0x4d53_4531;
const DOMAIN_M_INV: u64 = 0x4d49_4e56;
const DOMAIN_BOOT: u64 = 0x424f_4f54;

/// Bootstrap resamples behind every slope confidence interval.
const BOOTSTRAP_RESAMPLES: u32 = 200;

/// Fraction of excluded replications above which a report row is flagged
/// invalid.
const MAX_EXCLUDED_FRACTION: f64 = 0.05;

/// Full description of an MSE-rate experiment.
#[derive(Clone)]
pub struct ExperimentConfig {
    /// True parameters; must satisfy α > β so the transformed truth exists.
    pub params: MarketParams,
    pub x: PriceResponse,
    pub policy: Arc<dyn PricingPolicy + Send + Sync>,
    /// Adoption counts to condition on, strictly increasing, max ≤ m.
    pub n_grid: Vec<u64>,
    /// Replications per grid point (≥ 1).
    pub replications: u32,
    pub master_seed: u64,
    /// Post-n-th observation window passed to the simulator (default 0).
    pub tail: f64,
    pub fit: FitOptions,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::InvalidConfig("n grid must be non-empty".into()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "n grid must be strictly increasing".into(),
            ));
        }
        let max_n = *self.n_grid.last().expect("non-empty");
        if max_n > self.params.m() {
            return Err(Error::InvalidConfig(format!(
                "max n = {max_n} exceeds market size {}",
                self.params.m()
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if !self.tail.is_finite() || self.tail < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tail must be finite and >= 0, got {}",
                self.tail
            )));
        }
        self.params.to_transformed().map(|_| ())
    }
}

/// One n-grid row of an MSE report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRow {
    pub n: u64,
    pub replications: u32,
    /// Failed/boundary fits excluded from the averages.
    pub excluded: u32,
    pub mse_alpha_p: f64,
    pub mse_beta_p: f64,
    /// MSE of β̂ = β̂'·α̂' against the natural-parameter truth.
    pub mse_beta_natural: f64,
    /// `mse_alpha_p + mse_beta_p`, the theorem's left-hand side.
    pub mse_total: f64,
    /// `mse_total × (n + 1)`, the empirical bound constant per row.
    pub mse_total_scaled: f64,
    /// Monte Carlo standard error of `mse_total`.
    pub mc_stderr: f64,
    /// False when more than 5% of replications were excluded.
    pub valid: bool,
}

/// OLS slope with a replication-bootstrap 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub bootstrap_resamples: u32,
}

/// Monte Carlo convergence summary: one row per conditioning count and the
/// fitted ln-ln rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseReport {
    pub rows: Vec<MseRow>,
    pub slope: SlopeFit,
    /// Per-row squared errors of converged fits, kept for resampling and
    /// deeper analysis: `(err_alpha_p², err_beta_p², err_beta_natural²)`.
    #[serde(skip)]
    pub raw_errors: Vec<Vec<[f64; 3]>>,
}

/// One grid point's simulate-and-fit job, shared across replications.
struct ReplicationJob<'a> {
    params: MarketParams,
    x: &'a PriceResponse,
    policy: &'a (dyn PricingPolicy + Send + Sync),
    tp0: TransformedParams,
    beta0: f64,
    n: u64,
    tail: f64,
    fit: &'a FitOptions,
}

impl ReplicationJob<'_> {
    /// Squared errors of one converged replication.
    fn run(&self, seed: u64) -> Option<[f64; 3]> {
        let path =
            simulate_until_n(self.params, *self.x, self.policy, self.n, self.tail, seed).ok()?;
        let res = fit_mle(&path, self.x, self.fit).ok()?;
        if !res.converged {
            return None;
        }
        let tp = res.tp_hat?;
        let da = tp.alpha_p() - self.tp0.alpha_p();
        let db = tp.beta_p() - self.tp0.beta_p();
        let dbn = res.natural_hat.beta() - self.beta0;
        Some([da * da, db * db, dbn * dbn])
    }
}

fn summarize_row(
    n: u64,
    replications: u32,
    errors: &[Option<[f64; 3]>],
) -> (MseRow, Vec<[f64; 3]>) {
    let kept: Vec<[f64; 3]> = errors.iter().flatten().copied().collect();
    let excluded = replications - kept.len() as u32;
    // A row where every fit failed or sat on a boundary has no MSE at all;
    // report NaN rather than a misleading zero.
    let (ma, mb, mbn, stderr) = if kept.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let k = kept.len() as f64;
        let mean = |idx: usize| kept.iter().map(|e| e[idx]).sum::<f64>() / k;
        let (ma, mb, mbn) = (mean(0), mean(1), mean(2));
        let mse_total = ma + mb;
        let var_total = kept
            .iter()
            .map(|e| {
                let t = e[0] + e[1] - mse_total;
                t * t
            })
            .sum::<f64>()
            / k;
        (ma, mb, mbn, (var_total / k).sqrt())
    };
    let mse_total = ma + mb;
    let row = MseRow {
        n,
        replications,
        excluded,
        mse_alpha_p: ma,
        mse_beta_p: mb,
        mse_beta_natural: mbn,
        mse_total,
        mse_total_scaled: mse_total * (n + 1) as f64,
        mc_stderr: stderr,
        valid: f64::from(excluded) <= MAX_EXCLUDED_FRACTION * f64::from(replications),
    };
    (row, kept)
}

/// Ordinary least squares slope of `y` on `x`. Pairs with a non-finite
/// coordinate are dropped; NaN when fewer than two usable points remain.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = pts.iter().map(|(a, _)| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn bootstrap_slope_ci(ln_n: &[f64], raw: &[Vec<[f64; 3]>], master_seed: u64) -> (f64, f64) {
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES as usize);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut rng =
            ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(master_seed, DOMAIN_BOOT), b as u64));
        let mut xs = Vec::with_capacity(raw.len());
        let mut ys = Vec::with_capacity(raw.len());
        for (x, errors) in ln_n.iter().zip(raw) {
            if errors.is_empty() {
                continue;
            }
            let mut total = 0.0;
            for _ in 0..errors.len() {
                let pick = errors[rng.random_range(0..errors.len())];
                total += pick[0] + pick[1];
            }
            let mse = total / errors.len() as f64;
            if mse > 0.0 {
                xs.push(*x);
                ys.push(mse.ln());
            }
        }
        if xs.len() >= 2 {
            slopes.push(ols_slope(&xs, &ys));
        }
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    if slopes.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let lo_idx = ((slopes.len() as f64) * 0.025).floor() as usize;
    let hi_idx = (((slopes.len() as f64) * 0.975).ceil() as usize).saturating_sub(1);
    (slopes[lo_idx], slopes[hi_idx.min(slopes.len() - 1)])
}

/// Run the rate experiment: for each `n` simulate `replications` fixed-n
/// paths on independent streams, fit each, and accumulate squared errors
/// against the transformed truth (and against β in natural units).
/// Deterministic given the master seed.
pub fn run_mse_experiment(config: &ExperimentConfig) -> Result<MseReport> {
    config.validate()?;
    let tp0 = config.params.to_transformed()?;
    let beta0 = config.params.beta();

    let mut rows = Vec::with_capacity(config.n_grid.len());
    let mut raw_errors = Vec::with_capacity(config.n_grid.len());
    for (gi, &n) in config.n_grid.iter().enumerate() {
        let row_seed = mix_seed(mix_seed(config.master_seed, DOMAIN_MSE), gi as u64);
        let job = ReplicationJob {
            params: config.params,
            x: &config.x,
            policy: config.policy.as_ref(),
            tp0,
            beta0,
            n,
            tail: config.tail,
            fit: &config.fit,
        };
        let errors: Vec<Option<[f64; 3]>> = (0..config.replications)
            .into_par_iter()
            .map(|rep| job.run(mix_seed(row_seed, rep as u64)))
            .collect();
        let (row, kept) = summarize_row(n, config.replications, &errors);
        rows.push(row);
        raw_errors.push(kept);
    }

    let ln_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ln_mse: Vec<f64> = rows.iter().map(|r| r.mse_total.ln()).collect();
    let slope = ols_slope(&ln_n, &ln_mse);
    let (ci_lower, ci_upper) = bootstrap_slope_ci(&ln_n, &raw_errors, config.master_seed);

    Ok(MseReport {
        rows,
        slope: SlopeFit {
            slope,
            ci_lower,
            ci_upper,
            bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        },
        raw_errors,
    })
}

/// One market-size row of the m-invariance table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MInvarianceRow {
    pub m: u64,
    pub replications: u32,
    pub excluded: u32,
    pub mse_total: f64,
    pub mc_stderr: f64,
    pub valid: bool,
}

/// MSE at a fixed conditioning count across market sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MInvarianceReport {
    pub n: u64,
    pub rows: Vec<MInvarianceRow>,
    /// ln-ln slope of MSE against m.
    pub slope: f64,
    /// max/min ratio of the per-m MSEs.
    pub spread: f64,
    /// `|slope| ≤ 0.3`, the no-blow-up check.
    pub within_tolerance: bool,
}

/// Fixed-n MSE across an m grid; the theorem says the bound constant does
/// not depend on m. Requires `min(m_grid) ≥ 2n`.
pub fn run_m_invariance_check(
    config: &ExperimentConfig,
    n: u64,
    m_grid: &[u64],
) -> Result<MInvarianceReport> {
    if m_grid.is_empty() {
        return Err(Error::InvalidConfig("m grid must be non-empty".into()));
    }
    if config.replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    for &m in m_grid {
        if m < 2 * n {
            return Err(Error::InvalidConfig(format!(
                "m grid entries must be at least 2n = {}, got {m}",
                2 * n
            )));
        }
    }
    let alpha = config.params.alpha();
    let beta = config.params.beta();
    let mut rows = Vec::with_capacity(m_grid.len());
    for (gi, &m) in m_grid.iter().enumerate() {
        let params = MarketParams::new(alpha, beta, m)?;
        let row_seed = mix_seed(mix_seed(config.master_seed, DOMAIN_M_INV), gi as u64);
        let job = ReplicationJob {
            params,
            x: &config.x,
            policy: config.policy.as_ref(),
            tp0: params.to_transformed()?,
            beta0: beta,
            n,
            tail: config.tail,
            fit: &config.fit,
        };
        let errors: Vec<Option<[f64; 3]>> = (0..config.replications)
            .into_par_iter()
            .map(|rep| job.run(mix_seed(row_seed, rep as u64)))
            .collect();
        let (row, _) = summarize_row(n, config.replications, &errors);
        rows.push(MInvarianceRow {
            m,
            replications: row.replications,
            excluded: row.excluded,
            mse_total: row.mse_total,
            mc_stderr: row.mc_stderr,
            valid: row.valid,
        });
    }
    let ln_m: Vec<f64> = rows.iter().map(|r| (r.m as f64).ln()).collect();
    let ln_mse: Vec<f64> = rows.iter().map(|r| r.mse_total.ln()).collect();
    let slope = ols_slope(&ln_m, &ln_mse);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &rows {
        lo = lo.min(r.mse_total);
        hi = hi.max(r.mse_total);
    }
    Ok(MInvarianceReport {
        n,
        rows,
        slope,
        spread: hi / lo,
        within_tolerance: slope.abs() <= 0.3,
    })
}

/// The proof's closing constants for the theorem bound, built from the
/// true transformed parameters and caller-supplied deviation bounds δ̄₁, δ̄₂
/// (non-constructive in the proof; default 1.0 upstream).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremConstants {
    /// `R = 1/(α'₀ + α'₀β'₀)` (body definition).
    pub r: f64,
    /// `C_I` along α': `(α'₀(1 + δ̄₁))²`.
    pub c_i_alpha_p: f64,
    /// `C_I` along β': `(1 + β'₀(1 + δ̄₂))²`.
    pub c_i_beta_p: f64,
    pub delta_bar_1: f64,
    pub delta_bar_2: f64,
    /// `α_θ = 8√R · max{((1+δ̄₁)α'₀)², (1+β'₀(1+δ̄₂))²}`.
    pub alpha_theta: f64,
}

impl TheoremConstants {
    pub fn new(tp0: &TransformedParams, delta_bar_1: f64, delta_bar_2: f64) -> Result<Self> {
        if !(delta_bar_1.is_finite() && delta_bar_1 > 0.0)
            || !(delta_bar_2.is_finite() && delta_bar_2 > 0.0)
        {
            return Err(Error::InvalidParameter(
                "delta bars must be finite and > 0".into(),
            ));
        }
        let (a0, b0) = (tp0.alpha_p(), tp0.beta_p());
        let r = 1.0 / (a0 + a0 * b0);
        let ca = (a0 * (1.0 + delta_bar_1)).powi(2);
        let cb = (1.0 + b0 * (1.0 + delta_bar_2)).powi(2);
        Ok(Self {
            r,
            c_i_alpha_p: ca,
            c_i_beta_p: cb,
            delta_bar_1,
            delta_bar_2,
            alpha_theta: 8.0 * r.sqrt() * ca.max(cb),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub n: u64,
    pub mse_total: f64,
    /// `α_θ/(n+1)`.
    pub bound: f64,
    pub pass: bool,
}

/// Row-by-row check of `mse_total ≤ α_θ/(n+1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub rows: Vec<BoundRow>,
    /// `max over rows of mse_total × (n+1)`, the empirical constant.
    pub empirical_constant: f64,
    pub all_pass: bool,
    /// Smallest common δ̄ = δ̄₁ = δ̄₂ that would make every row pass (0 when
    /// the supplied constants already suffice). The proof's δ̄ is
    /// non-constructive, so this is the number to report on failure.
    pub delta_bar_needed: f64,
}

/// Check each report row against the theorem bound under the supplied
/// constants.
pub fn verify_theorem_bound(report: &MseReport, constants: &TheoremConstants) -> BoundCheck {
    let mut rows = Vec::with_capacity(report.rows.len());
    let mut empirical = 0.0f64;
    let mut all_pass = true;
    for r in &report.rows {
        let bound = constants.alpha_theta / (r.n + 1) as f64;
        let pass = r.mse_total <= bound;
        all_pass &= pass;
        empirical = empirical.max(r.mse_total_scaled);
        rows.push(BoundRow {
            n: r.n,
            mse_total: r.mse_total,
            bound,
            pass,
        });
    }
    // Invert α_θ(δ̄) ≥ empirical for a common δ̄: both bracketed terms are
    // increasing in δ̄, and the max only needs one of them to reach the
    // target.
    let delta_bar_needed = if all_pass {
        0.0
    } else {
        let a0 = constants.c_i_alpha_p.sqrt() / (1.0 + constants.delta_bar_1);
        let b0 = (constants.c_i_beta_p.sqrt() - 1.0) / (1.0 + constants.delta_bar_2);
        let target = (empirical / (8.0 * constants.r.sqrt())).sqrt();
        let from_alpha = target / a0 - 1.0;
        let from_beta = (target - 1.0) / b0 - 1.0;
        from_alpha.min(from_beta).max(0.0)
    };
    BoundCheck {
        rows,
        empirical_constant: empirical,
        all_pass,
        delta_bar_needed,
    }
}

/// Grids for the proof-inequality diagnostics.
#[derive(Debug, Clone)]
pub struct DiagnosticsConfig {
    /// States j at which the waiting-time densities are compared (j < m).
    pub states: Vec<u64>,
    /// Perturbation sizes as fractions of the per-direction maximum
    /// `δ̄ · θ₀-component`; each must lie in [0, 1].
    pub delta_fracs: Vec<f64>,
    /// Counts for the Fisher sandwich rows.
    pub sandwich_n: Vec<u64>,
    pub delta_bar: (f64, f64),
    /// Constant price used for the Hellinger rows.
    pub price: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            states: vec![0, 1, 5, 25, 100, 500],
            delta_fracs: vec![0.0, 0.1, 0.25, 0.5, 0.75, 1.0],
            sandwich_n: vec![1, 10, 100, 1000],
            delta_bar: (1.0, 1.0),
            price: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HellingerRow {
    pub direction: &'static str,
    pub state: u64,
    pub delta: f64,
    pub hellinger_sq: f64,
    pub kl_bound: f64,
    pub affinity: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichRow {
    pub n: u64,
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub hellinger: Vec<HellingerRow>,
    pub sandwich: Vec<SandwichRow>,
    pub all_hold: bool,
}

/// Tabulate [`hellinger_gap`] and [`fisher_sandwich`] over the configured
/// grids and record whether every inequality row holds.
pub fn run_diagnostics(
    tp0: &TransformedParams,
    m: u64,
    x: &PriceResponse,
    config: &DiagnosticsConfig,
) -> Result<DiagnosticsReport> {
    for &f in &config.delta_fracs {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidConfig(format!(
                "delta fractions must lie in [0, 1], got {f}"
            )));
        }
    }
    let mut hellinger = Vec::new();
    let mut all_hold = true;
    for (direction, label, delta_bar, component) in [
        (
            Direction::AlphaP,
            "alpha_p",
            config.delta_bar.0,
            tp0.alpha_p(),
        ),
        (Direction::BetaP, "beta_p", config.delta_bar.1, tp0.beta_p()),
    ] {
        for &j in &config.states {
            if j >= m {
                continue;
            }
            for &frac in &config.delta_fracs {
                let delta = frac * delta_bar * component;
                let gap = hellinger_gap(j, m, tp0, delta, direction, delta_bar, config.price, x)?;
                let holds = gap.holds();
                all_hold &= holds;
                hellinger.push(HellingerRow {
                    direction: label,
                    state: j,
                    delta,
                    hellinger_sq: gap.hellinger_sq,
                    kl_bound: gap.kl_bound,
                    affinity: gap.affinity,
                    holds,
                });
            }
        }
    }
    let mut sandwich = Vec::new();
    for &n in &config.sandwich_n {
        let s = fisher_sandwich(n.min(m), m, tp0.beta_p())?;
        let holds = s.holds();
        all_hold &= holds;
        sandwich.push(SandwichRow {
            n: n.min(m),
            lower: s.lower,
            exact: s.exact,
            upper: s.upper,
            holds,
        });
    }
    Ok(DiagnosticsReport {
        hellinger,
        sandwich,
        all_hold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::ConstantPolicy;

    fn small_config(master_seed: u64, replications: u32) -> ExperimentConfig {
        ExperimentConfig {
            params: MarketParams::new(0.3, 0.1, 400).unwrap(),
            x: PriceResponse::unit(),
            policy: Arc::new(ConstantPolicy { price: 1.0 }),
            n_grid: vec![25, 50, 100],
            replications,
            master_seed,
            tail: 0.0,
            fit: FitOptions::default(),
        }
    }

    #[test]
    fn zero_replications_rejected() {
        let cfg = small_config(1, 0);
        assert!(matches!(
            run_mse_experiment(&cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn non_increasing_grid_rejected() {
        let mut cfg = small_config(1, 10);
        cfg.n_grid = vec![50, 25];
        assert!(cfg.validate().is_err());
        cfg.n_grid = vec![25, 25];
        assert!(cfg.validate().is_err());
        cfg.n_grid = vec![25, 500];
        assert!(cfg.validate().is_err()); // exceeds m = 400
    }

    #[test]
    fn report_is_reproducible() {
        let mut cfg = small_config(99, 24);
        cfg.params = MarketParams::new(0.3, 0.1, 150).unwrap();
        cfg.n_grid = vec![30, 60, 100];
        let a = run_mse_experiment(&cfg).unwrap();
        let b = run_mse_experiment(&cfg).unwrap();
        // Debug formatting is bit-faithful and NaN-tolerant.
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.rows.len(), 3);
        for row in &a.rows {
            assert!(row.mse_total >= 0.0 || row.mse_total.is_nan());
            if row.mse_total.is_finite() {
                assert_eq!(row.mse_total_scaled, row.mse_total * (row.n + 1) as f64);
            }
        }
    }

    #[test]
    fn pooled_split_runs_match_double_run() {
        // MSE from 2k replications vs the pooled MSE of two independent
        // k-replication runs, within 3 Monte Carlo standard errors.
        let n = 40u64;
        let run = |seed: u64, reps: u32| {
            let mut cfg = small_config(seed, reps);
            cfg.n_grid = vec![n];
            run_mse_experiment(&cfg).unwrap().rows[0].clone()
        };
        let k = 150;
        let a = run(11, k);
        let b = run(22, k);
        let c = run(33, 2 * k);
        let pooled = 0.5 * (a.mse_total + b.mse_total);
        let se = (a.mc_stderr.powi(2) + b.mc_stderr.powi(2)).sqrt() * 0.5;
        let tol = 3.0 * (se * se + c.mc_stderr * c.mc_stderr).sqrt();
        assert!(
            (c.mse_total - pooled).abs() <= tol,
            "pooled {pooled} vs double {} (tol {tol})",
            c.mse_total
        );
    }

    #[test]
    fn m_invariance_validates_grid() {
        let cfg = small_config(5, 10);
        assert!(run_m_invariance_check(&cfg, 100, &[150]).is_err()); // < 2n
        assert!(run_m_invariance_check(&cfg, 100, &[]).is_err());
    }

    #[test]
    fn m_invariance_rows_reproducible() {
        let cfg = small_config(7, 16);
        let a = run_m_invariance_check(&cfg, 20, &[100, 200]).unwrap();
        let b = run_m_invariance_check(&cfg, 20, &[100, 200]).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.rows.len(), 2);
        assert!(a.spread >= 1.0 || a.spread.is_nan());
    }

    #[test]
    fn theorem_constants_worked_values() {
        // α'₀ = 0.2, β'₀ = 0.5, δ̄ = 1: R = 1/0.3, C_I = {0.16, 4},
        // α_θ = 8·√(1/0.3)·4.
        let tp0 = TransformedParams::new(0.2, 0.5).unwrap();
        let c = TheoremConstants::new(&tp0, 1.0, 1.0).unwrap();
        assert!((c.r - 1.0 / 0.3).abs() < 1e-14);
        assert!((c.c_i_alpha_p - 0.16).abs() < 1e-14);
        assert!((c.c_i_beta_p - 4.0).abs() < 1e-14);
        let expected = 8.0 * (1.0f64 / 0.3).sqrt() * 4.0;
        assert!((c.alpha_theta - expected).abs() < 1e-12);
    }

    #[test]
    fn doubling_delta_bar_never_flips_pass_to_fail() {
        let tp0 = TransformedParams::new(0.2, 0.5).unwrap();
        let report = run_mse_experiment(&small_config(3, 30)).unwrap();
        for d in [0.5, 1.0, 2.0, 4.0] {
            let c1 = TheoremConstants::new(&tp0, d, d).unwrap();
            let c2 = TheoremConstants::new(&tp0, 2.0 * d, 2.0 * d).unwrap();
            assert!(c2.alpha_theta > c1.alpha_theta);
            let b1 = verify_theorem_bound(&report, &c1);
            let b2 = verify_theorem_bound(&report, &c2);
            for (r1, r2) in b1.rows.iter().zip(&b2.rows) {
                assert!(!r1.pass || r2.pass, "pass flipped to fail at n = {}", r1.n);
            }
        }
    }

    #[test]
    fn empirical_constant_is_max_scaled_mse() {
        let report = run_mse_experiment(&small_config(17, 20)).unwrap();
        let tp0 = TransformedParams::new(0.2, 0.5).unwrap();
        let check = verify_theorem_bound(&report, &TheoremConstants::new(&tp0, 1.0, 1.0).unwrap());
        let expected = report
            .rows
            .iter()
            .map(|r| r.mse_total_scaled)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(check.empirical_constant, expected);
        assert!(check.empirical_constant.is_finite());
    }

    #[test]
    fn delta_bar_needed_makes_all_rows_pass() {
        let report = run_mse_experiment(&small_config(23, 30)).unwrap();
        let tp0 = TransformedParams::new(0.2, 0.5).unwrap();
        let base = TheoremConstants::new(&tp0, 1.0, 1.0).unwrap();
        let check = verify_theorem_bound(&report, &base);
        if !check.all_pass {
            let d = check.delta_bar_needed * (1.0 + 1e-9);
            let widened = TheoremConstants::new(&tp0, d, d).unwrap();
            let again = verify_theorem_bound(&report, &widened);
            assert!(again.all_pass, "delta_bar_needed = {d} did not suffice");
        }
    }

    #[test]
    fn diagnostics_hold_on_reference_parameters() {
        let tp0 = TransformedParams::new(0.2, 0.5).unwrap();
        let report = run_diagnostics(
            &tp0,
            2000,
            &PriceResponse::unit(),
            &DiagnosticsConfig::default(),
        )
        .unwrap();
        assert!(report.all_hold);
        // zero-δ rows are exactly degenerate
        for row in report.hellinger.iter().filter(|r| r.delta == 0.0) {
            assert_eq!(row.hellinger_sq, 0.0);
            assert_eq!(row.kl_bound, 0.0);
        }
        for row in &report.sandwich {
            assert!(row.lower <= row.exact && row.exact <= row.upper);
        }
    }
}
