//! Maximum-likelihood fitting.
//!
//! The transformed fit works in (α', β'): for fixed β' the likelihood has
//! the closed-form conditional maximizer `α̂'(β') = D / S(β')`, so fitting
//! reduces to a one-dimensional search over the profiled likelihood
//! `g(β') = L(α̂'(β'), β')`. The likelihood is element-wise concave but not
//! guaranteed jointly concave, so the search combines a log-spaced grid
//! pre-scan (with bracket expansion at the upper edge) with golden-section
//! refinement and a derivative bisection polish.
//!
//! The natural fit maximizes the same likelihood rewritten in (α, β) by
//! damped Newton ascent; in those coordinates the log-likelihood is a sum
//! of concave terms, so Newton with backtracking converges globally. It
//! serves as the comparison baseline for the transformed estimator.

use crate::error::{Error, Result};
use crate::likelihood::PathStats;
use crate::model::{MarketParams, PriceResponse, TransformedParams};
use crate::simulator::ObservedPath;

/// Search controls for the fitters. Defaults follow the profiled search
/// design: initial β' bracket `[1e−6, 10]` expandable by doubling up to
/// 2¹⁰×, a 32-point log-spaced pre-scan, gradient tolerance 1e−8, relative
/// bracket tolerance 1e−10 and at most 200 refinement iterations.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub beta_p_bracket: (f64, f64),
    pub grad_tol: f64,
    pub bracket_rel_tol: f64,
    pub max_iterations: u32,
    pub max_expansions: u32,
    pub grid_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            beta_p_bracket: (1e-6, 10.0),
            grad_tol: 1e-8,
            bracket_rel_tol: 1e-10,
            max_iterations: 200,
            max_expansions: 10,
            grid_points: 32,
        }
    }
}

/// Which coordinates the optimizer worked in (and which coordinates the
/// reported covariance refers to).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    Transformed,
    Natural,
}

/// Fit output in both parametrizations with observed-information standard
/// errors.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// (α̂', β̂'); `None` only for a natural fit whose α̂ ≤ β̂.
    pub tp_hat: Option<TransformedParams>,
    /// (α̂, β̂) with the path's market size.
    pub natural_hat: MarketParams,
    /// Log-likelihood at the optimum (including the `ln x` constants).
    pub loglik: f64,
    /// Square roots of the diagonal of `covariance`.
    pub std_errors: [f64; 2],
    /// Inverse observed information at the optimum, in the coordinates
    /// named by `parametrization`. NaN when the information is singular.
    pub covariance: [[f64; 2]; 2],
    pub iterations: u32,
    /// Gradient norm below tolerance at an interior optimum.
    pub converged: bool,
    /// The optimizer стopped pinned at a search boundary.
    pub boundary: bool,
    /// Final β' search interval (transformed fit only).
    pub bracket: Option<(f64, f64)>,
    pub parametrization: Parametrization,
}

/// Closed-form conditional maximizer of the likelihood over α' for fixed
/// β': `α̂'(β') = D / S(β')`. Needs at least one adoption, otherwise the
/// maximizer sits at the α' = 0 boundary.
pub fn profile_alpha(path: &ObservedPath, beta_p: f64, x: &PriceResponse) -> Result<f64> {
    if !beta_p.is_finite() || beta_p <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "beta' must be finite and > 0, got {beta_p}"
        )));
    }
    let stats = PathStats::new(path, x)?;
    if stats.n == 0 {
        return Err(Error::NoAdoptions);
    }
    Ok(stats.n as f64 / stats.s_of(beta_p))
}

/// Profiled log-likelihood and its derivative, as functions of β' given
/// the path statistics.
struct Profile<'a> {
    stats: &'a PathStats,
}

impl Profile<'_> {
    /// `g(β') = C + D·ln(D/S(β')) + Σ ln(1 + q_i β') − D`.
    fn value(&self, b: f64) -> f64 {
        let n = self.stats.n as f64;
        let s = self.stats.s_of(b);
        let mut v = self.stats.const_terms + n * (n / s).ln() - n;
        for &qi in &self.stats.q[..self.stats.n] {
            v += (1.0 + qi * b).ln();
        }
        v
    }

    /// `g'(β') = Σ q_i/(1 + q_i β') − D·S'(β')/S(β')` (envelope theorem).
    fn deriv(&self, b: f64) -> f64 {
        let n = self.stats.n as f64;
        let s = self.stats.s_of(b);
        let mut d = -n * self.stats.wq_sum / s;
        for &qi in &self.stats.q[..self.stats.n] {
            d += qi / (1.0 + qi * b);
        }
        d
    }
}

/// Maximize the profiled likelihood over β' > 0. Paths with fewer than two
/// adoptions are rejected: with a single event the profiled likelihood can
/// be monotone, leaving no interior optimum to report.
pub fn fit_mle(path: &ObservedPath, x: &PriceResponse, options: &FitOptions) -> Result<FitResult> {
    let stats = PathStats::new(path, x)?;
    if stats.n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: stats.n as u64,
        });
    }
    let profile = Profile { stats: &stats };
    let (lo, mut hi) = options.beta_p_bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidConfig(format!(
            "beta' bracket must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let mut iterations: u32 = 0;

    // Log-spaced pre-scan, doubling the upper edge while the maximum sits
    // on it.
    let grid_max = |lo: f64, hi: f64| -> (usize, Vec<f64>) {
        let k = options.grid_points.max(3);
        let (llo, lhi) = (lo.ln(), hi.ln());
        let grid: Vec<f64> = (0..k)
            .map(|i| (llo + (lhi - llo) * i as f64 / (k - 1) as f64).exp())
            .collect();
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, &b) in grid.iter().enumerate() {
            let v = profile.value(b);
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        (best, grid)
    };

    let mut expansions = 0;
    let (mut best, mut grid) = grid_max(lo, hi);
    while best == grid.len() - 1 && expansions < options.max_expansions {
        hi *= 2.0;
        expansions += 1;
        let scan = grid_max(lo, hi);
        best = scan.0;
        grid = scan.1;
    }
    // Grid evaluations are reported but do not eat the refinement budget.
    iterations += (options.grid_points as u32) * (1 + expansions);
    let mut refine_left = options.max_iterations;

    let mut boundary = false;
    let beta_hat;
    if best == grid.len() - 1 {
        // Still pinned at the top after the expansion budget.
        boundary = true;
        beta_hat = hi;
    } else if best == 0 && profile.deriv(grid[0]) <= 0.0 {
        // The likelihood wants β' at or below the lower edge.
        boundary = true;
        beta_hat = lo;
    } else {
        // Interior optimum between the grid neighbours of the best point.
        // Bisection on the sign of g' is the workhorse: near the maximum
        // the value of g is flat to machine precision long before g' is,
        // so golden section alone cannot reach the gradient tolerance.
        let mut a = if best == 0 { grid[0] } else { grid[best - 1] };
        let mut b = grid[best + 1];
        if !(profile.deriv(a) > 0.0 && profile.deriv(b) < 0.0) {
            // No sign change yet (local wiggle): golden-section until one
            // appears or the bracket is moderately tight.
            let inv_phi = 0.618_033_988_749_894_9_f64;
            let mut x1 = b - inv_phi * (b - a);
            let mut x2 = a + inv_phi * (b - a);
            let mut f1 = profile.value(x1);
            let mut f2 = profile.value(x2);
            while refine_left > 0 {
                let mid = 0.5 * (a + b);
                if (b - a) <= 1e-6 * mid.abs().max(1e-9)
                    || (profile.deriv(a) > 0.0 && profile.deriv(b) < 0.0)
                {
                    break;
                }
                if f1 < f2 {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + inv_phi * (b - a);
                    f2 = profile.value(x2);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - inv_phi * (b - a);
                    f1 = profile.value(x1);
                }
                iterations += 1;
                refine_left -= 1;
            }
        }
        let mut mid = 0.5 * (a + b);
        if profile.deriv(a) > 0.0 && profile.deriv(b) < 0.0 {
            while refine_left > 0 {
                mid = 0.5 * (a + b);
                let dm = profile.deriv(mid);
                if dm.abs() < options.grad_tol
                    || (b - a) <= options.bracket_rel_tol * mid.abs().max(1e-12)
                {
                    break;
                }
                if dm > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
                iterations += 1;
                refine_left -= 1;
            }
        }
        beta_hat = mid;
    }

    let alpha_hat = stats.n as f64 / stats.s_of(beta_hat);
    let tp_hat = TransformedParams::new(alpha_hat, beta_hat)?;
    let sc = stats.score_and_curvature(&tp_hat);
    let grad_norm = (sc.gradient[0] * sc.gradient[0] + sc.gradient[1] * sc.gradient[1]).sqrt();
    let converged = !boundary && grad_norm < options.grad_tol;
    let (covariance, std_errors) = invert_information(&sc.hessian);

    Ok(FitResult {
        natural_hat: tp_hat.to_market(path.m())?,
        tp_hat: Some(tp_hat),
        loglik: stats.parts(&tp_hat).total,
        std_errors,
        covariance,
        iterations,
        converged,
        boundary,
        bracket: Some((lo, hi)),
        parametrization: Parametrization::Transformed,
    })
}

/// Maximize the likelihood directly in (α, β) by damped Newton ascent.
pub fn fit_mle_natural(
    path: &ObservedPath,
    x: &PriceResponse,
    options: &FitOptions,
) -> Result<FitResult> {
    let stats = PathStats::new(path, x)?;
    if stats.n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: stats.n as u64,
        });
    }
    let n = stats.n as f64;
    let a_coef: Vec<f64> = stats.q[..stats.n].iter().map(|q| q - 1.0).collect();

    // L(α, β) = const + Σ ln(α + β a_i) − α·w_sum − β·wa_sum
    let value = |al: f64, be: f64| -> f64 {
        let mut v = stats.const_terms - al * stats.w_sum - be * stats.wa_sum;
        for &ai in &a_coef {
            v += (al + be * ai).ln();
        }
        v
    };
    let grad_hess = |al: f64, be: f64| -> ([f64; 2], [[f64; 2]; 2]) {
        let mut g = [-stats.w_sum, -stats.wa_sum];
        let mut h = [[0.0f64; 2]; 2];
        for &ai in &a_coef {
            let rho = al + be * ai;
            g[0] += 1.0 / rho;
            g[1] += ai / rho;
            let r2 = rho * rho;
            h[0][0] -= 1.0 / r2;
            h[0][1] -= ai / r2;
            h[1][1] -= ai * ai / r2;
        }
        h[1][0] = h[0][1];
        (g, h)
    };

    // Start at the β = 0 closed form for α, with a proportional β guess.
    let mut al = n / stats.w_sum;
    let mut be = 0.5 * al;
    let floor = 1e-12;
    let mut iterations = 0u32;
    let mut converged = false;
    let mut boundary = false;
    let mut hess = [[0.0f64; 2]; 2];
    while iterations < options.max_iterations {
        let (g, h) = grad_hess(al, be);
        hess = h;
        let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gnorm < options.grad_tol {
            converged = true;
            break;
        }
        // Newton step: solve (−H)·step = g.
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let (sa, sb) = if det.abs() > 0.0 {
            (
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
            )
        } else {
            // Degenerate curvature: fall back to a scaled ascent step.
            (g[0] * al / n.max(1.0), g[1] * al / n.max(1.0))
        };
        // Backtracking: stay in the positive quadrant and ascend. The
        // noise floor keeps the test meaningful once the quadratic gain
        // per step drops below the float resolution of the likelihood.
        let v0 = value(al, be);
        let noise = 1e-12 * v0.abs().max(1.0);
        let slope = g[0] * sa + g[1] * sb;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (na, nb) = (al + step * sa, be + step * sb);
            if na > floor && nb > floor && value(na, nb) >= v0 + 1e-4 * step * slope - noise {
                al = na;
                be = nb;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // Stalled against the quadrant boundary (typically β → 0).
            boundary = true;
            if be + sb <= floor {
                be = floor;
            }
            if al + sa <= floor {
                al = floor;
            }
            break;
        }
    }
    if !converged && !boundary {
        let (g, h) = grad_hess(al, be);
        hess = h;
        converged = (g[0] * g[0] + g[1] * g[1]).sqrt() < options.grad_tol;
    }

    let natural_hat = MarketParams::new(al, be, path.m())?;
    let tp_hat = natural_hat.to_transformed().ok();
    let (covariance, std_errors) = invert_information(&hess);

    Ok(FitResult {
        tp_hat,
        loglik: value(al, be),
        natural_hat,
        std_errors,
        covariance,
        iterations,
        converged: converged && !boundary,
        boundary,
        bracket: None,
        parametrization: Parametrization::Natural,
    })
}

/// Invert the observed information `−H`. Returns NaN entries when the
/// information is not positive definite.
fn invert_information(hessian: &[[f64; 2]; 2]) -> ([[f64; 2]; 2], [f64; 2]) {
    let j = [
        [-hessian[0][0], -hessian[0][1]],
        [-hessian[1][0], -hessian[1][1]],
    ];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det > 0.0 && j[0][0] > 0.0 {
        let cov = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        (cov, [cov[0][0].sqrt(), cov[1][1].sqrt()])
    } else {
        let nan = f64::NAN;
        ([[nan; 2]; 2], [nan; 2])
    }
}
