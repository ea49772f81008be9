//! Exact continuous-time log-likelihood of an observed path, its analytic
//! derivatives, and the proof-related diagnostic quantities.
//!
//! With `D` adoptions at times `t_1 < ... < t_D` on `[0, t]` (convention
//! `t_0 = 0`), `q_i := 1 + i/m` and `c_i := 1 + q_i β'`, the log-likelihood
//! in the transformed parameters is
//!
//! ```text
//! L(α', β') = Σ_{i<D} [ ln x(r_{t_{i+1}}) + ln(m − i) + ln α' + ln c_i ]
//!           − Σ_{i<D} (m − i) α' c_i ∫_{t_i}^{t_{i+1}} x(r_s) ds
//!           − (m − D) α' c_D ∫_{t_D}^{t} x(r_s) ds.
//! ```
//!
//! All compensator integrals are closed-form over the piecewise-constant
//! price path; quadrature appears only in test oracles. `ln x` terms are
//! constants in (α', β') but are always included in reported values.

use crate::error::{Error, Result};
use crate::model::{PriceResponse, TransformedParams};
use crate::simulator::ObservedPath;

/// Event-term / compensator split of the log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodParts {
    /// `Σ [ln x + ln(m − i) + ln α' + ln c_i]` over events.
    pub event_terms: f64,
    /// Total integrated intensity (nonnegative).
    pub compensator: f64,
    /// `event_terms − compensator`.
    pub total: f64,
}

/// Gradient and Hessian of the log-likelihood in (α', β').
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreAndCurvature {
    /// `(∂L/∂α', ∂L/∂β')`.
    pub gradient: [f64; 2],
    /// Symmetric 2×2 matrix of second partials; `[0][0] = −D/α'²` exactly.
    pub hessian: [[f64; 2]; 2],
}

/// Sufficient statistics of a path for likelihood work: everything that
/// does not depend on (α', β'). Computing them once makes repeated
/// likelihood, score and profile evaluations cheap during fitting.
#[derive(Debug, Clone)]
pub(crate) struct PathStats {
    /// Number of adoptions `D`.
    pub n: usize,
    /// `Σ ln x(r_{t_{i+1}}) + Σ ln(m − i)`, the parameter-free event terms.
    pub const_terms: f64,
    /// `q_i = 1 + i/m` for `i = 0..=n` (index `n` belongs to the tail).
    pub q: Vec<f64>,
    /// Sums of `w_i = (m − i)·∫_{t_i}^{t_{i+1}} x ds` over `i = 0..=n`
    /// (index `n` is the tail term `(m − n)·∫_{t_n}^{t} x ds`):
    /// `Σ w_i`, `Σ w_i q_i`, and `Σ w_i (q_i − 1)` for the natural fit.
    pub w_sum: f64,
    pub wq_sum: f64,
    pub wa_sum: f64,
}

impl PathStats {
    pub fn new(path: &ObservedPath, x: &PriceResponse) -> Result<Self> {
        let m = path.m() as f64;
        let times = path.adoption_times();
        let n = times.len();
        let price_path = path.price_path();

        let mut const_terms = 0.0;
        let mut q = Vec::with_capacity(n + 1);
        let (mut w_sum, mut wq_sum, mut wa_sum) = (0.0, 0.0, 0.0);
        let mut prev = 0.0;
        let mut accumulate = |wi: f64, qi: f64| {
            w_sum += wi;
            wq_sum += wi * qi;
            wa_sum += wi * (qi - 1.0);
        };
        for (i, &t) in times.iter().enumerate() {
            // Price in force when the (i+1)-st adoption occurred: the
            // left limit, since policies may repost exactly at the event.
            let x_at_event = x.eval_checked(price_path.price_before(t)?)?;
            const_terms += x_at_event.ln() + (m - i as f64).ln();
            let qi = 1.0 + i as f64 / m;
            q.push(qi);
            accumulate((m - i as f64) * price_path.integrate_x(x, prev, t)?, qi);
            prev = t;
        }
        let q_tail = 1.0 + n as f64 / m;
        accumulate(
            (m - n as f64) * price_path.integrate_x(x, prev, path.horizon())?,
            q_tail,
        );
        q.push(q_tail);
        Ok(Self {
            n,
            const_terms,
            q,
            w_sum,
            wq_sum,
            wa_sum,
        })
    }

    /// Compensator coefficient `S(β') = Σ w_i (1 + q_i β') = w_sum + β'·wq_sum`.
    pub fn s_of(&self, beta_p: f64) -> f64 {
        self.w_sum + beta_p * self.wq_sum
    }

    pub fn parts(&self, tp: &TransformedParams) -> LikelihoodParts {
        let (a, b) = (tp.alpha_p(), tp.beta_p());
        let mut event_terms = self.const_terms + self.n as f64 * a.ln();
        for &qi in &self.q[..self.n] {
            event_terms += (1.0 + qi * b).ln();
        }
        let compensator = a * self.s_of(b);
        LikelihoodParts {
            event_terms,
            compensator,
            total: event_terms - compensator,
        }
    }

    pub fn score_and_curvature(&self, tp: &TransformedParams) -> ScoreAndCurvature {
        let (a, b) = (tp.alpha_p(), tp.beta_p());
        let n = self.n as f64;
        let mut event_grad_b = 0.0;
        let mut event_curv_b = 0.0;
        for &qi in &self.q[..self.n] {
            let ci = 1.0 + qi * b;
            event_grad_b += qi / ci;
            event_curv_b += (qi / ci) * (qi / ci);
        }
        let d_alpha = n / a - self.s_of(b);
        let d_beta = event_grad_b - a * self.wq_sum;
        ScoreAndCurvature {
            gradient: [d_alpha, d_beta],
            hessian: [[-n / (a * a), -self.wq_sum], [-self.wq_sum, -event_curv_b]],
        }
    }
}

/// Path log-likelihood at (α', β').
pub fn log_likelihood(
    path: &ObservedPath,
    tp: &TransformedParams,
    x: &PriceResponse,
) -> Result<f64> {
    Ok(log_likelihood_parts(path, tp, x)?.total)
}

/// Event-term / compensator decomposition of the log-likelihood.
pub fn log_likelihood_parts(
    path: &ObservedPath,
    tp: &TransformedParams,
    x: &PriceResponse,
) -> Result<LikelihoodParts> {
    Ok(PathStats::new(path, x)?.parts(tp))
}

/// The per-interval density factor `f_i`: for `i < D` the density of the
/// (i+1)-st adoption time given the past, for `i = D` the survival factor
/// of the tail window. `Σ ln f_i` equals [`log_likelihood`].
pub fn factor_density(
    i: usize,
    path: &ObservedPath,
    tp: &TransformedParams,
    x: &PriceResponse,
) -> Result<f64> {
    let times = path.adoption_times();
    let n = times.len();
    if i > n {
        return Err(Error::IndexOutOfRange { i, n });
    }
    let price_path = path.price_path();
    let m = path.m();
    let xi_i = tp.xi(i as u64, m)?;
    let lo = if i == 0 { 0.0 } else { times[i - 1] };
    if i == n {
        let integral = price_path.integrate_x(x, lo, path.horizon())?;
        Ok((-xi_i * integral).exp())
    } else {
        let hi = times[i];
        let integral = price_path.integrate_x(x, lo, hi)?;
        let x_at_event = x.eval_checked(price_path.price_before(hi)?)?;
        Ok(xi_i * x_at_event * (-xi_i * integral).exp())
    }
}

/// Exact analytic gradient and Hessian of the log-likelihood in (α', β').
pub fn score_and_curvature(
    path: &ObservedPath,
    tp: &TransformedParams,
    x: &PriceResponse,
) -> Result<ScoreAndCurvature> {
    Ok(PathStats::new(path, x)?.score_and_curvature(tp))
}

/// The three sums of the closing Fisher-information sandwich, over
/// `d = 1..=n`:
///
/// ```text
/// Σ 1/(1+2β')²  ≤  Σ (1+d/m)²/(1+(1+d/m)β')²  ≤  Σ 4/(1+β')²
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherSandwich {
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
}

impl FisherSandwich {
    pub fn holds(&self) -> bool {
        self.lower <= self.exact && self.exact <= self.upper
    }
}

/// Evaluate the Fisher sandwich sums. The per-term inequality needs
/// `d/m ≤ 1`, i.e. `n ≤ m`, which the adoption process guarantees.
pub fn fisher_sandwich(n: u64, m: u64, beta_p: f64) -> Result<FisherSandwich> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(
            "fisher_sandwich requires n >= 1 and m >= 1".into(),
        ));
    }
    if !beta_p.is_finite() || beta_p <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "beta' must be finite and > 0, got {beta_p}"
        )));
    }
    let nf = n as f64;
    let mf = m as f64;
    let lower = nf / ((1.0 + 2.0 * beta_p) * (1.0 + 2.0 * beta_p));
    let upper = 4.0 * nf / ((1.0 + beta_p) * (1.0 + beta_p));
    let mut exact = 0.0;
    for d in 1..=n {
        let u = 1.0 + d as f64 / mf;
        let term = u / (1.0 + u * beta_p);
        exact += term * term;
    }
    Ok(FisherSandwich {
        lower,
        exact,
        upper,
    })
}

/// Perturbation direction for the Hellinger diagnostic: along the α' axis
/// or the β' axis, one coordinate at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AlphaP,
    BetaP,
}

/// Closed-form Hellinger quantities for one inter-adoption density under a
/// constant price, together with the proof's lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HellingerGap {
    /// `∫ (√f₁ − √f₂)² = 2 − 2·affinity`.
    pub hellinger_sq: f64,
    /// The proof's bound `δ²/(4√R·C_I)`.
    pub kl_bound: f64,
    /// `∫ √(f₁ f₂) = 2√(μ₁μ₂)/(μ₁+μ₂)` for exponential rates μ₁, μ₂.
    pub affinity: f64,
}

impl HellingerGap {
    /// The inequality the proof needs: `hellinger_sq ≥ kl_bound`.
    pub fn holds(&self) -> bool {
        self.hellinger_sq >= self.kl_bound
    }
}

/// Compare the waiting-time density at state `j` under `tp0` against the
/// density at `tp0 + δ·e` for a single-coordinate perturbation, under a
/// constant price `r` (both densities are then exponential, so the
/// Hellinger affinity is closed-form).
///
/// `delta_bar` is the proof's non-constructive deviation bound for the
/// chosen direction; it fixes both the admissible range
/// `δ ∈ [0, delta_bar · θ₀-component]` and the curvature constant `C_I`
/// (`(α'₀(1+δ̄₁))²` along α', `(1+β'₀(1+δ̄₂))²` along β'). `R` is the body
/// definition `1/(α'₀ + α'₀β'₀)`.
#[allow(clippy::too_many_arguments)]
pub fn hellinger_gap(
    j: u64,
    m: u64,
    tp0: &TransformedParams,
    delta: f64,
    direction: Direction,
    delta_bar: f64,
    price: f64,
    x: &PriceResponse,
) -> Result<HellingerGap> {
    if j >= m {
        return Err(Error::StateOutOfRange { j, m });
    }
    if !delta_bar.is_finite() || delta_bar <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "delta_bar must be finite and > 0, got {delta_bar}"
        )));
    }
    let component = match direction {
        Direction::AlphaP => tp0.alpha_p(),
        Direction::BetaP => tp0.beta_p(),
    };
    let max_delta = delta_bar * component;
    if !delta.is_finite() || delta < 0.0 || delta > max_delta {
        return Err(Error::DeltaOutOfRange {
            delta,
            max: max_delta,
        });
    }

    let x_val = x.eval_checked(price)?;
    let perturbed = match direction {
        Direction::AlphaP => TransformedParams::new(tp0.alpha_p() + delta, tp0.beta_p()),
        Direction::BetaP => TransformedParams::new(tp0.alpha_p(), tp0.beta_p() + delta),
    }?;
    let mu1 = tp0.xi(j, m)? * x_val;
    let mu2 = perturbed.xi(j, m)? * x_val;

    let affinity = 2.0 * (mu1 * mu2).sqrt() / (mu1 + mu2);
    let hellinger_sq = 2.0 - 2.0 * affinity;

    let r = 1.0 / (tp0.alpha_p() + tp0.alpha_p() * tp0.beta_p());
    let c_i = match direction {
        Direction::AlphaP => {
            let v = tp0.alpha_p() * (1.0 + delta_bar);
            v * v
        }
        Direction::BetaP => {
            let v = 1.0 + tp0.beta_p() * (1.0 + delta_bar);
            v * v
        }
    };
    let kl_bound = delta * delta / (4.0 * r.sqrt() * c_i);

    Ok(HellingerGap {
        hellinger_sq,
        kl_bound,
        affinity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarketParams;
    use crate::pricing::{ConstantPolicy, PricePath};
    use crate::simulator::{mix_seed, simulate, SimConfig, StopRule};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// m = 2, α' = β' = 1, x ≡ 1, one adoption at 0.5, horizon 1.
    fn worked_path() -> ObservedPath {
        ObservedPath::new(2, 1.0, vec![0.5], PricePath::constant(1.0, 1.0).unwrap()).unwrap()
    }

    fn unit_tp() -> TransformedParams {
        TransformedParams::new(1.0, 1.0).unwrap()
    }

    fn random_path(seed: u64, m: u64, horizon: f64) -> ObservedPath {
        let params = MarketParams::new(0.9, 0.4, m).unwrap();
        let policy = ConstantPolicy { price: 0.7 };
        simulate(&SimConfig {
            params,
            x: PriceResponse::Exponential,
            policy: &policy,
            stop: StopRule::Horizon(horizon),
            seed,
        })
        .unwrap()
    }

    #[test]
    fn worked_example_hand_value() {
        // ln 2 + ln 2 − 2·2·0.5 − 1·2.5·0.5 = ln 4 − 3.25
        let l = log_likelihood(&worked_path(), &unit_tp(), &PriceResponse::unit()).unwrap();
        let expected = 4.0f64.ln() - 3.25;
        assert_relative_eq!(l, expected, max_relative = 1e-12);
        assert_relative_eq!(l, -1.8637056388801094, max_relative = 1e-12);
    }

    #[test]
    fn zero_adoptions_only_tail_survives() {
        let m = 7u64;
        let t = 2.25;
        let path = ObservedPath::new(m, t, vec![], PricePath::constant(3.0, t).unwrap()).unwrap();
        let tp = TransformedParams::new(0.4, 0.9).unwrap();
        let l = log_likelihood(&path, &tp, &PriceResponse::unit()).unwrap();
        let expected = -(m as f64) * 0.4 * (1.0 + 0.9) * t;
        assert_relative_eq!(l, expected, max_relative = 1e-13);
    }

    #[test]
    fn parts_satisfy_invariants() {
        let parts =
            log_likelihood_parts(&worked_path(), &unit_tp(), &PriceResponse::unit()).unwrap();
        assert!(parts.compensator >= 0.0);
        assert_relative_eq!(
            parts.total,
            parts.event_terms - parts.compensator,
            max_relative = 1e-15
        );
        assert_relative_eq!(parts.compensator, 3.25, max_relative = 1e-15);
    }

    #[test]
    fn rejects_nonpositive_parameters_path_mismatch() {
        assert!(TransformedParams::new(-1.0, 1.0).is_err());
        // n > m cannot even be constructed as a path
        assert!(ObservedPath::new(
            1,
            1.0,
            vec![0.2, 0.4],
            PricePath::constant(1.0, 1.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn factor_density_hand_value() {
        // f₀ = ξ'(0)·x·e^{−ξ'(0)·0.5} with ξ'(0) = 2·1·2 = 4 → 4e^{−2}
        let f0 = factor_density(0, &worked_path(), &unit_tp(), &PriceResponse::unit()).unwrap();
        assert_relative_eq!(f0, 4.0 * (-2.0f64).exp(), max_relative = 1e-13);
        assert_relative_eq!(f0, 0.5413411329464508, max_relative = 1e-12);
    }

    #[test]
    fn survival_factor_is_one_with_empty_tail() {
        let path =
            ObservedPath::new(2, 0.5, vec![0.5], PricePath::constant(1.0, 0.5).unwrap()).unwrap();
        let f1 = factor_density(1, &path, &unit_tp(), &PriceResponse::unit()).unwrap();
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn factor_density_index_out_of_range() {
        assert!(matches!(
            factor_density(2, &worked_path(), &unit_tp(), &PriceResponse::unit()),
            Err(Error::IndexOutOfRange { i: 2, n: 1 })
        ));
    }

    #[test]
    fn loglik_equals_sum_of_log_factors() {
        let tp = TransformedParams::new(0.5, 1.5).unwrap();
        let x = PriceResponse::Exponential;
        for seed in 0..20 {
            let path = random_path(seed, 40, 0.6);
            let total = log_likelihood(&path, &tp, &x).unwrap();
            let mut sum = 0.0;
            for i in 0..=path.adoptions() as usize {
                sum += factor_density(i, &path, &tp, &x).unwrap().ln();
            }
            assert_relative_eq!(total, sum, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = PriceResponse::Exponential;
        let h = 1e-5;
        for seed in 0..10 {
            let path = random_path(seed, 30, 0.8);
            if path.adoptions() == 0 {
                continue;
            }
            let tp = TransformedParams::new(0.6, 1.2).unwrap();
            let sc = score_and_curvature(&path, &tp, &x).unwrap();
            for k in 0..2 {
                let shift = |d: f64| {
                    let (mut a, mut b) = (tp.alpha_p(), tp.beta_p());
                    if k == 0 {
                        a += d;
                    } else {
                        b += d;
                    }
                    log_likelihood(&path, &TransformedParams::new(a, b).unwrap(), &x).unwrap()
                };
                let fd = (shift(h) - shift(-h)) / (2.0 * h);
                let rel = (sc.gradient[k] - fd).abs() / fd.abs().max(1e-12);
                assert!(
                    rel < 1e-6,
                    "component {k}: analytic {} vs fd {fd} (rel {rel})",
                    sc.gradient[k]
                );
            }
        }
    }

    #[test]
    fn alpha_curvature_is_exact() {
        let path = random_path(3, 50, 0.7);
        let d = path.adoptions() as f64;
        assert!(d >= 1.0);
        let tp = TransformedParams::new(0.45, 0.8).unwrap();
        let sc = score_and_curvature(&path, &tp, &PriceResponse::Exponential).unwrap();
        assert_eq!(sc.hessian[0][0], -d / (0.45 * 0.45));
        assert!(sc.hessian[0][0] < 0.0);
        assert_eq!(sc.hessian[0][1], sc.hessian[1][0]);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let x = PriceResponse::unit();
        let path = random_path(11, 25, 0.5);
        let tp = TransformedParams::new(0.7, 0.9).unwrap();
        let sc = score_and_curvature(&path, &tp, &x).unwrap();
        let h = 1e-5;
        let grad = |a: f64, b: f64| {
            score_and_curvature(&path, &TransformedParams::new(a, b).unwrap(), &x)
                .unwrap()
                .gradient
        };
        let g_a_plus = grad(0.7 + h, 0.9);
        let g_a_minus = grad(0.7 - h, 0.9);
        let g_b_plus = grad(0.7, 0.9 + h);
        let g_b_minus = grad(0.7, 0.9 - h);
        let fd = [
            [
                (g_a_plus[0] - g_a_minus[0]) / (2.0 * h),
                (g_b_plus[0] - g_b_minus[0]) / (2.0 * h),
            ],
            [
                (g_a_plus[1] - g_a_minus[1]) / (2.0 * h),
                (g_b_plus[1] - g_b_minus[1]) / (2.0 * h),
            ],
        ];
        for (hess_row, fd_row) in sc.hessian.iter().zip(&fd) {
            for (a, b) in hess_row.iter().zip(fd_row) {
                assert_relative_eq!(a, b, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn loglik_concave_in_alpha_on_grid() {
        let path = random_path(8, 60, 0.5);
        assert!(path.adoptions() >= 1);
        let x = PriceResponse::Exponential;
        let values: Vec<f64> = (1..40)
            .map(|k| {
                let a = 0.05 * k as f64;
                log_likelihood(&path, &TransformedParams::new(a, 1.0).unwrap(), &x).unwrap()
            })
            .collect();
        for w in values.windows(3) {
            assert!(w[1] - w[0] > w[2] - w[1], "increments must decrease");
        }
    }

    #[test]
    fn fisher_sandwich_worked_triple() {
        // β' = 1, n = 10, m large: lower = 10/9, exact → 2.5, upper = 10.
        let s = fisher_sandwich(10, 1_000_000_000, 1.0).unwrap();
        assert_relative_eq!(s.lower, 10.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(s.upper, 10.0, max_relative = 1e-14);
        assert_relative_eq!(s.exact, 2.5, max_relative = 1e-7);
        assert!(s.holds());
    }

    #[test]
    fn fisher_sandwich_single_full_market_term() {
        // n = m = 1: d/m = 1, exact = 4/(1+2β')² = 4 × lower term.
        for beta_p in [0.25, 1.0, 3.0] {
            let s = fisher_sandwich(1, 1, beta_p).unwrap();
            assert_relative_eq!(s.exact, 4.0 * s.lower, max_relative = 1e-13);
            assert!(s.holds());
        }
    }

    #[test]
    fn fisher_sandwich_rejects_degenerate_input() {
        assert!(fisher_sandwich(0, 5, 1.0).is_err());
        assert!(fisher_sandwich(5, 5, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn fisher_sandwich_always_holds(
            m in 1u64..5000,
            nfrac in 0.0..1.0f64,
            beta_p in 1e-3..20.0f64,
        ) {
            let n = 1 + ((m - 1) as f64 * nfrac) as u64;
            let s = fisher_sandwich(n, m, beta_p).unwrap();
            prop_assert!(s.holds(), "violated at n={n}, m={m}, beta'={beta_p}: {s:?}");
        }

        #[test]
        fn affinity_dominated_by_exp_bound(
            j in 0u64..50,
            alpha_p in 0.05..3.0f64,
            beta_p in 0.05..3.0f64,
            frac in 0.0..1.0f64,
        ) {
            // the proof's e^{−x} ≥ 1 − x step: affinity ≤ exp(−H²/2)
            let tp = TransformedParams::new(alpha_p, beta_p).unwrap();
            let delta = frac * alpha_p; // delta_bar = 1
            let g = hellinger_gap(j, 60, &tp, delta, Direction::AlphaP, 1.0, 0.3,
                                  &PriceResponse::Exponential).unwrap();
            prop_assert!(g.affinity <= (-g.hellinger_sq / 2.0).exp() + 1e-15);
        }
    }

    #[test]
    fn hellinger_zero_delta_is_degenerate() {
        let tp = TransformedParams::new(0.2, 0.5).unwrap();
        let g = hellinger_gap(
            3,
            100,
            &tp,
            0.0,
            Direction::BetaP,
            1.0,
            1.0,
            &PriceResponse::unit(),
        )
        .unwrap();
        assert_eq!(g.hellinger_sq, 0.0);
        assert_eq!(g.kl_bound, 0.0);
        assert_eq!(g.affinity, 1.0);
    }

    #[test]
    fn hellinger_affinity_rate_ratio_two() {
        // μ₁ = 1, μ₂ = 2: affinity = 2√2/3, H² = 2 − 4√2/3.
        // Achieved at j = 0, m = 1, α' = 1, β' tiny... easier to verify the
        // closed form directly through a δ that doubles the rate: with
        // β' fixed, rate ∝ α', so δ = α' doubles it.
        let tp = TransformedParams::new(1.0, 1.0).unwrap();
        let m = 2u64;
        // normalize so μ₁ = 1: rate = (m−j)·α'(1+(1+j/m)β')·x = 2·2·x at j=0
        let x = PriceResponse::Constant(0.25);
        let g = hellinger_gap(0, m, &tp, 1.0, Direction::AlphaP, 1.0, 0.0, &x).unwrap();
        assert_relative_eq!(g.affinity, 2.0 * 2.0f64.sqrt() / 3.0, max_relative = 1e-14);
        assert_relative_eq!(g.affinity, 0.9428090415820634, max_relative = 1e-12);
        assert_relative_eq!(g.hellinger_sq, 0.11438191683587319, max_relative = 1e-11);
        assert!(g.holds());
    }

    #[test]
    fn hellinger_rejects_delta_outside_proof_range() {
        let tp = TransformedParams::new(0.2, 0.5).unwrap();
        let err = hellinger_gap(
            0,
            10,
            &tp,
            0.3,
            Direction::AlphaP,
            1.0,
            1.0,
            &PriceResponse::unit(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DeltaOutOfRange { .. }));
    }

    #[test]
    fn score_is_zero_mean_at_truth_small_scale() {
        // Cheap in-module version of the Monte Carlo score identity;
        // the full 10⁴-path run lives in the acceptance suite.
        let params = MarketParams::new(0.3, 0.1, 50).unwrap();
        let tp0 = params.to_transformed().unwrap();
        let policy = ConstantPolicy { price: 1.0 };
        let x = PriceResponse::unit();
        let n = 2000;
        let mut sums = [0.0f64; 2];
        let mut sqs = [0.0f64; 2];
        for rep in 0..n {
            let path = simulate(&SimConfig {
                params,
                x,
                policy: &policy,
                stop: StopRule::Horizon(0.5),
                seed: mix_seed(2024, rep),
            })
            .unwrap();
            let g = score_and_curvature(&path, &tp0, &x).unwrap().gradient;
            for k in 0..2 {
                sums[k] += g[k];
                sqs[k] += g[k] * g[k];
            }
        }
        for k in 0..2 {
            let mean = sums[k] / n as f64;
            let var = (sqs[k] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                mean.abs() <= 4.0 * se,
                "score component {k}: mean {mean} exceeds 4 SE {se}"
            );
        }
    }
}
