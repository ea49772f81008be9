//! Shared verification oracles: Kolmogorov–Smirnov machinery, an
//! independent thinning sampler and composite Simpson quadrature.
//! Everything here is deliberately implemented apart from the production
//! code paths it checks.
#![allow(dead_code)] // each test binary uses its own subset

use bass_mle::{PricePath, PriceResponse};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_one_sample_1pct(n: usize) -> f64 {
    1.62762 / (n as f64).sqrt()
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_two_sample_1pct(n1: usize, n2: usize) -> f64 {
    1.62762 * (((n1 + n2) as f64) / ((n1 * n2) as f64)).sqrt()
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &t) in samples.iter().enumerate() {
        let f = cdf(t);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// First event time of the counting process started in state with
/// price-free rate `xi0`, sampled by thinning (rejection) over `[0, T]`.
/// An independent oracle for the production inversion sampler.
pub fn thinning_first_event(
    xi0: f64,
    path: &PricePath,
    x: &PriceResponse,
    horizon: f64,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    let lambda_max = xi0
        * path
            .segments()
            .iter()
            .map(|s| x.eval(s.price))
            .fold(f64::MIN, f64::max);
    let mut t = 0.0;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / lambda_max;
        if t > horizon {
            return None;
        }
        let lambda_t = xi0 * x.eval(path.price_at(t).expect("in range"));
        let v: f64 = rng.random();
        if v <= lambda_t / lambda_max {
            return Some(t);
        }
    }
}

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 2 && panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Fresh deterministic generator for a test.
pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
