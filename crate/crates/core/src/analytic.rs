//! Asymptotic (large-λ) predictions for the tip pool: stability class,
//! stationary size with and without expiration, and the probability that an
//! honest block expires.
//!
//! Lengths of time are in units of the network delay `h` unless stated
//! otherwise; `l0` is tips per unit issuance rate, so the pool holds about
//! `l0 * lambda` tips.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    pub mu: f64,
    pub k: u32,
    pub h: f64,
    pub lambda: f64,
    /// Expiration window; `None` disables expiration.
    pub delta: Option<f64>,
}

impl RegimeParams {
    pub fn new(mu: f64, k: u32, h: f64, lambda: f64, delta: Option<f64>) -> Result<Self> {
        let p = RegimeParams {
            mu,
            k,
            h,
            lambda,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::Config(format!("mu must be in [0, 1], got {}", self.mu)));
        }
        if self.k < 1 {
            return Err(Error::Config("k must be ≥ 1".into()));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("delta must be positive, got {d}")));
            }
        }
        Ok(())
    }

    /// `μk`, the honest references issued per block on average.
    pub fn honest_refs(&self) -> f64 {
        self.mu * self.k as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    /// `μk > 1`: negative drift for large pools, stationary.
    Stable,
    /// `μk ≤ 1`: without expiration the pool grows without bound.
    Unstable,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        }
    }
}

/// Stability class plus the lower bound `1 - μk` on the expected change of
/// the pool per issued block.
pub fn classify_stability(params: &RegimeParams) -> (Stability, f64) {
    let m = params.honest_refs();
    let class = if m > 1.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    (class, 1.0 - m)
}

/// `l0` without expiration: `h μk / (μk - 1)`, or `None` if unstable.
pub fn l0_no_expiration(params: &RegimeParams) -> Option<f64> {
    let m = params.honest_refs();
    (m > 1.0).then(|| params.h * m / (m - 1.0))
}

/// Stationary pool size without expiration, `μk/(μk-1) λ h`; `None` when
/// the pool diverges.
pub fn tip_pool_no_expiration(params: &RegimeParams) -> Option<f64> {
    l0_no_expiration(params).map(|l0| l0 * params.lambda)
}

/// Residual of the expiration fixed point,
/// `L (μk - 1 + exp(-Δμk / L)) - μk h`.
pub fn l0_residual(l: f64, mu_k: f64, h: f64, delta: f64) -> f64 {
    l * (mu_k - 1.0 + (-delta * mu_k / l).exp()) - mu_k * h
}

const MAX_BISECTIONS: usize = 200;
const REL_TOL: f64 = 1e-10;

/// Solves `L = μk h / (μk - 1 + exp(-Δμk / L))` for the tips-per-rate
/// constant with expiration window `Δ`.
///
/// The residual is negative near zero and positive for large `L`, and
/// `residual / L` is increasing, so the root is unique. Bisection runs until
/// the bracket cannot shrink further in floating point. With `μ = 0` every
/// tip lives exactly `h + Δ`.
pub fn solve_l0(params: &RegimeParams) -> Result<f64> {
    params.validate()?;
    let delta = params
        .delta
        .ok_or_else(|| Error::Domain("solve_l0 needs a finite expiration window".into()))?;
    let h = params.h;
    if params.mu == 0.0 {
        return Ok(h + delta);
    }
    let m = params.honest_refs();
    let f = |l: f64| l0_residual(l, m, h, delta);

    let mut lo = h * 1e-6;
    let mut hi = if m == 1.0 {
        2.0 * (h + delta)
    } else {
        (4.0 * h * m / (m - 1.0).abs()).max(2.0 * (h + delta))
    };
    while f(lo) > 0.0 {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::Numeric("lower bracket collapsed".into()));
        }
    }
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numeric("upper bracket diverged".into()));
        }
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = f(mid);
        if !value.is_finite() {
            return Err(Error::Numeric(format!("non-finite residual at L = {mid}")));
        }
        if value > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    if hi - lo > REL_TOL * root {
        return Err(Error::Numeric(format!(
            "bisection did not converge: [{lo}, {hi}]"
        )));
    }
    Ok(root)
}

/// Probability that a block expires, `exp(-Δμk / l0)`, plus the bound
/// `exp(-Δ(μk - 1)/h)` when `μk > 1`. Above the threshold the bound holds;
/// below it the bound exceeds one and is omitted.
pub fn expiration_probability(params: &RegimeParams) -> Result<(f64, Option<f64>)> {
    let l0 = solve_l0(params)?;
    Ok((
        expiration_probability_with_l0(params, l0),
        expiration_bound(params),
    ))
}

/// `exp(-Δμk / l0)` for a caller-supplied `l0`; `l0 = ∞` gives one.
pub fn expiration_probability_with_l0(params: &RegimeParams, l0: f64) -> f64 {
    let delta = params.delta.unwrap_or(f64::INFINITY);
    let m = params.honest_refs();
    if m == 0.0 {
        return 1.0;
    }
    (-delta * m / l0).exp()
}

fn expiration_bound(params: &RegimeParams) -> Option<f64> {
    let m = params.honest_refs();
    let delta = params.delta?;
    (m > 1.0).then(|| (-delta * (m - 1.0) / params.h).exp())
}

/// Probability that one honest block picks a given tip among `l` with `k`
/// draws: `1 - (1 - 1/l)^k`.
pub fn selection_probability(l: f64, k: u32) -> Result<f64> {
    if !(l >= 1.0) {
        return Err(Error::Domain(format!("pool size must be ≥ 1, got {l}")));
    }
    Ok(1.0 - (1.0 - 1.0 / l).powi(k as i32))
}

/// Every prediction for one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPrediction {
    pub stability: Stability,
    pub drift_lower_bound: f64,
    /// `l0` without expiration, `None` when unstable.
    pub l0_no_expiration: Option<f64>,
    pub tip_pool_no_expiration: Option<f64>,
    /// `l0` from the expiration fixed point, `None` without expiration.
    pub l0_per_lambda: Option<f64>,
    pub tip_pool_size: Option<f64>,
    pub expiration_probability: Option<f64>,
    pub expiration_upper_bound: Option<f64>,
    /// Expiration probability evaluated with the no-expiration `l0`. Where
    /// that pool diverges (`μk ≤ 1`) the limit is one.
    pub expiration_probability_no_expiration_l0: Option<f64>,
}

pub fn predict(params: &RegimeParams) -> Result<AnalyticPrediction> {
    params.validate()?;
    let (stability, drift_lower_bound) = classify_stability(params);
    let l0_noexp = l0_no_expiration(params);
    let mut pred = AnalyticPrediction {
        stability,
        drift_lower_bound,
        l0_no_expiration: l0_noexp,
        tip_pool_no_expiration: l0_noexp.map(|l| l * params.lambda),
        l0_per_lambda: None,
        tip_pool_size: None,
        expiration_probability: None,
        expiration_upper_bound: None,
        expiration_probability_no_expiration_l0: None,
    };
    if params.delta.is_some() {
        let l0 = solve_l0(params)?;
        pred.l0_per_lambda = Some(l0);
        pred.tip_pool_size = Some(l0 * params.lambda);
        pred.expiration_probability = Some(expiration_probability_with_l0(params, l0));
        pred.expiration_upper_bound = expiration_bound(params);
        pred.expiration_probability_no_expiration_l0 = Some(expiration_probability_with_l0(
            params,
            l0_noexp.unwrap_or(f64::INFINITY),
        ));
    }
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, k: u32, delta: Option<f64>) -> RegimeParams {
        RegimeParams::new(mu, k, 1.0, 100.0, delta).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn stability_classes() {
        assert_eq!(classify_stability(&params(1.0, 1, None)), (Stability::Unstable, 0.0));
        assert_eq!(classify_stability(&params(0.5, 2, None)), (Stability::Unstable, 0.0));
        assert_eq!(classify_stability(&params(0.75, 4, None)), (Stability::Stable, -2.0));
    }

    #[test]
    fn closed_form_pool() {
        assert!(close(tip_pool_no_expiration(&params(1.0, 2, None)).unwrap(), 200.0, 1e-12));
        assert!(close(tip_pool_no_expiration(&params(0.75, 4, None)).unwrap(), 150.0, 1e-12));
        assert_eq!(tip_pool_no_expiration(&params(0.5, 2, None)), None);
    }

    // Reference roots from an independent 40-digit bisection (mpmath).
    #[test]
    fn l0_matches_high_precision_oracle() {
        let cases = [
            (1.0, 2, 100.0, 2.0),
            (0.4, 2, 100.0, 52.101348523294559),
            (0.5, 2, 100.0, 29.536599054329338),
            (0.55, 2, 20.0, 7.3385503686612532),
            (0.6, 2, 100.0, 5.9999999381654058),
            (0.3, 2, 100.0, 67.100405678302651),
            (0.45, 2, 100.0, 42.632777107795003),
        ];
        for (mu, k, delta, expected) in cases {
            let got = solve_l0(&params(mu, k, Some(delta))).unwrap();
            assert!(close(got, expected, 1e-12), "mu={mu}: {got} vs {expected}");
        }
    }

    #[test]
    fn l0_limits() {
        assert_eq!(solve_l0(&params(0.0, 2, Some(100.0))).unwrap(), 101.0);
        let huge = solve_l0(&params(1.0, 2, Some(1e6))).unwrap();
        assert!(close(huge, 2.0, 1e-6));
        assert!(solve_l0(&params(1.0, 2, None)).is_err());
    }

    #[test]
    fn l0_at_threshold_is_finite() {
        let l = solve_l0(&params(0.5, 2, Some(100.0))).unwrap();
        assert!(l.is_finite() && l > 1.0);
    }

    #[test]
    fn expiration_probabilities() {
        let (p, bound) = expiration_probability(&params(1.0, 2, Some(100.0))).unwrap();
        assert!(close(p, 3.720075976020836e-44, 1e-9));
        assert!(close(bound.unwrap(), (-100.0f64).exp(), 1e-12));

        let (p, bound) = expiration_probability(&params(0.5, 2, Some(100.0))).unwrap();
        assert!(close(p, 0.033856301402900502, 1e-10));
        assert_eq!(bound, None);

        let (p, _) = expiration_probability(&params(0.0, 2, Some(100.0))).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn selection_probability_values() {
        assert_eq!(selection_probability(1.0, 5).unwrap(), 1.0);
        assert!(close(selection_probability(10.0, 1).unwrap(), 0.1, 1e-12));
        assert_eq!(selection_probability(2.0, 2).unwrap(), 0.75);
        assert!(selection_probability(0.5, 2).is_err());
    }

    #[test]
    fn prediction_bundles_everything() {
        let p = predict(&params(0.45, 2, Some(100.0))).unwrap();
        assert_eq!(p.stability, Stability::Unstable);
        assert_eq!(p.tip_pool_no_expiration, None);
        assert_eq!(p.expiration_probability_no_expiration_l0, Some(1.0));
        assert!(close(p.expiration_probability.unwrap(), 0.12111051780005771, 1e-9));

        let p = predict(&params(1.0, 2, None)).unwrap();
        assert_eq!(p.l0_per_lambda, None);
        assert_eq!(p.tip_pool_no_expiration, Some(200.0));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(RegimeParams::new(1.2, 2, 1.0, 100.0, None).is_err());
        assert!(RegimeParams::new(0.5, 0, 1.0, 100.0, None).is_err());
        assert!(RegimeParams::new(0.5, 2, 1.0, 100.0, Some(-1.0)).is_err());
        assert!(RegimeParams::new(0.5, 2, 0.0, 100.0, None).is_err());
    }
}
