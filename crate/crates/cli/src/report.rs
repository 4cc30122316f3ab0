//! CSV output, validation and text summaries.

use std::fmt::Write as _;
use std::io::Write;

use tipsim::analytic::{AnalyticPrediction, Stability};

use crate::experiment::{CellOutcome, Setup};

pub const SWEEP_HEADER: [&str; 20] = [
    "mu",
    "k",
    "lambda",
    "h",
    "delta",
    "runs",
    "blocks",
    "mean_tip_pool",
    "stderr_tip_pool",
    "q25",
    "q75",
    "growth_slope",
    "orphanage_rate",
    "orphanage_stderr",
    "analytic_pool_noexp",
    "analytic_l0_exp",
    "analytic_pool_exp",
    "analytic_orphanage",
    "analytic_orphanage_noexp_l0",
    "stability",
];

pub const SERIES_HEADER: [&str; 2] = ["time", "tip_pool"];

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
/// Never depends on the locale.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn delta_field(delta: Option<f64>) -> String {
    delta.map(fmt_num).unwrap_or_else(|| "none".into())
}

pub fn sweep_row(setup: &Setup, cell: &CellOutcome) -> Vec<String> {
    let s = &cell.stats;
    let p = &cell.prediction;
    let stationary = cell.has_stationary_mean();
    let when = |x: f64| if stationary { fmt_num(x) } else { String::new() };
    vec![
        fmt_num(cell.mu),
        cell.k.to_string(),
        fmt_num(setup.lambda),
        fmt_num(setup.h),
        delta_field(setup.delta),
        s.runs.to_string(),
        setup.blocks.to_string(),
        when(s.mean_tip_pool.mean),
        when(s.mean_tip_pool.stderr),
        when(s.q25.mean),
        when(s.q75.mean),
        opt(s.growth_slope.map(|g| g.mean)),
        opt(s.pooled_orphanage_rate),
        opt(s.orphanage_rate.map(|o| o.stderr)),
        opt(p.tip_pool_no_expiration),
        opt(p.l0_per_lambda),
        opt(p.tip_pool_size),
        opt(p.expiration_probability),
        opt(p.expiration_probability_no_expiration_l0),
        p.stability.as_str().to_string(),
    ]
}

pub fn write_sweep_csv<W: Write>(setup: &Setup, cells: &[CellOutcome], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for cell in cells {
        w.write_record(sweep_row(setup, cell))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv<W: Write>(series: &[(f64, u32)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for &(t, l) in series {
        w.write_record([fmt_num(t), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed relative error of the mean pool size.
    pub pool: f64,
    /// Allowed ratio between observed and predicted orphanage, either way.
    pub orphanage_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pool: 0.10,
            orphanage_factor: 2.0,
        }
    }
}

/// Below this many expected expirations a ratio test is mostly noise.
pub const RARE_EXPECTED: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    Pass(String),
    Fail(String),
    Skip(String),
}

impl Check {
    pub fn failed(&self) -> bool {
        matches!(self, Check::Fail(_))
    }

    fn label(&self) -> &'static str {
        match self {
            Check::Pass(_) => "pass",
            Check::Fail(_) => "FAIL",
            Check::Skip(_) => "skip",
        }
    }

    fn detail(&self) -> &str {
        match self {
            Check::Pass(d) | Check::Fail(d) | Check::Skip(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellCheck {
    pub mu: f64,
    pub k: u32,
    pub pool: Check,
    pub orphanage: Check,
}

impl CellCheck {
    pub fn failed(&self) -> bool {
        self.pool.failed() || self.orphanage.failed()
    }
}

pub fn check_pool(cell: &CellOutcome, tol: f64) -> Check {
    let p = &cell.prediction;
    let expected = match (cell.config.delta, p.tip_pool_size, p.tip_pool_no_expiration) {
        (Some(_), Some(e), _) => e,
        (None, _, Some(e)) => e,
        _ => return Check::Skip("unstable, no stationary mean".into()),
    };
    let observed = cell.stats.mean_tip_pool.mean;
    let err = (observed - expected).abs() / expected;
    let detail = format!(
        "mean {} vs {} (rel. error {:.4}, tol {})",
        fmt_num(observed),
        fmt_num(expected),
        err,
        fmt_num(tol)
    );
    if err <= tol {
        Check::Pass(detail)
    } else {
        Check::Fail(detail)
    }
}

/// Ratio test on the pooled expiration rate. When fewer than
/// [`RARE_EXPECTED`] expirations are expected the observed count only has
/// to stay below `factor * RARE_EXPECTED`.
pub fn check_orphanage(cell: &CellOutcome, factor: f64) -> Check {
    let Some(expected_p) = cell.prediction.expiration_probability else {
        return Check::Skip("expiration disabled".into());
    };
    let s = &cell.stats;
    if cell.mu == 0.0 || s.honest_eligible == 0 {
        return Check::Skip("no eligible honest blocks".into());
    }
    let observed = s.honest_expired;
    let rate = observed as f64 / s.honest_eligible as f64;
    let expected = expected_p * s.honest_eligible as f64;
    if expected < RARE_EXPECTED {
        let limit = factor * RARE_EXPECTED;
        let detail = format!(
            "{observed} expired of {} (expected {:.3}, rare: limit {})",
            s.honest_eligible,
            expected,
            fmt_num(limit)
        );
        return if observed as f64 <= limit {
            Check::Pass(detail)
        } else {
            Check::Fail(detail)
        };
    }
    let ratio = rate / expected_p;
    let detail = format!(
        "rate {} vs {} (ratio {:.3}, factor {})",
        fmt_num(rate),
        fmt_num(expected_p),
        ratio,
        fmt_num(factor)
    );
    if ratio <= factor && ratio >= 1.0 / factor {
        Check::Pass(detail)
    } else {
        Check::Fail(detail)
    }
}

pub fn validate(cells: &[CellOutcome], tol: Tolerances) -> Vec<CellCheck> {
    cells
        .iter()
        .map(|c| CellCheck {
            mu: c.mu,
            k: c.k,
            pool: check_pool(c, tol.pool),
            orphanage: check_orphanage(c, tol.orphanage_factor),
        })
        .collect()
}

pub fn validation_table(checks: &[CellCheck]) -> String {
    let mut s = String::new();
    for c in checks {
        for (what, check) in [("pool", &c.pool), ("orphanage", &c.orphanage)] {
            let _ = writeln!(
                s,
                "mu={:<6} k={:<2} {:<10} {}  {}",
                fmt_num(c.mu),
                c.k,
                what,
                check.label(),
                check.detail()
            );
        }
    }
    s
}

fn line(s: &mut String, label: &str, value: impl std::fmt::Display) {
    let _ = writeln!(s, "{label:<34}{value}");
}

fn summary_text(m: &tipsim::metrics::MetricSummary) -> String {
    format!("{} ± {} (stderr)", fmt_num(m.mean), fmt_num(m.stderr))
}

pub fn analytic_text(mu: f64, k: u32, setup: &Setup, p: &AnalyticPrediction) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "mu {}  k {}  lambda {}  h {}  delta {}",
        fmt_num(mu),
        k,
        fmt_num(setup.lambda),
        fmt_num(setup.h),
        delta_field(setup.delta)
    );
    let class = match p.stability {
        Stability::Stable => "Stable",
        Stability::Unstable => "Unstable",
    };
    line(&mut s, "stability", format!("{class} (mu*k = {})", fmt_num(mu * k as f64)));
    line(&mut s, "drift lower bound", fmt_num(p.drift_lower_bound));
    let or_inf = |x: Option<f64>| x.map(fmt_num).unwrap_or_else(|| "inf".into());
    line(&mut s, "L0 without expiration", or_inf(p.l0_no_expiration));
    line(&mut s, "tip pool without expiration", or_inf(p.tip_pool_no_expiration));
    if setup.delta.is_some() {
        line(&mut s, "L0 with expiration", opt(p.l0_per_lambda));
        line(&mut s, "tip pool with expiration", opt(p.tip_pool_size));
        line(&mut s, "orphanage probability", opt(p.expiration_probability));
        line(
            &mut s,
            "orphanage bound",
            p.expiration_upper_bound.map(fmt_num).unwrap_or_else(|| "n/a".into()),
        );
        line(
            &mut s,
            "orphanage with no-expiration L0",
            opt(p.expiration_probability_no_expiration_l0),
        );
    }
    s
}

pub fn simulate_text(setup: &Setup, cell: &CellOutcome) -> String {
    let mut s = String::new();
    let st = &cell.stats;
    let _ = writeln!(
        s,
        "mu {}  k {}  lambda {}  h {}  delta {}  runs {}  blocks {}  seed {}",
        fmt_num(cell.mu),
        cell.k,
        fmt_num(setup.lambda),
        fmt_num(setup.h),
        delta_field(setup.delta),
        st.runs,
        setup.blocks,
        setup.seed
    );
    if cell.has_stationary_mean() {
        line(&mut s, "mean tip pool", summary_text(&st.mean_tip_pool));
        line(
            &mut s,
            "quartiles",
            format!("{} / {}", fmt_num(st.q25.mean), fmt_num(st.q75.mean)),
        );
    } else {
        line(&mut s, "mean tip pool", "none (unstable, pool grows without bound)");
    }
    if let Some(g) = &st.growth_slope {
        line(&mut s, "growth slope (tips per unit time)", summary_text(g));
    }
    line(&mut s, "mean pool occupancy", summary_text(&cell.occupancy));
    if let Some(l) = &cell.little {
        line(&mut s, "lambda * mean tip time", summary_text(l));
    }
    if let Some(rate) = st.pooled_orphanage_rate {
        line(
            &mut s,
            "orphanage (expired)",
            format!("{} ({} of {})", fmt_num(rate), st.honest_expired, st.honest_eligible),
        );
    }
    if let Some(fc) = &cell.future_cone {
        line(
            &mut s,
            "future-cone orphanage",
            format!("{} ({} of {})", fmt_num(fc.rate), fc.count, fc.eligible),
        );
    }
    if cell.empty_pool_events > 0 {
        line(&mut s, "empty pool events", cell.empty_pool_events);
    }
    if cell.adversary_reanchors > 0 {
        line(&mut s, "adversary re-anchors", cell.adversary_reanchors);
    }
    s.push_str("analytic\n");
    for l in analytic_text(cell.mu, cell.k, setup, &cell.prediction).lines().skip(1) {
        let _ = writeln!(s, "  {l}");
    }
    s
}
