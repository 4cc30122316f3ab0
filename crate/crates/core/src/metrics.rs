//! Per-run and cross-run statistics.

use crate::dag::{DagStore, Issuer, TipPool};
use crate::engine::{SimConfig, SimResult};
use crate::error::{Error, Result};

/// Running integral of a piecewise-constant signal from `start` onward.
#[derive(Debug, Clone)]
pub struct TimeAverage {
    start: f64,
    last_t: f64,
    last_v: f64,
    area: f64,
}

impl TimeAverage {
    /// Signal equal to `v0` from `t0`, integrated from `start`.
    pub fn new(start: f64, t0: f64, v0: f64) -> Self {
        TimeAverage {
            start,
            last_t: t0,
            last_v: v0,
            area: 0.0,
        }
    }

    fn accumulate(&mut self, t: f64) {
        let from = self.last_t.max(self.start);
        if t > from {
            self.area += self.last_v * (t - from);
        }
        self.last_t = self.last_t.max(t);
    }

    /// The signal takes value `v` from time `t` on.
    pub fn record(&mut self, t: f64, v: f64) {
        self.accumulate(t);
        self.last_v = v;
    }

    /// Mean over `[start, end]`; `None` if that window is empty.
    pub fn mean(&self, end: f64) -> Option<f64> {
        if end <= self.start {
            return None;
        }
        let mut acc = self.clone();
        acc.accumulate(end);
        Some(acc.area / (end - self.start))
    }
}

/// Exact mean of a step function over `[t0, t1]`. Sample `(t_i, v_i)` holds
/// from `t_i` until the next sample; the last one extends to `t1`.
pub fn time_weighted_mean(series: &[(f64, f64)], t0: f64, t1: f64) -> Result<f64> {
    if !(t0 < t1) {
        return Err(Error::Domain(format!("empty window [{t0}, {t1}]")));
    }
    match series.first() {
        Some(&(first, _)) if first <= t0 => {}
        _ => return Err(Error::Domain("series does not cover the window start".into())),
    }
    let mut area = 0.0;
    for (i, &(t, v)) in series.iter().enumerate() {
        let next = series.get(i + 1).map_or(t1, |s| s.0);
        let lo = t.max(t0);
        let hi = next.min(t1);
        if hi > lo {
            area += v * (hi - lo);
        }
    }
    Ok(area / (t1 - t0))
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Node-view pool split at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TipClasses {
    /// Issued within the last `h`.
    pub hidden: usize,
    /// Visible and not referenced by any block.
    pub real: usize,
    /// Visible but referenced by a block that is still hidden.
    pub false_tips: usize,
}

impl TipClasses {
    pub fn total(&self) -> usize {
        self.hidden + self.real + self.false_tips
    }
}

/// Classifies the pool's blocks at the pool's current time.
pub fn classify_tips(store: &DagStore, pool: &TipPool) -> TipClasses {
    let mut classes = TipClasses {
        hidden: pool.hidden_len(),
        ..TipClasses::default()
    };
    for &id in pool.visible() {
        match store.get(id).and_then(|b| b.approved_at) {
            Some(_) => classes.false_tips += 1,
            None => classes.real += 1,
        }
    }
    classes
}

/// Share of honest blocks in the censoring window that expired.
pub fn orphanage_rate(result: &SimResult) -> Result<(f64, u64)> {
    if result.config.delta.is_none() {
        return Err(Error::Undefined("expiration disabled".into()));
    }
    if result.honest_issued == 0 {
        return Err(Error::Undefined("no eligible honest blocks".into()));
    }
    Ok((
        result.honest_expired as f64 / result.honest_issued as f64,
        result.honest_issued,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FutureCone {
    pub rate: f64,
    pub orphaned: u64,
    pub eligible: u64,
}

/// Share of honest blocks issued at least `tau` before `t_end` that are not
/// in the past cone of the current tips or of any block issued in the last
/// `tau`.
///
/// Blocks counted as reachable may still lose their future cone later, so
/// this is a lower bound on future-cone orphanage.
pub fn future_cone_orphanage(
    store: &DagStore,
    pool: &TipPool,
    t_end: f64,
    tau: f64,
) -> Result<FutureCone> {
    future_cone_orphanage_since(store, pool, 0.0, t_end, tau)
}

/// [`future_cone_orphanage`] restricted to blocks issued at or after `since`.
pub fn future_cone_orphanage_since(
    store: &DagStore,
    pool: &TipPool,
    since: f64,
    t_end: f64,
    tau: f64,
) -> Result<FutureCone> {
    let cutoff = t_end - tau;
    let recent = store
        .blocks()
        .iter()
        .rev()
        .take_while(|b| b.issued_at > cutoff)
        .map(|b| b.id);
    let reachable = store.ancestor_mask(pool.current_tips().chain(recent));

    let mut eligible = 0u64;
    let mut orphaned = 0u64;
    for b in store.blocks() {
        if b.issued_at > cutoff {
            break;
        }
        if b.issuer != Issuer::Honest || b.issued_at < since {
            continue;
        }
        eligible += 1;
        if !reachable[b.id.index()] {
            orphaned += 1;
        }
    }
    if eligible == 0 {
        return Err(Error::Undefined("no eligible honest blocks".into()));
    }
    Ok(FutureCone {
        rate: orphaned as f64 / eligible as f64,
        orphaned,
        eligible,
    })
}

/// Summary of one run used for cross-run aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub config: SimConfig,
    pub mean_tip_pool: f64,
    pub q25: f64,
    pub q75: f64,
    pub growth_slope: Option<f64>,
    pub orphanage_rate: Option<f64>,
    pub honest_eligible: u64,
    pub honest_expired: u64,
    pub mean_tip_time: Option<f64>,
}

impl From<&SimResult> for RunStats {
    fn from(r: &SimResult) -> Self {
        RunStats {
            config: r.config.clone(),
            mean_tip_pool: r.mean_tip_pool,
            q25: r.q25,
            q75: r.q75,
            growth_slope: r.growth_slope,
            orphanage_rate: orphanage_rate(r).ok().map(|(rate, _)| rate),
            honest_eligible: r.honest_issued,
            honest_expired: r.honest_expired,
            mean_tip_time: r.mean_tip_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); zero for one value.
    pub stddev: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MetricSummary {
    /// Sorts before summing so the result does not depend on input order.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let stddev = if n > 1 {
            let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            sq.sort_by(f64::total_cmp);
            (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MetricSummary {
            mean,
            stddev,
            stderr: stddev / (n as f64).sqrt(),
            n,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub runs: usize,
    pub mean_tip_pool: MetricSummary,
    pub q25: MetricSummary,
    pub q75: MetricSummary,
    pub growth_slope: Option<MetricSummary>,
    /// Over runs with a defined rate.
    pub orphanage_rate: Option<MetricSummary>,
    /// Total expired over total eligible across runs.
    pub pooled_orphanage_rate: Option<f64>,
    pub honest_eligible: u64,
    pub honest_expired: u64,
}

pub fn aggregate(stats: &[RunStats]) -> Result<AggregateStats> {
    let first = stats
        .first()
        .ok_or_else(|| Error::Domain("nothing to aggregate".into()))?;
    if stats.iter().any(|s| !s.config.same_experiment(&first.config)) {
        return Err(Error::Config("cannot aggregate runs of different experiments".into()));
    }
    let collect = |f: &dyn Fn(&RunStats) -> Option<f64>| -> Vec<f64> {
        stats.iter().filter_map(f).filter(|v| v.is_finite()).collect()
    };
    let summary = |f: &dyn Fn(&RunStats) -> Option<f64>| MetricSummary::from_values(&collect(f));
    let nan = MetricSummary {
        mean: f64::NAN,
        stddev: f64::NAN,
        stderr: f64::NAN,
        n: 0,
    };
    let eligible: u64 = stats.iter().map(|s| s.honest_eligible).sum();
    let expired: u64 = stats.iter().map(|s| s.honest_expired).sum();
    Ok(AggregateStats {
        runs: stats.len(),
        mean_tip_pool: summary(&|s| Some(s.mean_tip_pool)).unwrap_or(nan),
        q25: summary(&|s| Some(s.q25)).unwrap_or(nan),
        q75: summary(&|s| Some(s.q75)).unwrap_or(nan),
        growth_slope: summary(&|s| s.growth_slope),
        orphanage_rate: summary(&|s| s.orphanage_rate),
        pooled_orphanage_rate: (first.config.delta.is_some() && eligible > 0)
            .then(|| expired as f64 / eligible as f64),
        honest_eligible: eligible,
        honest_expired: expired,
    })
}
