//! Running replicated cells and sweeps.

use rayon::prelude::*;
use tipsim::analytic::{predict, AnalyticPrediction, RegimeParams};
use tipsim::engine::{derive_seed, replicate_config, run, SimConfig, SimResult};
use tipsim::metrics::{aggregate, future_cone_orphanage_since, AggregateStats, MetricSummary, RunStats};
use tipsim::Result;

/// Parameters shared by every cell of an experiment. `delta` is in units
/// of `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub lambda: f64,
    pub h: f64,
    pub delta: Option<f64>,
    pub runs: usize,
    pub blocks: u64,
    pub warmup: f64,
    pub seed: u64,
}

impl Default for Setup {
    fn default() -> Self {
        Setup {
            lambda: 100.0,
            h: 1.0,
            delta: Some(100.0),
            runs: 10,
            blocks: 100_000,
            warmup: 0.2,
            seed: 0,
        }
    }
}

impl Setup {
    pub fn delta_time(&self) -> Option<f64> {
        self.delta.map(|d| d * self.h)
    }

    /// Simulation config for one cell; `seed` is the cell's base seed.
    pub fn sim_config(&self, mu: f64, k: u32, seed: u64) -> SimConfig {
        SimConfig {
            lambda: self.lambda,
            h: self.h,
            delta: self.delta_time(),
            mu,
            k,
            total_blocks: self.blocks,
            warmup_fraction: self.warmup,
            seed,
            record_series: false,
            keep_dag: false,
        }
    }

    pub fn regime(&self, mu: f64, k: u32) -> Result<RegimeParams> {
        RegimeParams::new(mu, k, self.h, self.lambda, self.delta_time())
    }
}

/// What to collect beyond the aggregate statistics.
#[derive(Debug, Clone, Copy, Default)]
pub struct Extras {
    /// Future-cone look-back in units of `h + Δ` (of `h` without expiration).
    pub tau_factor: Option<f64>,
    pub keep_series: bool,
    pub keep_dag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledRate {
    pub rate: f64,
    pub count: u64,
    pub eligible: u64,
}

#[derive(Debug)]
pub struct CellOutcome {
    pub mu: f64,
    pub k: u32,
    pub config: SimConfig,
    pub stats: AggregateStats,
    pub occupancy: MetricSummary,
    /// `λ` times the per-run mean tip time.
    pub little: Option<MetricSummary>,
    pub future_cone: Option<PooledRate>,
    pub prediction: AnalyticPrediction,
    pub empty_pool_events: u64,
    pub adversary_reanchors: u64,
    /// Run 0 with its series and DAG when requested.
    pub first_run: Option<SimResult>,
}

impl CellOutcome {
    /// A stationary mean exists unless the pool diverges.
    pub fn has_stationary_mean(&self) -> bool {
        self.config.delta.is_some() || self.prediction.tip_pool_no_expiration.is_some()
    }
}

struct RunOutput {
    stats: RunStats,
    occupancy: f64,
    future_cone: Option<(u64, u64)>,
    empty_pool_events: u64,
    adversary_reanchors: u64,
    full: Option<SimResult>,
}

fn future_cone_tau(config: &SimConfig, factor: f64) -> f64 {
    factor * (config.h + config.delta.unwrap_or(0.0))
}

fn run_one(config: &SimConfig, index: u64, extras: Extras) -> Result<RunOutput> {
    let first = index == 0;
    let mut cfg = replicate_config(config, index);
    cfg.keep_dag = extras.tau_factor.is_some() || (first && extras.keep_dag);
    cfg.record_series = first && extras.keep_series;
    let mut res = run(cfg)?;

    let future_cone = match (extras.tau_factor, &res.final_dag) {
        (Some(f), Some(dag)) => {
            let tau = future_cone_tau(&res.config, f);
            let since = res.config.warmup_end();
            future_cone_orphanage_since(&dag.store, &dag.pool, since, res.t_end, tau)
                .ok()
                .map(|fc| (fc.orphaned, fc.eligible))
        }
        _ => None,
    };
    if !(first && extras.keep_dag) {
        res.final_dag = None;
    }
    Ok(RunOutput {
        stats: RunStats::from(&res),
        occupancy: res.mean_occupancy,
        future_cone,
        empty_pool_events: res.empty_pool_events,
        adversary_reanchors: res.adversary_reanchors,
        full: (first && (extras.keep_dag || extras.keep_series)).then_some(res),
    })
}

/// Runs `runs` replicates of one cell in parallel on the current rayon pool.
pub fn run_cell(setup: &Setup, mu: f64, k: u32, seed: u64, extras: Extras) -> Result<CellOutcome> {
    let config = setup.sim_config(mu, k, seed);
    config.validate()?;
    let prediction = predict(&setup.regime(mu, k)?)?;
    if setup.runs < 1 {
        return Err(tipsim::Error::Config("runs must be ≥ 1".into()));
    }
    let mut outputs: Vec<RunOutput> = (0..setup.runs as u64)
        .into_par_iter()
        .map(|i| run_one(&config, i, extras))
        .collect::<Result<_>>()?;

    let run_stats: Vec<RunStats> = outputs.iter().map(|o| o.stats.clone()).collect();
    let stats = aggregate(&run_stats)?;
    let occupancy: Vec<f64> = outputs.iter().map(|o| o.occupancy).collect();
    let little: Vec<f64> = run_stats
        .iter()
        .filter_map(|s| s.mean_tip_time)
        .map(|t| t * setup.lambda)
        .collect();
    let future_cone = extras.tau_factor.and_then(|_| {
        let (orphaned, eligible) = outputs
            .iter()
            .filter_map(|o| o.future_cone)
            .fold((0, 0), |(a, b), (o, e)| (a + o, b + e));
        (eligible > 0).then(|| PooledRate {
            rate: orphaned as f64 / eligible as f64,
            count: orphaned,
            eligible,
        })
    });
    Ok(CellOutcome {
        mu,
        k,
        stats,
        occupancy: MetricSummary::from_values(&occupancy).expect("at least one run"),
        little: MetricSummary::from_values(&little),
        future_cone,
        prediction,
        empty_pool_events: outputs.iter().map(|o| o.empty_pool_events).sum(),
        adversary_reanchors: outputs.iter().map(|o| o.adversary_reanchors).sum(),
        first_run: outputs.first_mut().and_then(|o| o.full.take()),
        config,
    })
}

/// Grid of cells, ordered by `(k, mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub mu_values: Vec<f64>,
    pub k_values: Vec<u32>,
    pub setup: Setup,
}

impl SweepSpec {
    pub fn cells(&self) -> Vec<(f64, u32)> {
        let mut ks = self.k_values.clone();
        ks.sort_unstable();
        ks.dedup();
        let mut mus = self.mu_values.clone();
        mus.sort_by(f64::total_cmp);
        mus.dedup();
        ks.iter()
            .flat_map(|&k| mus.iter().map(move |&mu| (mu, k)))
            .collect()
    }
}

/// Cell `i` of the grid is seeded with `derive_seed(seed, i)`, so results do
/// not depend on how runs are scheduled.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CellOutcome>> {
    spec.cells()
        .into_iter()
        .enumerate()
        .map(|(i, (mu, k))| {
            let seed = derive_seed(spec.setup.seed, i as u64);
            run_cell(&spec.setup, mu, k, seed, Extras::default())
        })
        .collect()
}
