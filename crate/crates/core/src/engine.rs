//! Continuous-time event loop: Poisson arrivals at rate `lambda`, a
//! Bernoulli(`mu`) coin per block for the issuer, visibility after `h`, and
//! expiration after `delta`.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp};
use rand_pcg::Pcg64;
use rayon::prelude::*;

use crate::dag::{insert_block, Block, BlockId, DagStore, Issuer, RemovalCause, TipPool};
use crate::error::{Error, Result};
use crate::metrics::{ols_slope, quantile_sorted, TimeAverage};
use crate::selection::{select_adversary, select_honest, select_recent, AdversaryState};

/// Full parameterization of one run. Times are in units of `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Blocks per unit time.
    pub lambda: f64,
    pub h: f64,
    /// Expiration window, `None` to disable.
    pub delta: Option<f64>,
    pub mu: f64,
    pub k: u32,
    pub total_blocks: u64,
    /// Fraction of the nominal run duration discarded before measuring.
    pub warmup_fraction: f64,
    pub seed: u64,
    pub record_series: bool,
    pub keep_dag: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            lambda: 100.0,
            h: 1.0,
            delta: Some(100.0),
            mu: 1.0,
            k: 2,
            total_blocks: 300_000,
            warmup_fraction: 0.2,
            seed: 0,
            record_series: false,
            keep_dag: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("delta must be positive, got {d}")));
            }
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::Config(format!("mu must be in [0, 1], got {}", self.mu)));
        }
        if self.k < 1 {
            return Err(Error::Config("k must be ≥ 1".into()));
        }
        if self.total_blocks < 1 {
            return Err(Error::Config("total_blocks must be ≥ 1".into()));
        }
        if self.total_blocks >= u32::MAX as u64 {
            return Err(Error::Config("total_blocks exceeds the block id range".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!(
                "warmup must be in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }

    /// Nominal duration `total_blocks / lambda`.
    pub fn duration(&self) -> f64 {
        self.total_blocks as f64 / self.lambda
    }

    pub fn warmup_end(&self) -> f64 {
        self.warmup_fraction * self.duration()
    }

    /// Blocks issued within this long before the end of a run may still
    /// change fate, so they are left out of per-block rates. Without
    /// expiration a tenth of the run is held back.
    pub fn censor_margin(&self) -> f64 {
        match self.delta {
            Some(d) => self.h + d,
            None => 0.1 * self.duration(),
        }
    }

    /// Parent-age bound for validity: a tip leaves the pool at most `delta`
    /// after it became visible, `h` after issuance.
    pub fn max_parent_age(&self) -> Option<f64> {
        self.delta.map(|d| d + self.h)
    }

    /// Same experiment up to the seed.
    pub fn same_experiment(&self, other: &SimConfig) -> bool {
        SimConfig {
            seed: 0,
            record_series: false,
            keep_dag: false,
            ..self.clone()
        } == SimConfig {
            seed: 0,
            record_series: false,
            keep_dag: false,
            ..other.clone()
        }
    }
}

/// Seed of replicate `index`: the `(index + 1)`-th output of a SplitMix64
/// sequence started at `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Store and pool at the end of a run.
#[derive(Debug, Clone)]
pub struct FinalDag {
    pub store: DagStore,
    pub pool: TipPool,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub config: SimConfig,
    /// Time of the last arrival.
    pub t_end: f64,
    pub window_start: f64,
    /// Time-weighted mean of the tip count over `[window_start, t_end]`;
    /// NaN if the window is empty.
    pub mean_tip_pool: f64,
    /// Time-weighted mean of `|visible| + |hidden|` over the same window.
    pub mean_occupancy: f64,
    /// Quantiles of the tip count sampled right after each arrival in the
    /// window (linear interpolation between order statistics).
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub samples: usize,
    /// Least-squares slope of the sampled tip count against time.
    pub growth_slope: Option<f64>,
    /// Honest blocks issued in `[window_start, t_end - censor_margin]`.
    pub honest_issued: u64,
    /// Of those, how many expired.
    pub honest_expired: u64,
    pub adversary_issued: u64,
    pub empty_pool_events: u64,
    pub adversary_reanchors: u64,
    /// Mean tip time of blocks issued in the censoring window whose tip time
    /// ended; `tip_time_open` counts blocks still unapproved at the end.
    pub mean_tip_time: Option<f64>,
    pub tip_time_samples: u64,
    pub tip_time_open: u64,
    /// `(time, tip count)` at every change, from `t = 0`.
    pub series: Option<Vec<(f64, u32)>>,
    pub final_dag: Option<FinalDag>,
}

/// Read-only view handed to observers after each arrival.
pub struct ArrivalView<'a> {
    pub store: &'a DagStore,
    pub pool: &'a TipPool,
    pub time: f64,
    pub id: BlockId,
    pub issuer: Issuer,
}

/// One run, steppable block by block.
pub struct Simulation {
    config: SimConfig,
    rng: Pcg64,
    inter_arrival: Exp<f64>,
    store: DagStore,
    pool: TipPool,
    adversary: AdversaryState,
    now: f64,
    issued: u64,
    warmup_end: f64,
    tips: u32,
    tip_avg: TimeAverage,
    occupancy_avg: TimeAverage,
    sample_t: Vec<f64>,
    sample_l: Vec<f64>,
    series: Option<Vec<(f64, u32)>>,
    empty_pool_events: u64,
    adversary_reanchors: u64,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let inter_arrival = Exp::new(config.lambda)
            .map_err(|e| Error::Config(format!("arrival rate: {e}")))?;
        let warmup_end = config.warmup_end();
        let series = config.record_series.then(|| vec![(0.0, 1)]);
        Ok(Simulation {
            rng: Pcg64::seed_from_u64(config.seed),
            inter_arrival,
            store: DagStore::new(),
            pool: TipPool::new(config.h, config.delta),
            adversary: AdversaryState::new(),
            now: 0.0,
            issued: 0,
            warmup_end,
            tips: 1,
            tip_avg: TimeAverage::new(warmup_end, 0.0, 1.0),
            occupancy_avg: TimeAverage::new(warmup_end, 0.0, 1.0),
            sample_t: Vec::new(),
            sample_l: Vec::new(),
            series,
            empty_pool_events: 0,
            adversary_reanchors: 0,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn store(&self) -> &DagStore {
        &self.store
    }

    pub fn pool(&self) -> &TipPool {
        &self.pool
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn issued(&self) -> u64 {
        self.issued
    }

    pub fn is_done(&self) -> bool {
        self.issued >= self.config.total_blocks
    }

    fn set_tips(&mut self, t: f64, tips: u32) {
        if tips != self.tips {
            self.tips = tips;
            self.tip_avg.record(t, tips as f64);
            if let Some(series) = self.series.as_mut() {
                series.push((t, tips));
            }
        }
    }

    /// Issues the next block. Returns `None` once `total_blocks` are out.
    pub fn step(&mut self) -> Result<Option<ArrivalView<'_>>> {
        if self.is_done() {
            return Ok(None);
        }
        let t = self.now + self.inter_arrival.sample(&mut self.rng);

        // (1) visibility, referenced-removals and expirations up to t
        let mut occupancy = self.pool.occupancy();
        let removals = self.pool.advance_time(&mut self.store, t)?;
        for r in &removals {
            self.adversary.observe_removal(r);
            if r.cause == RemovalCause::Expired {
                let block = self.store.get(r.id).expect("removed block exists");
                if block.approved_at.is_none() {
                    self.set_tips(r.at, self.tips - 1);
                }
            }
            occupancy -= 1;
            self.occupancy_avg.record(r.at, occupancy as f64);
        }
        debug_assert_eq!(self.tips as usize, self.pool.tip_count());
        self.now = t;

        // (2) issuer coin, (3) parents
        let k = self.config.k as usize;
        let id = self.store.next_id();
        let (issuer, selection) = if self.rng.gen_bool(self.config.mu) {
            let parents = match select_honest(self.pool.visible(), k, &mut self.rng) {
                Ok(p) => p,
                Err(Error::EmptyTipPool) => {
                    self.empty_pool_events += 1;
                    select_recent(&self.store, k)
                }
                Err(e) => return Err(e),
            };
            (Issuer::Honest, parents)
        } else {
            let choice = select_adversary(
                &self.adversary,
                &self.store,
                k,
                t,
                self.config.max_parent_age(),
            );
            if choice.reanchored {
                self.adversary_reanchors += 1;
            }
            self.adversary.record_issued(id);
            (Issuer::Adversary, choice.parents)
        };

        // (4) insert
        let block = Block::new(id, t, self.config.h, selection, issuer);
        insert_block(&mut self.store, &mut self.pool, block)?;
        self.issued += 1;

        let tips = self.pool.tip_count() as u32;
        self.set_tips(t, tips);
        self.occupancy_avg.record(t, self.pool.occupancy() as f64);
        if t >= self.warmup_end {
            self.sample_t.push(t);
            self.sample_l.push(tips as f64);
        }

        Ok(Some(ArrivalView {
            store: &self.store,
            pool: &self.pool,
            time: t,
            id,
            issuer,
        }))
    }

    pub fn finish(self) -> SimResult {
        let cfg = &self.config;
        let t_end = self.now;
        let window_start = self.warmup_end;
        let mean_tip_pool = self.tip_avg.mean(t_end).unwrap_or(f64::NAN);
        let mean_occupancy = self.occupancy_avg.mean(t_end).unwrap_or(f64::NAN);

        let mut sorted = self.sample_l.clone();
        sorted.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&sorted, p).unwrap_or(f64::NAN);
        let growth_slope = ols_slope(&self.sample_t, &self.sample_l);

        let censor_end = t_end - cfg.censor_margin();
        let mut honest_issued = 0;
        let mut honest_expired = 0;
        let mut adversary_issued = 0;
        let mut tip_time_sum = 0.0;
        let mut tip_time_samples = 0;
        let mut tip_time_open = 0;
        for b in self.store.blocks().iter().skip(1) {
            if b.issued_at < window_start {
                continue;
            }
            if b.issued_at > censor_end {
                break;
            }
            match b.issuer {
                Issuer::Honest => {
                    honest_issued += 1;
                    if b.expired() {
                        honest_expired += 1;
                    }
                }
                Issuer::Adversary => adversary_issued += 1,
                Issuer::Genesis => {}
            }
            match b.tip_time() {
                Some(tau) => {
                    tip_time_sum += tau;
                    tip_time_samples += 1;
                }
                None => tip_time_open += 1,
            }
        }

        SimResult {
            config: self.config.clone(),
            t_end,
            window_start,
            mean_tip_pool,
            mean_occupancy,
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            samples: sorted.len(),
            growth_slope,
            honest_issued,
            honest_expired,
            adversary_issued,
            empty_pool_events: self.empty_pool_events,
            adversary_reanchors: self.adversary_reanchors,
            mean_tip_time: (tip_time_samples > 0).then(|| tip_time_sum / tip_time_samples as f64),
            tip_time_samples,
            tip_time_open,
            series: self.series,
            final_dag: self.config.keep_dag.then(|| FinalDag {
                store: self.store,
                pool: self.pool,
            }),
        }
    }
}

pub fn run(config: SimConfig) -> Result<SimResult> {
    run_with(config, |_| {})
}

/// Runs to completion, calling `observer` after every arrival.
pub fn run_with<F>(config: SimConfig, mut observer: F) -> Result<SimResult>
where
    F: FnMut(&ArrivalView<'_>),
{
    let mut sim = Simulation::new(config)?;
    while let Some(view) = sim.step()? {
        observer(&view);
    }
    Ok(sim.finish())
}

/// Config of replicate `index`.
pub fn replicate_config(config: &SimConfig, index: u64) -> SimConfig {
    SimConfig {
        seed: derive_seed(config.seed, index),
        ..config.clone()
    }
}

/// `runs` independent replicates on the global rayon pool, in index order.
pub fn run_replicated(config: &SimConfig, runs: usize) -> Result<Vec<SimResult>> {
    if runs < 1 {
        return Err(Error::Config("runs must be ≥ 1".into()));
    }
    config.validate()?;
    (0..runs as u64)
        .into_par_iter()
        .map(|i| run(replicate_config(config, i)))
        .collect()
}

/// Same as [`run_replicated`] on a dedicated pool of `workers` threads.
pub fn run_replicated_with_workers(
    config: &SimConfig,
    runs: usize,
    workers: usize,
) -> Result<Vec<SimResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_replicated(config, runs))
}
