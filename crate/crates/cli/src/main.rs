use std::collections::hash_map::RandomState;
use std::fs::File;
use std::hash::BuildHasher;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use tipsim::analytic::predict;
use tipsim::dag::write_dump;
use tipsim_cli::args::*;
use tipsim_cli::report::{self, analytic_text, simulate_text, validation_table};
use tipsim_cli::{run_cell, run_sweep, validate, Extras, Setup, SweepSpec, Tolerances};

const DESK_RUNS: usize = 10;
const DESK_BLOCKS: u64 = 100_000;
const PAPER_RUNS: usize = 100;
const PAPER_BLOCKS: u64 = 300_000;

#[derive(Parser)]
#[command(name = "tipsim", version, about = "Tip-pool simulation and analytic model for DAG ledgers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replicated experiment and print a summary.
    Simulate(SimulateArgs),
    /// Run a (mu, k) grid and write one CSV row per cell.
    Sweep(SweepArgs),
    /// Print analytic predictions for a (mu, k) grid.
    Analytic(AnalyticArgs),
    /// Run a sweep and compare each cell to the analytic predictions.
    Validate(ValidateArgs),
}

// Aliases keep clap from treating these as optional or repeated values.
type Window = Option<f64>;
type MuList = Vec<f64>;
type KList = Vec<u32>;

#[derive(Args)]
struct Model {
    /// Issuance rate (blocks per unit time).
    #[arg(long, default_value = "100", value_parser = parse_positive)]
    lambda: f64,
    /// Propagation delay.
    #[arg(long, default_value = "1", value_parser = parse_positive)]
    h: f64,
    /// Expiration window in units of h, or `none`.
    #[arg(long, default_value = "100", value_parser = parse_delta)]
    delta: Window,
}

#[derive(Args)]
struct Grid {
    /// Single honest fraction (overrides --mu-grid).
    #[arg(long, value_parser = parse_mu)]
    mu: Option<f64>,
    /// Honest fractions as a:b:step.
    #[arg(long, value_parser = parse_mu_grid, default_value = "0:1:0.05")]
    mu_grid: MuList,
    /// Single k (overrides --k-list).
    #[arg(long, value_parser = parse_k)]
    k: Option<u32>,
    /// Comma-separated k values.
    #[arg(long, value_parser = parse_k_list, default_value = "1,2,3,4,5,6,7,8")]
    k_list: KList,
}

impl Grid {
    fn mus(&self) -> Vec<f64> {
        self.mu.map_or_else(|| self.mu_grid.clone(), |m| vec![m])
    }

    fn ks(&self) -> Vec<u32> {
        self.k.map_or_else(|| self.k_list.clone(), |k| vec![k])
    }
}

#[derive(Args)]
struct Run {
    /// Blocks per run [default: 100000, or 300000 with --paper-scale].
    #[arg(long)]
    blocks: Option<u64>,
    /// Replicates per cell [default: 10, or 100 with --paper-scale].
    #[arg(long)]
    runs: Option<usize>,
    /// Use 100 runs of 300000 blocks unless set explicitly.
    #[arg(long)]
    paper_scale: bool,
    /// Base seed; a random one is generated and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of the run discarded as warmup.
    #[arg(long, default_value = "0.2", value_parser = parse_warmup)]
    warmup: f64,
    /// Worker threads [default: all cores].
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "1", value_parser = parse_mu)]
    mu: f64,
    #[arg(long, default_value = "2", value_parser = parse_k)]
    k: u32,
    #[command(flatten)]
    model: Model,
    #[command(flatten)]
    run: Run,
    /// Future-cone look-back in units of h + delta.
    #[arg(long, default_value = "3", value_parser = parse_positive)]
    tau_factor: f64,
    /// Write run 0's tip-pool series as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write run 0's DAG as CSV.
    #[arg(long)]
    dump_dag: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    grid: Grid,
    #[command(flatten)]
    model: Model,
    #[command(flatten)]
    run: Run,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    grid: Grid,
    #[command(flatten)]
    model: Model,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    grid: Grid,
    #[command(flatten)]
    model: Model,
    #[command(flatten)]
    run: Run,
    /// Allowed relative error of the mean pool size (fraction or percent).
    #[arg(long, default_value = "10%", value_parser = parse_fraction)]
    pool_tolerance: f64,
    /// Allowed ratio between observed and predicted orphanage.
    #[arg(long, default_value = "2", value_parser = parse_factor)]
    orphanage_factor: f64,
    /// Also write the sweep CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn setup(model: &Model, run: Option<&Run>) -> Setup {
    let mut s = Setup {
        lambda: model.lambda,
        h: model.h,
        delta: model.delta,
        ..Setup::default()
    };
    if let Some(r) = run {
        let (runs, blocks) = if r.paper_scale {
            (PAPER_RUNS, PAPER_BLOCKS)
        } else {
            (DESK_RUNS, DESK_BLOCKS)
        };
        s.runs = r.runs.unwrap_or(runs);
        s.blocks = r.blocks.unwrap_or(blocks);
        s.warmup = r.warmup;
        s.seed = r.seed.unwrap_or_else(|| {
            let seed = RandomState::new().hash_one(SystemTime::now());
            eprintln!("generated seed {seed}");
            seed
        });
    }
    s
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> anyhow::Result<T> + Send,
) -> anyhow::Result<T> {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("building worker pool")?
            .install(f),
        None => f(),
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_csv(setup: &Setup, cells: &[tipsim_cli::CellOutcome], out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            report::write_sweep_csv(setup, cells, &mut w)?;
            w.flush()?;
        }
        None => report::write_sweep_csv(setup, cells, io::stdout().lock())?,
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let setup = setup(&a.model, Some(&a.run));
    let extras = Extras {
        tau_factor: Some(a.tau_factor),
        keep_series: a.out.is_some(),
        keep_dag: a.dump_dag.is_some(),
    };
    let cell = with_workers(a.run.workers, || {
        Ok(run_cell(&setup, a.mu, a.k, setup.seed, extras)?)
    })?;
    print!("{}", simulate_text(&setup, &cell));
    let first = cell.first_run.as_ref();
    if let (Some(path), Some(series)) = (&a.out, first.and_then(|r| r.series.as_ref())) {
        let mut w = create(path)?;
        report::write_series_csv(series, &mut w)?;
        w.flush()?;
    }
    if let (Some(path), Some(dag)) = (&a.dump_dag, first.and_then(|r| r.final_dag.as_ref())) {
        let mut w = create(path)?;
        write_dump(&dag.store, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn sweep_spec(grid: &Grid, model: &Model, run: &Run) -> SweepSpec {
    SweepSpec {
        mu_values: grid.mus(),
        k_values: grid.ks(),
        setup: setup(model, Some(run)),
    }
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let spec = sweep_spec(&a.grid, &a.model, &a.run);
    let cells = with_workers(a.run.workers, || Ok(run_sweep(&spec)?))?;
    write_csv(&spec.setup, &cells, a.out.as_deref())
}

fn analytic(a: AnalyticArgs) -> anyhow::Result<()> {
    let setup = setup(&a.model, None);
    let spec = SweepSpec {
        mu_values: a.grid.mus(),
        k_values: a.grid.ks(),
        setup,
    };
    let mut out = io::stdout().lock();
    for (i, (mu, k)) in spec.cells().into_iter().enumerate() {
        let p = predict(&spec.setup.regime(mu, k)?)?;
        if i > 0 {
            writeln!(out)?;
        }
        write!(out, "{}", analytic_text(mu, k, &spec.setup, &p))?;
    }
    Ok(())
}

fn validate_cmd(a: ValidateArgs) -> anyhow::Result<()> {
    let spec = sweep_spec(&a.grid, &a.model, &a.run);
    let cells = with_workers(a.run.workers, || Ok(run_sweep(&spec)?))?;
    if let Some(p) = &a.out {
        write_csv(&spec.setup, &cells, Some(p))?;
    }
    let tol = Tolerances {
        pool: a.pool_tolerance,
        orphanage_factor: a.orphanage_factor,
    };
    let checks = validate(&cells, tol);
    print!("{}", validation_table(&checks));
    let failed: Vec<_> = checks.iter().filter(|c| c.failed()).collect();
    if failed.is_empty() {
        println!("all {} cells pass", checks.len());
        return Ok(());
    }
    for c in &failed {
        eprintln!("failed: mu={} k={}", report::fmt_num(c.mu), c.k);
    }
    bail!("{} of {} cells failed", failed.len(), checks.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Analytic(a) => analytic(a),
        Command::Validate(a) => validate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // configuration problems are usage errors
            match e.downcast_ref::<tipsim::Error>() {
                Some(tipsim::Error::Config(_) | tipsim::Error::Domain(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
