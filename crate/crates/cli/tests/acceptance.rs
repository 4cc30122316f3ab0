//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::process::{Command, ExitCode, Stdio};

use tipsim::analytic::{l0_no_expiration, predict, solve_l0, RegimeParams};
use tipsim::engine::{run_with, SimConfig};
use tipsim::metrics::classify_tips;
use tipsim_cli::report::sweep_row;
use tipsim_cli::{run_cell, CellOutcome, Extras, Setup};

type Outcome = Result<String, String>;

fn setup(delta: Option<f64>, runs: usize, blocks: u64, seed: u64) -> Setup {
    Setup {
        lambda: 100.0,
        h: 1.0,
        delta,
        runs,
        blocks,
        warmup: 0.2,
        seed,
    }
}

fn cell(s: &Setup, mu: f64, k: u32, extras: Extras) -> Result<CellOutcome, String> {
    run_cell(s, mu, k, s.seed, extras).map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn within(label: &str, observed: f64, expected: f64, tol: f64) -> (bool, String) {
    let r = rel(observed, expected);
    (r <= tol, format!("{label}: {observed:.3} vs {expected:.3} (rel {r:.4} ≤ {tol})"))
}

fn verdict(parts: Vec<(bool, String)>) -> Outcome {
    let ok = parts.iter().all(|p| p.0);
    let text = parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn criterion_1_and_7() -> (Outcome, Outcome) {
    let c = match cell(&setup(None, 10, 100_000, 101), 1.0, 2, Extras::default()) {
        Ok(c) => c,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let mean = c.stats.mean_tip_pool.mean;
    let c1 = verdict(vec![within("pooled mean", mean, 200.0, 0.05)]);
    let c7 = match &c.little {
        Some(l) => verdict(vec![within("lambda * mean tip time", l.mean, mean, 0.03)]),
        None => Err("no tip times recorded".into()),
    };
    (c1, c7)
}

fn criterion_2() -> Outcome {
    let s = setup(None, 10, 100_000, 202);
    let mut parts = Vec::new();
    for (mu, expected) in [(0.5, 200.0), (0.75, 150.0)] {
        let c = cell(&s, mu, 4, Extras::default())?;
        parts.push(within(&format!("mu={mu} k=4"), c.stats.mean_tip_pool.mean, expected, 0.05));
    }
    verdict(parts)
}

fn criterion_3() -> Outcome {
    let s = setup(None, 10, 200_000, 303);
    let c = cell(&s, 0.3, 2, Extras::default())?;
    let slope = c.stats.growth_slope.ok_or("no slope")?.mean;
    let row = sweep_row(&s, &c);
    let no_mean = !c.has_stationary_mean() && row[7].is_empty();
    verdict(vec![
        (slope > 0.0, format!("slope {slope:.3} > 0")),
        within("slope", slope, 40.0, 0.25),
        (no_mean, format!("mean column '{}' empty", row[7])),
    ])
}

fn criterion_4() -> Outcome {
    let s = setup(Some(100.0), 10, 100_000, 404);
    let mut parts = Vec::new();
    for mu in [0.6, 0.8, 1.0] {
        let c = cell(&s, mu, 2, Extras::default())?;
        let expected = c.prediction.tip_pool_size.ok_or("no prediction")?;
        parts.push(within(&format!("mu={mu}"), c.stats.mean_tip_pool.mean, expected, 0.10));
    }
    verdict(parts)
}

fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    for (mu, delta, seed) in [(0.5, 100.0, 505), (0.55, 20.0, 506)] {
        let c = cell(&setup(Some(delta), 10, 100_000, seed), mu, 2, Extras::default())?;
        let observed = c.stats.pooled_orphanage_rate.ok_or("no orphanage rate")?;
        let expected = c.prediction.expiration_probability.ok_or("no prediction")?;
        let ratio = observed / expected;
        parts.push((
            (0.5..=2.0).contains(&ratio),
            format!("mu={mu} delta={delta}: {observed:.4} vs {expected:.4} (ratio {ratio:.3})"),
        ));
    }
    let c = cell(&setup(Some(100.0), 15, 100_000, 507), 1.0, 2, Extras::default())?;
    let (expired, eligible) = (c.stats.honest_expired, c.stats.honest_eligible);
    parts.push((
        expired == 0 && eligible >= 1_000_000,
        format!("mu=1 delta=100: {expired} expired of {eligible} honest"),
    ));
    verdict(parts)
}

fn criterion_6() -> Outcome {
    let mut worst_residual: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    for delta in [10.0, 100.0, 1000.0] {
        for k in 1..=8u32 {
            for i in 1..=20 {
                let mu = i as f64 * 0.05;
                let p = RegimeParams::new(mu, k, 1.0, 100.0, Some(delta)).unwrap();
                let l = solve_l0(&p).map_err(|e| e.to_string())?;
                let m = mu * k as f64;
                let rhs = m / (m - 1.0 + (-delta * m / l).exp());
                worst_residual = worst_residual.max(rel(l, rhs));
            }
        }
    }
    for k in 1..=8u32 {
        for i in 1..=20 {
            let mu = i as f64 * 0.05;
            let p = RegimeParams::new(mu, k, 1.0, 100.0, Some(1e6)).unwrap();
            if let Some(closed) = l0_no_expiration(&p) {
                let l = solve_l0(&p).map_err(|e| e.to_string())?;
                worst_closed = worst_closed.max(rel(l, closed));
            }
        }
    }
    let mut zero_ok = true;
    for k in 1..=8u32 {
        for delta in [10.0, 100.0, 1000.0] {
            let p = RegimeParams::new(0.0, k, 1.0, 100.0, Some(delta)).unwrap();
            zero_ok &= solve_l0(&p).map_err(|e| e.to_string())? == 1.0 + delta;
        }
    }
    verdict(vec![
        (worst_residual < 1e-9, format!("max fixed-point residual {worst_residual:.2e}")),
        (worst_closed < 1e-6, format!("max deviation at delta=1e6 {worst_closed:.2e}")),
        (zero_ok, "mu=0 gives h+delta exactly".into()),
    ])
}

fn run_binary(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = std::env::temp_dir().join(format!("tipsim-acceptance-{}.csv", std::process::id()));
    let status = Command::new(env!("CARGO_BIN_EXE_tipsim"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("{args:?} exited with {status}"));
    }
    let bytes = fs::read(&out).map_err(|e| e.to_string())?;
    let _ = fs::remove_file(&out);
    Ok(bytes)
}

fn criterion_8() -> Outcome {
    let mut parts = Vec::new();
    let commands: [&[&str]; 3] = [
        &[
            "sweep", "--mu-grid", "0.4:1:0.3", "--k-list", "2,4", "--delta", "50", "--blocks",
            "20000", "--runs", "4", "--seed", "808",
        ],
        &[
            "validate", "--mu", "0.8", "--k", "2", "--blocks", "20000", "--runs", "4", "--seed",
            "809",
        ],
        &[
            "simulate", "--mu", "0.7", "--k", "3", "--delta", "none", "--blocks", "20000",
            "--runs", "3", "--seed", "810",
        ],
    ];
    for args in commands {
        let a = run_binary(args)?;
        let b = run_binary(args)?;
        parts.push((a == b && !a.is_empty(), format!("{} byte-identical", args[0])));
    }

    let s = setup(Some(100.0), 8, 50_000, 811);
    let on = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let c = pool.install(|| cell(&s, 0.7, 2, Extras::default()))?;
        Ok(format!("{:?} {:?} {:?}", c.stats, c.occupancy, c.little))
    };
    parts.push((on(1)? == on(8)?, "1 vs 8 workers identical aggregates".into()));
    verdict(parts)
}

fn criterion_9() -> Outcome {
    let config = SimConfig {
        mu: 0.7,
        k: 2,
        delta: Some(100.0),
        total_blocks: 100_000,
        seed: 909,
        ..SimConfig::default()
    };
    let mut samples = 0u64;
    let mut mismatches = 0u64;
    run_with(config, |v| {
        let c = classify_tips(v.store, v.pool);
        samples += 1;
        if c.total() != v.pool.occupancy() || c.hidden + c.real != v.pool.tip_count() {
            mismatches += 1;
        }
    })
    .map_err(|e| e.to_string())?;
    verdict(vec![(
        mismatches == 0 && samples == 100_000,
        format!("{mismatches} mismatches in {samples} samples"),
    )])
}

fn criterion_10() -> Outcome {
    let s = setup(Some(100.0), 10, 100_000, 1010);
    let extras = Extras {
        tau_factor: Some(3.0),
        ..Extras::default()
    };
    let mut parts = Vec::new();
    for mu in [0.3, 0.4, 0.45] {
        let c = cell(&s, mu, 2, extras)?;
        let fc = c.future_cone.ok_or("no future-cone rate")?.rate;
        let expired = c.stats.pooled_orphanage_rate.ok_or("no orphanage rate")?;
        let pred = predict(&s.regime(mu, 2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let with_exp = pred.expiration_probability.ok_or("no prediction")?;
        let no_exp = pred.expiration_probability_no_expiration_l0.ok_or("no prediction")?;
        let d_no = (fc / no_exp).ln().abs();
        let d_exp = (fc / with_exp).ln().abs();
        parts.push((
            fc >= expired && d_no < d_exp,
            format!(
                "mu={mu}: cone {fc:.4} ≥ expired {expired:.4}, |log| {d_no:.3} (no-exp L0) < {d_exp:.3}"
            ),
        ));
    }
    verdict(parts)
}

fn main() -> ExitCode {
    let (c1, c7) = criterion_1_and_7();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "honest stationary pool", c1),
        (2, "attacked stationary pool", criterion_2()),
        (3, "instability growth", criterion_3()),
        (4, "pool size with expiration", criterion_4()),
        (5, "orphanage rate", criterion_5()),
        (6, "solver properties", criterion_6()),
        (7, "Little's law", c7),
        (8, "determinism", criterion_8()),
        (9, "tip classification partition", criterion_9()),
        (10, "future-cone ordering", criterion_10()),
    ];
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
