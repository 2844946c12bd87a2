use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mhpc::hsddp::write_trace_csv;
use mhpc_bench::config::{ScenarioConfig, Schedule};
use mhpc_bench::experiments::{run_budget_sweep, run_gap, run_robustness, run_timing, solve_once, sweep_improves};
use mhpc_bench::output::{curve_rows, write_csv, write_json};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mhpc-bench", version, about = "Run model-hierarchy control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Success rate against push magnitude for every schedule.
    Robustness {
        #[command(flatten)]
        common: Common,
        /// Trials per magnitude level.
        #[arg(long)]
        trials: Option<usize>,
        /// Use the full-scale trial count from the scenario.
        #[arg(long)]
        full_scale: bool,
    },
    /// Per-solve wall time, normalized by the reference schedule.
    Timing {
        #[command(flatten)]
        common: Common,
    },
    /// Quadrotor cost over horizon length and conversion fraction.
    BudgetSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Quadruped crossing a terrain gap.
    Gap {
        #[command(flatten)]
        common: Common,
    },
    /// One open-loop solve with its iteration trace.
    Solve {
        #[command(flatten)]
        common: Common,
        /// `full,simple`: gait modes, or time steps with `--quadrotor`.
        #[arg(long, value_parser = parse_schedule, default_value = "4,4")]
        schedule: Schedule,
        #[arg(long)]
        quadrotor: bool,
    },
}

fn parse_schedule(s: &str) -> Result<Schedule, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => {
            let f = a.trim().parse().map_err(|e| format!("{e}"))?;
            let g = b.trim().parse().map_err(|e| format!("{e}"))?;
            Ok([f, g])
        }
        _ => Err("expected FULL,SIMPLE".into()),
    }
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut config = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Robustness {
            common,
            trials,
            full_scale,
        } => {
            let config = load(&common)?;
            let n = trials.unwrap_or_else(|| config.trial_count(full_scale));
            if n == 0 {
                bail!("at least one trial per level is needed");
            }
            let (curves, records) = run_robustness(&config, n)?;
            let dir = &config.output_dir;
            write_csv(&dir.join("robustness.csv"), "robustness", &curve_rows(&curves))?;
            write_csv(&dir.join("robustness_trials.csv"), "robustness-trials", &records)?;
            let non_monotone: Vec<_> = curves
                .iter()
                .filter_map(|c| {
                    let m = c.non_monotone();
                    (!m.is_empty()).then(|| json!({ "schedule": c.schedule, "magnitudes": m }))
                })
                .collect();
            write_json(
                &dir.join("robustness.json"),
                &json!({
                    "robot": config.robot,
                    "seed": config.seed,
                    "trials": n,
                    "curves": curves,
                    "non_monotone": non_monotone,
                }),
            )?;
            for c in &curves {
                let ps: Vec<String> = c.points.iter().map(|p| format!("{:.2}", p.probability)).collect();
                println!("{:>6} {}", c.schedule, ps.join(" "));
                let m = c.non_monotone();
                if !m.is_empty() {
                    println!("       success rate rises at {m:?} N");
                }
            }
        }
        Command::Timing { common } => {
            let config = load(&common)?;
            let rows = run_timing(&config)?;
            write_csv(&config.output_dir.join("timing.csv"), "timing", &rows)?;
            write_json(&config.output_dir.join("timing.json"), &rows)?;
            for r in &rows {
                println!(
                    "{:>6} {:8.2} ms  normalized {:.3} ± {:.3}",
                    r.schedule, r.mean_ms, r.normalized_mean, r.normalized_std
                );
            }
            if rows.iter().any(|r| !r.success) {
                bail!("a timing episode failed");
            }
        }
        Command::BudgetSweep { common } => {
            let config = load(&common)?;
            let rows = run_budget_sweep(&config)?;
            write_csv(&config.output_dir.join("budget_sweep.csv"), "budget-sweep", &rows)?;
            let improved: Vec<_> = config
                .quadrotor
                .horizons
                .iter()
                .map(|&h| json!({ "horizon": h, "improved": sweep_improves(&rows, h) }))
                .collect();
            write_json(
                &config.output_dir.join("budget_sweep.json"),
                &json!({ "rows": rows, "improved": improved }),
            )?;
            for r in &rows {
                println!(
                    "h {:.1} c {:.2} ({:3},{:3}) cost {:10.2} rel {:.4} clearance {:+.3} {}",
                    r.horizon,
                    r.fraction,
                    r.full_steps,
                    r.simple_steps,
                    r.total_cost,
                    r.relative_cost,
                    r.min_clearance,
                    r.failure.as_deref().unwrap_or("ok")
                );
            }
        }
        Command::Gap { common } => {
            let config = load(&common)?;
            let rows = run_gap(&config)?;
            write_csv(&config.output_dir.join("gap.csv"), "gap", &rows)?;
            write_json(&config.output_dir.join("gap.json"), &rows)?;
            for r in &rows {
                println!(
                    "{:>6} cost {:10.1} speed err {:.3} m/s  x {:.2} m  {}",
                    r.schedule,
                    r.rollout_cost,
                    r.speed_error,
                    r.final_x,
                    r.failure.as_deref().unwrap_or("ok")
                );
            }
        }
        Command::Solve {
            common,
            schedule,
            quadrotor,
        } => {
            let config = load(&common)?;
            let run = solve_once(&config, &schedule, quadrotor)?;
            let path = config.output_dir.join("solve_trace.csv");
            std::fs::create_dir_all(&config.output_dir)?;
            let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_trace_csv(&run.solution.trace, std::io::BufWriter::new(f))?;
            let s = &run.solution;
            println!(
                "cost {:.4} outer {} inner {} converged {} |g| {:.2e} in {:.1} ms",
                s.total_cost(),
                s.outer_iterations,
                s.inner_iterations,
                s.converged,
                s.g_history.last().copied().unwrap_or(0.0),
                run.wall_ms
            );
        }
    }
    Ok(())
}
