//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.
//!
//! The robustness sweep dominates the runtime (about a quarter of an hour on
//! one core in release mode).

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use mhpc_bench::config::ScenarioConfig;
use mhpc_bench::experiments::{run_budget_sweep, run_gap, run_robustness, run_timing, RobustnessCurve, SweepRow};
use mhpc_bench::output::{csv_string, curve_rows, strip_timing_columns};
use support::Report;

type Check = Box<dyn Fn() -> Report>;

fn shipped(name: &str) -> Result<ScenarioConfig> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ScenarioConfig::load(&path)
}

fn from_result(r: Result<Report>) -> Report {
    r.unwrap_or_else(|e| Report::new(false, format!("error: {e:#}")))
}

fn curve(curves: &[RobustnessCurve], s: [usize; 2]) -> Option<&RobustnessCurve> {
    curves.iter().find(|c| c.full == s[0] && c.simple == s[1])
}

fn robustness() -> Result<Report> {
    let config = shipped("quadruped.toml")?;
    let (curves, _) = run_robustness(&config, config.trials)?;
    let (simple, mixed, full) = match (curve(&curves, [0, 8]), curve(&curves, [2, 6]), curve(&curves, [8, 0])) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Ok(Report::new(false, "schedules (0,8), (2,6) or (8,0) missing")),
    };
    let dominated: Vec<f64> = simple
        .points
        .iter()
        .zip(&mixed.points)
        .filter(|(a, b)| a.probability > b.probability)
        .map(|(a, _)| a.magnitude)
        .collect();
    let hardest = config
        .magnitudes
        .iter()
        .copied()
        .filter(|&m| curves.iter().any(|c| c.probability_at(m).is_some_and(|p| p > 0.0)))
        .fold(f64::NAN, f64::max);
    let best = curves
        .iter()
        .filter_map(|c| c.probability_at(hardest))
        .fold(0.0, f64::max);
    let full_at = full.probability_at(hardest).unwrap_or(0.0);
    let mut detail = format!(
        "{} trials; P(0,8) <= P(2,6) at all levels: {}; at {hardest} N P(8,0) = {full_at:.2}, best {best:.2}",
        config.trials,
        dominated.is_empty()
    );
    for c in &curves {
        let ps: Vec<String> = c.points.iter().map(|p| format!("{:.2}", p.probability)).collect();
        detail += &format!("\n      ({},{}) {}", c.full, c.simple, ps.join(" "));
        if !c.non_monotone().is_empty() {
            detail += &format!("  non-monotone at {:?} N", c.non_monotone());
        }
    }
    Ok(Report::new(dominated.is_empty() && full_at >= best, detail))
}

fn timing() -> Result<Report> {
    let config = shipped("quadruped.toml")?;
    let mut rows = run_timing(&config)?;
    rows.sort_by_key(|r| r.full);
    let reference = rows.iter().find(|r| [r.full, r.simple] == config.timing.reference);
    let unit = reference.is_some_and(|r| r.normalized_mean == 1.0);
    let increasing = rows
        .windows(2)
        .all(|w| w[0].full < w[1].full && w[0].normalized_mean < w[1].normalized_mean);
    let all_ok = rows.iter().all(|r| r.success);
    let listing: Vec<String> = rows
        .iter()
        .map(|r| format!("{} {:.3}", r.schedule, r.normalized_mean))
        .collect();
    Ok(Report::new(
        unit && increasing && all_ok,
        format!("normalized {}; all episodes succeeded: {all_ok}", listing.join(", ")),
    ))
}

fn improves(rows: &[SweepRow], horizon: f64) -> Option<(f64, f64)> {
    let base = rows
        .iter()
        .find(|r| r.horizon == horizon && r.fraction == 0.0 && r.success)?;
    rows.iter()
        .filter(|r| r.horizon == horizon && r.fraction > 0.0 && r.success && r.total_cost <= base.total_cost)
        .map(|r| (r.fraction, r.relative_cost))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn budget_sweep() -> Result<Report> {
    let config = shipped("quadrotor.toml")?;
    let rows = run_budget_sweep(&config)?;
    let mut passed = true;
    let mut parts = Vec::new();
    for h in [1.0, 2.0] {
        match improves(&rows, h) {
            Some((c, rel)) => parts.push(format!("h = {h} s: fraction {c} costs {rel:.4} of full")),
            None => {
                passed = false;
                parts.push(format!("h = {h} s: no converted horizon matches the full model"));
            }
        }
    }
    Ok(Report::new(passed, parts.join("; ")))
}

fn gap() -> Result<Report> {
    let config = shipped("gap.toml")?;
    let rows = run_gap(&config)?;
    let find = |f: usize, s: usize| rows.iter().find(|r| r.full == f && r.simple == s);
    let (Some(mixed), Some(full)) = (find(4, 4), find(6, 0)) else {
        return Ok(Report::new(false, "schedules (4,4) and (6,0) are required"));
    };
    Ok(Report::new(
        mixed.success && mixed.rollout_cost < full.rollout_cost,
        format!(
            "(4,4) cost {:.1} (success {}), (6,0) cost {:.1} (success {})",
            mixed.rollout_cost, mixed.success, full.rollout_cost, full.success
        ),
    ))
}

/// Two reduced runs of the legged and quadrotor experiments.
fn determinism() -> Result<Report> {
    let mut legged = shipped("quadruped.toml")?;
    legged.schedules = vec![[2, 6], [8, 0]];
    legged.magnitudes = vec![60.0, 140.0];
    legged.episode.num_modes = 10;
    let mut flight = shipped("quadrotor.toml")?;
    flight.quadrotor.horizons = vec![1.0];
    flight.quadrotor.fractions = vec![0.0, 0.5];
    flight.quadrotor.episode.steps = 80;
    let run = || -> Result<Vec<String>> {
        let (curves, trials) = run_robustness(&legged, 3)?;
        let sweep = run_budget_sweep(&flight)?;
        [
            csv_string("robustness", &curve_rows(&curves))?,
            csv_string("robustness_trials", &trials)?,
            csv_string("budget_sweep", &sweep)?,
        ]
        .iter()
        .map(|t| strip_timing_columns(t))
        .collect()
    };
    let (a, b) = (run()?, run()?);
    let same = a == b;
    Ok(Report::new(
        same,
        format!("{} CSV files, byte-identical without timing columns: {same}", a.len()),
    ))
}

fn main() {
    let checks: Vec<(&str, Check)> = vec![
        ("Riccati equivalence", Box::new(support::criterion_riccati)),
        ("analytic derivatives", Box::new(support::criterion_derivatives)),
        ("impact map", Box::new(support::criterion_impact)),
        ("augmented Lagrangian convergence", Box::new(support::criterion_al)),
        ("transition value update", Box::new(support::criterion_transition)),
        ("quadruped robustness ordering", Box::new(|| from_result(robustness()))),
        ("normalized solve time", Box::new(|| from_result(timing()))),
        ("quadrotor horizon conversion", Box::new(|| from_result(budget_sweep()))),
        ("gap crossing cost", Box::new(|| from_result(gap()))),
        ("determinism", Box::new(|| from_result(determinism()))),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let report = check();
        let verdict = if report.passed { "PASS" } else { "FAIL" };
        if !report.passed {
            failures += 1;
        }
        println!(
            "criterion {:2} {verdict}  {name} [{:.1} s]: {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            report.detail
        );
    }
    println!("{} of {} criteria passed", checks.len() - failures, checks.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
