use mhpc_bench::config::ScenarioConfig;
use mhpc_bench::experiments::{run_budget_sweep, run_robustness, RobustnessCurve, SweepRow};
use mhpc_bench::output::{csv_string, curve_rows, strip_timing_columns, write_json};

fn small_robustness(magnitudes: Vec<f64>) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        schedules: vec![[4, 0]],
        magnitudes,
        ..ScenarioConfig::default()
    };
    c.episode.num_modes = 6;
    c.disturbance.mode_index = 2;
    c
}

#[test]
fn undisturbed_level_is_certain_success() {
    let (curves, records) = run_robustness(&small_robustness(vec![0.0]), 2).unwrap();
    assert_eq!(records.len(), 2);
    let p = &curves[0].points[0];
    assert_eq!((p.trials, p.successes), (2, 2));
    assert_eq!((p.probability, p.upper), (1.0, 1.0));
    assert!(p.lower > 0.0 && p.lower < 1.0);
}

#[test]
fn overwhelming_push_is_certain_failure() {
    let (curves, records) = run_robustness(&small_robustness(vec![5000.0]), 2).unwrap();
    assert!(records.iter().all(|r| !r.success && r.failure.is_some()));
    let p = &curves[0].points[0];
    assert_eq!((p.probability, p.lower), (0.0, 0.0));
    assert!(p.upper > 0.0);
}

#[test]
fn curve_summary_round_trips_through_json() {
    let (curves, _) = run_robustness(&small_robustness(vec![0.0, 5000.0]), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("robustness.json");
    write_json(&path, &curves).unwrap();
    let back: Vec<RobustnessCurve> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, curves);
    assert_eq!(curve_rows(&back).len(), 2);
}

#[test]
fn sweep_is_reproducible_apart_from_timing() {
    let mut c = ScenarioConfig::default();
    c.quadrotor.horizons = vec![0.5];
    c.quadrotor.fractions = vec![0.0, 0.5];
    c.quadrotor.episode.steps = 40;
    let a = run_budget_sweep(&c).unwrap();
    let b = run_budget_sweep(&c).unwrap();
    assert_eq!(a[0].relative_cost, 1.0);
    assert_eq!((a[1].full_steps, a[1].simple_steps), (13, 31));
    let text = |rows: &[SweepRow]| strip_timing_columns(&csv_string("budget-sweep", rows).unwrap()).unwrap();
    assert_eq!(text(&a), text(&b));
    assert!(!text(&a).contains("_ms"));
}
