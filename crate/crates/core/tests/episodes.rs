use mhpc::legged::LeggedTask;
use mhpc::runtime::{simulate_legged_episode, AbstractionSchedule, DisturbanceSpec, LeggedEpisodeSettings};

fn short_settings() -> LeggedEpisodeSettings {
    LeggedEpisodeSettings {
        num_modes: 6,
        ..LeggedEpisodeSettings::default()
    }
}

#[test]
fn undisturbed_trot_keeps_walking() {
    let task = LeggedTask::default();
    let schedule = AbstractionSchedule::legged(2, 2).unwrap();
    let log = simulate_legged_episode(&task, &schedule, &short_settings(), None).unwrap();
    assert!(log.success, "{:?}", log.failure);
    let x0 = &log.states[0];
    let end = log.states.last().unwrap();
    assert!(end[0] > x0[0], "trunk did not advance");
    assert!(log.costs.iter().all(|c| c.is_finite()));
}

#[test]
fn pushed_episode_is_reproducible() {
    let task = LeggedTask::default();
    let schedule = AbstractionSchedule::legged(1, 3).unwrap();
    let push = DisturbanceSpec {
        mode_index: 2,
        magnitude: 60.0,
        ..DisturbanceSpec::default()
    };
    let a = simulate_legged_episode(&task, &schedule, &short_settings(), Some(&push)).unwrap();
    let b = simulate_legged_episode(&task, &schedule, &short_settings(), Some(&push)).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.controls, b.controls);
    assert_eq!(a.success, b.success);
}
