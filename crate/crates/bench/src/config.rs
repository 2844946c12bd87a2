//! Scenario configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mhpc::hsddp::SolverOptions;
use mhpc::legged::{GaitTable, GapSpec, LeggedParams, LeggedTask, RobotKind};
use mhpc::quadrotor::QuadrotorTask;
use mhpc::runtime::{DisturbanceSpec, LeggedEpisodeSettings, QuadrotorEpisodeSettings};
use serde::{Deserialize, Serialize};

/// `(n_f, n_s)`: full-model and simple-model horizon units.
pub type Schedule = [usize; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub robot: RobotKind,
    pub seed: u64,
    /// Trials per magnitude level.
    pub trials: usize,
    /// Trials per level with `--full-scale`.
    pub full_scale_trials: usize,
    pub output_dir: PathBuf,
    /// Schedules for the robustness sweep; empty selects the robot's default set.
    pub schedules: Vec<Schedule>,
    /// Disturbance magnitudes in newtons.
    pub magnitudes: Vec<f64>,
    /// Push timing and sampling. Its magnitude and seed are set per trial.
    pub disturbance: DisturbanceSpec,
    /// Legged task; absent selects the robot's defaults.
    pub task: Option<LeggedTask>,
    pub episode: LeggedEpisodeSettings,
    pub timing: TimingConfig,
    pub quadrotor: QuadrotorConfig,
    pub gap: GapConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            robot: RobotKind::Quadruped,
            seed: 0,
            trials: 20,
            full_scale_trials: 200,
            output_dir: PathBuf::from("results"),
            schedules: Vec::new(),
            magnitudes: (1..=8).map(|i| 20.0 * i as f64).collect(),
            disturbance: DisturbanceSpec::default(),
            task: None,
            episode: LeggedEpisodeSettings::default(),
            timing: TimingConfig::default(),
            quadrotor: QuadrotorConfig::default(),
            gap: GapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    /// Solves averaged per schedule.
    pub solves: usize,
    /// Schedules timed; empty selects the robot's default set.
    pub schedules: Vec<Schedule>,
    /// Schedule every time is normalized by.
    pub reference: Schedule,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            solves: 16,
            schedules: Vec::new(),
            reference: [8, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadrotorConfig {
    pub task: QuadrotorTask,
    pub episode: QuadrotorEpisodeSettings,
    /// Original full-model horizons in seconds.
    pub horizons: Vec<f64>,
    /// Fractions of the full-model horizon handed to the simple model.
    pub fractions: Vec<f64>,
    /// Simple-model steps gained per full-model step given up.
    pub step_ratio: f64,
}

impl Default for QuadrotorConfig {
    fn default() -> Self {
        QuadrotorConfig {
            task: QuadrotorTask::default(),
            episode: QuadrotorEpisodeSettings::default(),
            horizons: vec![0.5, 1.0, 1.5, 2.0],
            fractions: vec![0.0, 0.25, 0.5, 0.75],
            step_ratio: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapConfig {
    pub gap: GapSpec,
    pub desired_speed: f64,
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub schedules: Vec<Schedule>,
    pub num_modes: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            gap: GapSpec::default(),
            desired_speed: 1.5,
            max_outer_iterations: 7,
            max_inner_iterations: 7,
            schedules: vec![[4, 4], [6, 0]],
            num_modes: 16,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.full_scale_trials == 0 {
            bail!("trial counts must be positive");
        }
        if self.magnitudes.iter().any(|&m| !(m >= 0.0)) {
            bail!("disturbance magnitudes must be non-negative");
        }
        for s in self
            .robustness_schedules()
            .iter()
            .chain(&self.timing_schedules())
            .chain(&self.gap.schedules)
        {
            if s[0] + s[1] == 0 {
                bail!("schedule {s:?} has no horizon");
            }
        }
        self.disturbance.validate()?;
        if self.disturbance.mode_index >= self.episode.num_modes {
            bail!(
                "the push starts in gait mode {} but episodes last {} modes",
                self.disturbance.mode_index,
                self.episode.num_modes
            );
        }
        self.legged_task().validate()?;
        self.quadrotor.task.validate()?;
        if self.quadrotor.fractions.iter().any(|&c| !(0.0..1.0).contains(&c)) {
            bail!("conversion fractions must lie in [0, 1): the point mass cannot drive the rotors");
        }
        if self.quadrotor.horizons.iter().any(|&h| !(h > 0.0)) || !(self.quadrotor.step_ratio > 0.0) {
            bail!("horizons and step ratio must be positive");
        }
        if self.timing.solves == 0 {
            bail!("timing needs at least one solve");
        }
        Ok(())
    }

    pub fn legged_task(&self) -> LeggedTask {
        self.task.clone().unwrap_or_else(|| LeggedTask {
            params: LeggedParams::for_kind(self.robot),
            gait: GaitTable::for_kind(self.robot),
            ..LeggedTask::default()
        })
    }

    fn default_schedules(&self) -> Vec<Schedule> {
        let all = vec![[0, 8], [2, 6], [4, 0], [4, 4], [6, 2], [8, 0]];
        match self.robot {
            RobotKind::Quadruped => all,
            // No stable running gait on the simple model alone.
            RobotKind::Biped => all.into_iter().filter(|s| s[0] > 0).collect(),
        }
    }

    pub fn robustness_schedules(&self) -> Vec<Schedule> {
        if self.schedules.is_empty() {
            self.default_schedules()
        } else {
            self.schedules.clone()
        }
    }

    /// Timed schedules, ordered by full-model horizon.
    pub fn timing_schedules(&self) -> Vec<Schedule> {
        if !self.timing.schedules.is_empty() {
            return self.timing.schedules.clone();
        }
        let mut s: Vec<Schedule> = self
            .default_schedules()
            .into_iter()
            .filter(|s| s[0] + s[1] == 8)
            .collect();
        s.sort();
        s
    }

    pub fn trial_count(&self, full_scale: bool) -> usize {
        if full_scale {
            self.full_scale_trials
        } else {
            self.trials
        }
    }

    /// Seed of the push drawn in trial `trial`, shared across magnitudes.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(trial as u64)
    }

    pub fn gap_task(&self) -> LeggedTask {
        LeggedTask {
            terrain: mhpc::legged::Terrain::with_gap(self.gap.gap),
            clearance_constraints: true,
            desired_speed: self.gap.desired_speed,
            ..self.legged_task()
        }
    }

    pub fn gap_settings(&self) -> LeggedEpisodeSettings {
        let solver: SolverOptions = self
            .episode
            .solver
            .clone()
            .with_caps(self.gap.max_outer_iterations, self.gap.max_inner_iterations);
        LeggedEpisodeSettings {
            solver,
            num_modes: self.gap.num_modes,
            ..self.episode.clone()
        }
    }
}
