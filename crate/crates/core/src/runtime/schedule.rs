use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReplanCadence {
    #[default]
    PerGaitMode,
    PerControlStep,
}

/// Split of the planning horizon between the full and the simple model.
///
/// Units follow the cadence: gait modes when re-planning per gait mode,
/// control steps otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionSchedule {
    pub full: usize,
    pub simple: usize,
    pub cadence: ReplanCadence,
    /// Position of the window's first unit in the cyclic gait (or step count).
    pub offset: usize,
    /// Re-planning units left before the schedule runs out; `None` is unbounded.
    pub remaining: Option<usize>,
}

impl AbstractionSchedule {
    pub fn new(full: usize, simple: usize, cadence: ReplanCadence) -> Result<Self> {
        if full + simple == 0 {
            return Err(Error::Config("schedule needs at least one horizon unit".into()));
        }
        Ok(AbstractionSchedule {
            full,
            simple,
            cadence,
            offset: 0,
            remaining: None,
        })
    }

    pub fn legged(full: usize, simple: usize) -> Result<Self> {
        Self::new(full, simple, ReplanCadence::PerGaitMode)
    }

    pub fn starting_at(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_remaining(mut self, units: usize) -> Self {
        self.remaining = Some(units);
        self
    }

    pub fn total(&self) -> usize {
        self.full + self.simple
    }

    /// Level of the `j`-th unit of the current window.
    pub fn is_full(&self, j: usize) -> bool {
        j < self.full
    }

    /// The window moved forward by one re-planning unit.
    pub fn advanced(&self) -> Result<Self> {
        let remaining = match self.remaining {
            Some(0) => return Err(Error::ScheduleExhausted),
            Some(r) => Some(r - 1),
            None => None,
        };
        Ok(AbstractionSchedule {
            offset: self.offset + 1,
            remaining,
            ..self.clone()
        })
    }

    pub fn label(&self) -> String {
        format!("({},{})", self.full, self.simple)
    }
}
