use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::Vector;

/// One optimization performed during an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub step: usize,
    pub wall_ms: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub planned_cost: f64,
}

/// Everything recorded while closing the loop around the plant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub dt: f64,
    /// Plant state at the start of each control step, plus the final state.
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    /// Running cost of each applied step.
    pub costs: Vec<f64>,
    /// Wall-clock of the solve issued at each step, zero when none was.
    pub solve_ms: Vec<f64>,
    pub replan: Vec<bool>,
    pub solves: Vec<SolveRecord>,
    pub success: bool,
    pub failure: Option<String>,
    /// Solves whose terminal constraints were not met within the caps.
    pub unconverged_solves: usize,
}

/// Per-episode summary, stable across runs apart from the timing fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub success: bool,
    pub failure: Option<String>,
    pub steps: usize,
    pub total_cost: f64,
    pub solves: usize,
    pub unconverged_solves: usize,
    pub mean_solve_ms: f64,
}

impl EpisodeLog {
    pub fn new(dt: f64) -> Self {
        EpisodeLog {
            dt,
            ..EpisodeLog::default()
        }
    }

    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn mean_solve_ms(&self) -> f64 {
        if self.solves.is_empty() {
            return 0.0;
        }
        self.solves.iter().map(|s| s.wall_ms).sum::<f64>() / self.solves.len() as f64
    }

    pub(crate) fn push_step(&mut self, x: &Vector, u: Vector, cost: f64, solve_ms: Option<f64>) {
        self.states.push(x.clone());
        self.controls.push(u);
        self.costs.push(cost);
        self.solve_ms.push(solve_ms.unwrap_or(0.0));
        self.replan.push(solve_ms.is_some());
    }

    pub(crate) fn fail(&mut self, reason: impl Into<String>) {
        self.success = false;
        self.failure = Some(reason.into());
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            success: self.success,
            failure: self.failure.clone(),
            steps: self.steps(),
            total_cost: self.total_cost(),
            solves: self.solves.len(),
            unconverged_solves: self.unconverged_solves,
            mean_solve_ms: self.mean_solve_ms(),
        }
    }

    /// CSV with columns `t, x0.., u0.., cost, solve_ms, replan`. Without
    /// `timing` the `solve_ms` column is omitted, which makes the output
    /// reproducible bit for bit.
    pub fn write_csv<W: Write>(&self, mut w: W, timing: bool) -> io::Result<()> {
        let nx = self.states.first().map_or(0, |x| x.len());
        let nu = self.controls.iter().map(|u| u.len()).max().unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend((0..nx).map(|i| format!("x{i}")));
        header.extend((0..nu).map(|i| format!("u{i}")));
        header.push("cost".into());
        if timing {
            header.push("solve_ms".into());
        }
        header.push("replan".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.controls.len() {
            let mut row = vec![format!("{:.6}", k as f64 * self.dt)];
            row.extend(self.states[k].iter().map(|v| format!("{v:e}")));
            let u = &self.controls[k];
            row.extend((0..nu).map(|i| u.get(i).map_or(String::new(), |v| format!("{v:e}"))));
            row.push(format!("{:e}", self.costs[k]));
            if timing {
                row.push(format!("{:.3}", self.solve_ms[k]));
            }
            row.push(u8::from(self.replan[k]).to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_row_per_step() {
        let mut log = EpisodeLog::new(0.5);
        log.push_step(
            &Vector::from_vec(vec![1.0, 2.0]),
            Vector::from_vec(vec![3.0]),
            4.0,
            Some(1.5),
        );
        log.push_step(
            &Vector::from_vec(vec![1.0, 2.0]),
            Vector::from_vec(vec![3.0]),
            4.0,
            None,
        );
        let mut buf = Vec::new();
        log.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,x0,x1,u0,cost,solve_ms,replan");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",0.000,0"));
        assert_eq!(log.total_cost(), 8.0);
    }
}
