//! Per-step records shared by the barrier controller and the baselines.

use std::fmt;
use std::time::Duration;

/// A voltage above its limit by more than this counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Events {
    pub init: bool,
    pub saturation: bool,
    pub switch: bool,
}

impl Events {
    pub fn any(&self) -> bool {
        self.init || self.saturation || self.switch
    }
}

impl fmt::Display for Events {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.init {
            parts.push("init");
        }
        if self.saturation {
            parts.push("saturation");
        }
        if self.switch {
            parts.push("switch");
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    /// Largest voltage deviation over all buses.
    pub max_x: f64,
    /// Bus id (1-based) with the largest margin `x - x_bar`.
    pub attention_bus: usize,
    /// Barrier weight at the attention bus, or the largest dual for primal-dual.
    pub alpha_s: f64,
    pub events: Events,
    pub u_norm: f64,
    pub violation: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged => f.write_str("converged"),
            Status::MaxIters => f.write_str("max-iters"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub method: String,
    pub records: Vec<StepRecord>,
    pub status: Status,
    pub wall_time: Duration,
}

impl Trajectory {
    pub fn new(method: impl Into<String>) -> Self {
        Trajectory { method: method.into(), records: Vec::new(), status: Status::MaxIters, wall_time: Duration::ZERO }
    }

    pub fn push(&mut self, u: &[f64], x: &[f64], x_bar: &[f64], alpha_s: f64, events: Events) {
        let step = self.records.len();
        let max_x = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let attention = argmax_margin(x, x_bar);
        let violation = x.iter().zip(x_bar).any(|(v, lim)| v - lim > VIOLATION_TOL);
        self.records.push(StepRecord {
            step,
            u: u.to_vec(),
            x: x.to_vec(),
            max_x,
            attention_bus: attention + 1,
            alpha_s,
            events,
            u_norm: crate::linalg::norm2(u),
            violation,
        });
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn final_u(&self) -> &[f64] {
        &self.records.last().expect("trajectory is non-empty").u
    }

    pub fn final_x(&self) -> &[f64] {
        &self.records.last().expect("trajectory is non-empty").x
    }

    /// Number of update steps taken (the initial record is step 0).
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn violation_steps(&self) -> usize {
        self.records.iter().filter(|r| r.violation).count()
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Index of the largest `x_j - x_bar_j`, lowest index on ties.
pub fn argmax_margin(x: &[f64], x_bar: &[f64]) -> usize {
    let mut best = 0;
    let mut best_margin = f64::NEG_INFINITY;
    for (j, (v, lim)) in x.iter().zip(x_bar).enumerate() {
        let m = v - lim;
        if m > best_margin {
            best_margin = m;
            best = j;
        }
    }
    best
}
