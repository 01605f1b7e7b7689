use std::time::Duration;

use crate::model::CoefState;

/// Outcome of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    /// Final iterate.
    pub state: CoefState,
    /// `h` at the starting point, then after every sweep or step.
    pub objective_trace: Vec<f64>,
    /// Sweeps (BCD) or gradient steps (GP) taken.
    pub iterations: usize,
    /// Solver time, initialization included, diagnostics excluded.
    pub wall_time: Duration,
    pub converged: bool,
    /// BCD: largest block change under one extra sweep.
    /// GP: `|P(a + gamma grad h(a)) - a|` at the final iterate.
    pub stationarity_residual: f64,
    /// `|a^{s+1} - a^s|` over the concatenated coefficients, one entry per iteration.
    pub step_norms: Vec<f64>,
    /// Block updates skipped because the inner target was zero.
    pub degenerate_updates: usize,
    /// Baseline only: binary searches that missed the l1 target.
    pub search_failures: usize,
}

impl SolverReport {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds the starting value")
    }

    /// `sum_s |a^{s+1} - a^s|`.
    pub fn path_length(&self) -> f64 {
        self.step_norms.iter().sum()
    }

    /// Largest decrease between consecutive trace entries (0 for a monotone trace).
    pub fn max_decrease(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}
