use std::path::Path;
use std::time::{Duration, Instant};

use ce_core::{CESolution, Error, Problem, RunTrace, Solver, StackedPoint};

use crate::error::Result;
use crate::summary::write_text;

/// A finished solver run. Non-finite iterates end a run like divergence does,
/// leaving a trace but no solution.
pub struct SolverRun {
    pub trace: RunTrace,
    pub solution: Option<CESolution>,
    pub wall_time: Duration,
}

pub fn run_solver(
    solver: &dyn Solver,
    problem: &Problem,
    v0: &StackedPoint,
    reference: Option<&StackedPoint>,
) -> Result<SolverRun> {
    let start = Instant::now();
    let result = solver.solve(problem, v0, reference);
    let wall_time = start.elapsed();
    match result {
        Ok(sol) => Ok(SolverRun {
            trace: sol.trace.clone(),
            solution: Some(sol),
            wall_time,
        }),
        Err(Error::NonFinite { trace }) => Ok(SolverRun {
            trace: *trace,
            solution: None,
            wall_time,
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn write_trace(out_dir: &Path, trace: &RunTrace) -> Result<()> {
    write_text(&out_dir.join(format!("trace_{}.csv", trace.label)), &trace.to_csv())
}
