//! Two-agent planar problem: a quadratic prox and a weakly expanding map.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use ce_core::agents::{quadratic_prox_agent, toy_expanding_agent};
use ce_core::solvers::{Mann, Newton, NewtonTarget};
use ce_core::tensor::{fmt_f64, Matrix};
use ce_core::{Problem, RunTrace, Solver, SolverConfig};

use crate::error::Result;
use crate::run::{run_solver, write_trace, SolverRun};
use crate::summary::{ensure_dir, write_summaries, write_text, ExperimentSummary};

pub const TOY_A: [[f64; 2]; 2] = [[0.3, 0.6], [0.4, 0.5]];
pub const TOY_Y: [f64; 2] = [1.0, 1.0];
pub const TOY_SIGMA: f64 = 1.0;

pub fn toy_problem() -> Result<Problem> {
    let f1 = quadratic_prox_agent(&Matrix::from_rows(&TOY_A), &TOY_Y, TOY_SIGMA)?;
    Ok(Problem::with_uniform_weights(vec![Arc::new(f1), Arc::new(toy_expanding_agent())])?)
}

/// Frozen-Jacobian Newton on both targets and ADMM, all from `v = 0`.
pub fn toy_solvers(base: &SolverConfig) -> Result<Vec<Box<dyn Solver>>> {
    let frozen = base.clone().with_frozen_jacobian(true).with_iterates(true);
    Ok(vec![
        Box::new(Newton::new(NewtonTarget::FG, frozen.clone())?),
        Box::new(Newton::new(NewtonTarget::Mann, frozen)?),
        Box::new(Mann::new("admm", base.clone().with_rho(0.5).with_iterates(true))?),
    ])
}

/// CSV `iter,v11,v12,v21,v22` of the recorded iterates.
pub fn trajectory_csv(trace: &RunTrace) -> String {
    let mut s = String::from("iter,v11,v12,v21,v22\n");
    for (k, v) in trace.iterates.iter().enumerate() {
        let cols: Vec<String> = v.as_slice().iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(s, "{k},{}", cols.join(","));
    }
    s
}

pub fn run_toy2d_runs(out_dir: &Path, base: &SolverConfig) -> Result<Vec<SolverRun>> {
    ensure_dir(out_dir)?;
    let p = toy_problem()?;
    let v0 = p.zeros();
    let mut runs = Vec::new();
    for solver in toy_solvers(base)? {
        let run = run_solver(solver.as_ref(), &p, &v0, None)?;
        write_trace(out_dir, &run.trace)?;
        write_text(
            &out_dir.join(format!("trajectory_{}.csv", run.trace.label)),
            &trajectory_csv(&run.trace),
        )?;
        runs.push(run);
    }
    Ok(runs)
}

/// Writes `trace_<solver>.csv`, `trajectory_<solver>.csv` and `summary.json`.
pub fn run_toy2d(out_dir: &Path, base: &SolverConfig) -> Result<Vec<ExperimentSummary>> {
    let runs = run_toy2d_runs(out_dir, base)?;
    let summaries: Vec<ExperimentSummary> = runs
        .iter()
        .map(|r| ExperimentSummary::from_trace("toy2d", None, &r.trace, r.wall_time))
        .collect();
    write_summaries(out_dir, &summaries)?;
    Ok(summaries)
}
