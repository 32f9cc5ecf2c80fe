//! Quadratic prox coupled with a blended row-stochastic map `rW + (1 − r)I/2`.

use std::path::Path;
use std::sync::Arc;

use ce_core::agents::{blended_agent, quadratic_prox_agent, row_stochastic_matrix};
use ce_core::analysis::{affine_ce_oracle, jacobian_spectrum, mann_spectrum_check, max_modulus, SpectrumReport};
use ce_core::tensor::{Matrix, Rng};
use ce_core::{Error, Problem, SolverConfig, SolverRegistry, StackedPoint};

use crate::error::{ExperimentError, Result};
use crate::run::{run_solver, write_trace, SolverRun};
use crate::summary::{ensure_dir, write_json, write_summaries, ExperimentSummary};

pub const STOCHASTIC_DIM: usize = 100;
/// Instance whose spectrum sits on either side of the Mann stability limit
/// for `r = 1.02` and `r = 1.06`.
pub const DEFAULT_STOCHASTIC_SEED: u64 = 11;
pub const KRYLOV_DIM_STABLE: usize = 10;
pub const KRYLOV_DIM_UNSTABLE: usize = 75;
pub const DEFAULT_MAX_OUTER: usize = 50;

#[derive(Clone, Debug)]
pub struct StochasticOptions {
    pub r: f64,
    pub seed: u64,
    pub solvers: Vec<String>,
    /// Overrides the spectrum-based choice.
    pub krylov_dim: Option<usize>,
    /// Iteration cap for Newton-type solvers, in outer steps.
    pub max_outer: usize,
}

impl StochasticOptions {
    pub fn new(r: f64, seed: u64) -> Self {
        StochasticOptions {
            r,
            seed,
            solvers: ["admm", "mann08", "jfnk"].map(String::from).to_vec(),
            krylov_dim: None,
            max_outer: DEFAULT_MAX_OUTER,
        }
    }
}

/// `A`, then `y`, then `W`, all drawn from one stream seeded with `seed`.
pub fn stochastic_problem(r: f64, seed: u64) -> Result<Problem> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(ExperimentError::InvalidArgument(format!("r must be positive, got {r}")));
    }
    let n = STOCHASTIC_DIM;
    let mut rng = Rng::new(seed);
    let a = Matrix::from_fn(n, n, |_, _| rng.uniform());
    let y: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let w = row_stochastic_matrix(n, &mut rng)?;
    let f1 = quadratic_prox_agent(&a, &y, 1.0)?;
    let f2 = blended_agent(&w, r)?;
    Ok(Problem::with_uniform_weights(vec![Arc::new(f1), Arc::new(f2)])?)
}

/// A small Krylov space suffices while Mann is stable; past the limit the
/// outlying eigenvalues need a larger one.
pub fn default_krylov_dim(report: &SpectrumReport) -> usize {
    if report.max_real < 1.0 {
        KRYLOV_DIM_STABLE
    } else {
        KRYLOV_DIM_UNSTABLE
    }
}

pub struct StochasticRun {
    pub problem: Problem,
    pub spectrum: SpectrumReport,
    /// `None` when the equilibrium is not unique.
    pub reference: Option<StackedPoint>,
    pub krylov_dim: usize,
    pub runs: Vec<SolverRun>,
    pub summaries: Vec<ExperimentSummary>,
}

fn mann_rho(name: &str, base: &SolverConfig) -> Option<f64> {
    match name {
        "admm" => Some(0.5),
        "mann08" => Some(0.8),
        "mann" => Some(base.rho),
        _ => None,
    }
}

fn is_newton_type(name: &str) -> bool {
    matches!(name, "jfnk" | "newton-fg" | "newton-mann")
}

/// Writes `spectrum.json`, `trace_<solver>.csv` and `summary.json`.
pub fn run_stochastic_full(opts: &StochasticOptions, base: &SolverConfig, out_dir: &Path) -> Result<StochasticRun> {
    let registry = SolverRegistry::default();
    if let Some(bad) = opts.solvers.iter().find(|s| !registry.contains(s)) {
        return Err(Error::UnknownSolver(bad.clone()).into());
    }
    ensure_dir(out_dir)?;
    let problem = stochastic_problem(opts.r, opts.seed)?;
    let v0 = problem.zeros();
    // both agents are affine, so the spectrum is the same everywhere
    let spectrum = jacobian_spectrum(&problem, &v0)?;
    write_json(&out_dir.join("spectrum.json"), &spectrum)?;
    let reference = match affine_ce_oracle(&problem) {
        Ok(v) => Some(v),
        Err(Error::SingularSystem) => None,
        Err(e) => return Err(e.into()),
    };
    let krylov_dim = opts.krylov_dim.unwrap_or_else(|| default_krylov_dim(&spectrum));

    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for name in &opts.solvers {
        let mut cfg = base.clone().with_krylov_dim(krylov_dim);
        if is_newton_type(name) {
            cfg = cfg.with_max_iter(base.max_iter.min(opts.max_outer));
        }
        let solver = registry.create(name, &cfg)?;
        let run = run_solver(solver.as_ref(), &problem, &v0, reference.as_ref())?;
        write_trace(out_dir, &run.trace)?;
        let mut s = ExperimentSummary::from_trace("stochastic", Some(opts.seed), &run.trace, run.wall_time);
        s.predicted_modulus = mann_rho(name, base).map(|rho| max_modulus(&mann_spectrum_check(&spectrum, rho)));
        summaries.push(s);
        runs.push(run);
    }
    write_summaries(out_dir, &summaries)?;
    Ok(StochasticRun {
        problem,
        spectrum,
        reference,
        krylov_dim,
        runs,
        summaries,
    })
}

pub fn run_stochastic(opts: &StochasticOptions, base: &SolverConfig, out_dir: &Path) -> Result<Vec<ExperimentSummary>> {
    Ok(run_stochastic_full(opts, base, out_dir)?.summaries)
}
