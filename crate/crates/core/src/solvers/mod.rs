//! Iterative solvers for the equilibrium equations.
//!
//! Each backend implements [`Solver`] and is registered by name in a
//! [`SolverRegistry`], so experiments and the CLI pick solvers at runtime:
//!
//! | name          | method                                         |
//! |---------------|------------------------------------------------|
//! | `admm`        | Mann iteration with ρ = 0.5                    |
//! | `mann08`      | Mann iteration with ρ = 0.8                    |
//! | `mann`        | Mann iteration with the configured ρ           |
//! | `precond-mann`| anisotropic preconditioned Mann (needs `H`)    |
//! | `newton-fg`   | dense Newton on `F − G`                        |
//! | `newton-mann` | dense Newton on `T − I`                        |
//! | `jfnk`        | Jacobian-free Newton–Krylov on `F − G`         |
//!
//! All solvers stop as soon as `‖F(v) − G(v)‖ ≤ tol`, and all of them count
//! cost in stacked map evaluations: one evaluation of `F` on a full stacked
//! point (every agent applied once).

mod jacobian;
mod jfnk;
mod mann;
mod newton;

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub use jacobian::{fd_block_jacobians, fd_jacobian};
pub use jfnk::{jfnk_solve, Jfnk};
pub use mann::{mann_solve, mann_step, preconditioned_mann_solve, preconditioned_step, Mann, PreconditionedMann};
pub use newton::{newton_solve, Newton, NewtonTarget};

use crate::equilibrium::{CESolution, Problem, StackedPoint};
use crate::error::{Error, Result};
use crate::tensor::{fmt_f64, Matrix};

/// Residuals above this are treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Largest stacked dimension for which dense Newton is allowed.
pub const MAX_DENSE_NEWTON_DIM: usize = 2000;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Stop when the residual is at most this.
    pub tol: f64,
    /// Iteration cap (outer iterations for Newton-type methods).
    pub max_iter: usize,
    /// Mann relaxation, in (0, 1).
    pub rho: f64,
    /// Preconditioner for anisotropic Mann: symmetric, eigenvalues in (0, 1).
    pub h: Option<Matrix>,
    /// Krylov subspace dimension for JFNK.
    pub krylov_dim: usize,
    /// Relative finite-difference step.
    pub fd_eps: f64,
    /// Evaluate Jacobian blocks once at the starting point (Newton).
    pub freeze_jacobian: bool,
    /// Keep every iterate in the trace.
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 10_000,
            rho: 0.5,
            h: None,
            krylov_dim: 10,
            fd_eps: 1e-7,
            freeze_jacobian: false,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if self.krylov_dim == 0 {
            return Err(Error::InvalidConfig("krylov_dim must be at least 1".into()));
        }
        if !(self.fd_eps > 0.0) {
            return Err(Error::InvalidConfig("fd_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_krylov_dim(mut self, dim: usize) -> Self {
        self.krylov_dim = dim;
        self
    }

    pub fn with_preconditioner(mut self, h: Matrix) -> Self {
        self.h = Some(h);
        self
    }

    pub fn with_frozen_jacobian(mut self, freeze: bool) -> Self {
        self.freeze_jacobian = freeze;
        self
    }

    pub fn with_iterates(mut self, record: bool) -> Self {
        self.record_iterates = record;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    MaxIterations,
    /// Residual exceeded [`DIVERGENCE_THRESHOLD`].
    Diverged,
    NonFinite,
}

/// Per-iteration history. Row `k` describes iterate `v^k`.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub label: String,
    pub residual: Vec<f64>,
    /// `‖v^k − v_ref‖/√(nN)` when a reference was supplied.
    pub rmse_error: Vec<Option<f64>>,
    /// Cumulative stacked map evaluations.
    pub map_evals: Vec<u64>,
    /// `‖v^k − v_ref‖_{H⁻¹}` (preconditioned Mann with a reference only).
    pub hinv_error: Vec<f64>,
    /// `v^k`, only with [`SolverConfig::record_iterates`].
    pub iterates: Vec<StackedPoint>,
    pub outcome: Outcome,
}

impl RunTrace {
    pub fn new(label: impl Into<String>) -> Self {
        RunTrace {
            label: label.into(),
            residual: Vec::new(),
            rmse_error: Vec::new(),
            map_evals: Vec::new(),
            hinv_error: Vec::new(),
            iterates: Vec::new(),
            outcome: Outcome::MaxIterations,
        }
    }

    pub fn push(&mut self, residual: f64, rmse: Option<f64>, map_evals: u64) {
        self.residual.push(residual);
        self.rmse_error.push(rmse);
        self.map_evals.push(map_evals);
    }

    pub fn len(&self) -> usize {
        self.residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual.is_empty()
    }

    /// Number of updates performed (rows minus the initial point).
    pub fn iterations(&self) -> usize {
        self.residual.len().saturating_sub(1)
    }

    pub fn converged(&self) -> bool {
        self.outcome == Outcome::Converged
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residual.last().copied()
    }

    pub fn total_map_evals(&self) -> u64 {
        self.map_evals.last().copied().unwrap_or(0)
    }

    /// CSV with header `iter,residual,rmse_error,map_evals`; missing errors
    /// are left empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,residual,rmse_error,map_evals\n");
        for k in 0..self.len() {
            let rmse = self.rmse_error[k].map(fmt_f64).unwrap_or_default();
            let _ = writeln!(s, "{k},{},{rmse},{}", fmt_f64(self.residual[k]), self.map_evals[k]);
        }
        s
    }
}

/// Shared bookkeeping for a solver run.
pub(crate) struct Recorder<'a> {
    trace: RunTrace,
    reference: Option<&'a StackedPoint>,
    evals: u64,
    tol: f64,
    keep_iterates: bool,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(label: &str, reference: Option<&'a StackedPoint>, cfg: &SolverConfig) -> Self {
        Recorder {
            trace: RunTrace::new(label),
            reference,
            evals: 0,
            tol: cfg.tol,
            keep_iterates: cfg.record_iterates,
        }
    }

    pub(crate) fn count(&mut self, evals: u64) {
        self.evals += evals;
    }

    /// Records the residual at `v`; returns the stop reason if the run ends here.
    pub(crate) fn record(&mut self, v: &StackedPoint, residual: f64) -> Option<Outcome> {
        let rmse = self.reference.map(|r| v.rms_distance(r));
        self.trace.push(residual, rmse, self.evals);
        if self.keep_iterates {
            self.trace.iterates.push(v.clone());
        }
        if !residual.is_finite() || !v.is_finite() {
            Some(Outcome::NonFinite)
        } else if residual <= self.tol {
            Some(Outcome::Converged)
        } else if residual > DIVERGENCE_THRESHOLD {
            Some(Outcome::Diverged)
        } else {
            None
        }
    }

    pub(crate) fn trace_mut(&mut self) -> &mut RunTrace {
        &mut self.trace
    }

    /// Closes the run and extracts the solution at `v`.
    pub(crate) fn finish(mut self, p: &Problem, v: &StackedPoint, outcome: Outcome) -> Result<CESolution> {
        self.trace.outcome = outcome;
        if outcome == Outcome::NonFinite {
            return Err(Error::NonFinite {
                trace: Box::new(self.trace),
            });
        }
        p.extract_solution(v, self.trace)
    }
}

/// A CE solver backend.
pub trait Solver: Send + Sync {
    /// Label used in traces and output file names.
    fn label(&self) -> &str;

    fn solve(&self, problem: &Problem, v0: &StackedPoint, reference: Option<&StackedPoint>) -> Result<CESolution>;
}

pub type SolverFactory = fn(&SolverConfig) -> Result<Box<dyn Solver>>;

/// Solver backends by name.
pub struct SolverRegistry {
    factories: BTreeMap<String, SolverFactory>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = SolverRegistry::empty();
        r.register("admm", |cfg| Ok(Box::new(Mann::new("admm", cfg.clone().with_rho(0.5))?)));
        r.register("mann08", |cfg| Ok(Box::new(Mann::new("mann08", cfg.clone().with_rho(0.8))?)));
        r.register("mann", |cfg| Ok(Box::new(Mann::new("mann", cfg.clone())?)));
        r.register("precond-mann", |cfg| Ok(Box::new(PreconditionedMann::from_config(cfg.clone())?)));
        r.register("newton-fg", |cfg| Ok(Box::new(Newton::new(NewtonTarget::FG, cfg.clone())?)));
        r.register("newton-mann", |cfg| Ok(Box::new(Newton::new(NewtonTarget::Mann, cfg.clone())?)));
        r.register("jfnk", |cfg| Ok(Box::new(Jfnk::new(cfg.clone())?)));
        r
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, factory: SolverFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, cfg: &SolverConfig) -> Result<Box<dyn Solver>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownSolver(name.to_string()))?;
        factory(cfg)
    }
}
