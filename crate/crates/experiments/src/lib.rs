//! Reproducible experiments for consensus equilibrium solvers.
//!
//! Each experiment writes plain-text artifacts to an output directory:
//! per-solver residual traces (`trace_<solver>.csv`), a `summary.json` with
//! one [`ExperimentSummary`] per solver run, and experiment-specific files
//! (`spectrum.json`, trajectories, PGM images, a PSNR table). Outputs depend
//! only on the seed and flags.

pub mod denoise;
pub mod error;
pub mod image;
pub mod run;
pub mod stochastic;
pub mod summary;
pub mod toy;

pub use denoise::{run_denoise, run_denoise_full, DenoiseRun, ImageSource};
pub use error::{ExperimentError, Result};
pub use image::{phantom, psnr, Image};
pub use stochastic::{run_stochastic, run_stochastic_full, StochasticOptions, StochasticRun};
pub use summary::{ExperimentSummary, PsnrReport};
pub use toy::{run_toy2d, toy_problem};
