//! Several linear denoisers and a data-fidelity prox fused with adaptive weights.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ce_core::agents::{data_fidelity_agent, gaussian_denoiser_agent, Agent, GaussianDenoiser, NoiseParams};
use ce_core::solvers::Mann;
use ce_core::tensor::Rng;
use ce_core::{denoiser_weights, CESolution, Error, Problem, SolverConfig, StackedPoint, Weights};

use crate::error::{ExperimentError, Result};
use crate::image::{phantom, psnr, Image};
use crate::run::{run_solver, write_trace, SolverRun};
use crate::summary::{ensure_dir, finite, write_summaries, write_text, ExperimentSummary, PsnrReport};

pub const DEFAULT_PHANTOM_SIZE: usize = 64;
/// Slack allowed on the denoiser spectrum certificate.
const SPECTRUM_SLACK: f64 = 1e-12;
const VERIFY_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub enum ImageSource {
    Phantom { width: usize, height: usize },
    Pgm(PathBuf),
}

impl ImageSource {
    /// `phantom` or a path to a PGM file.
    pub fn parse(s: &str) -> Self {
        if s == "phantom" {
            ImageSource::Phantom {
                width: DEFAULT_PHANTOM_SIZE,
                height: DEFAULT_PHANTOM_SIZE,
            }
        } else {
            ImageSource::Pgm(PathBuf::from(s))
        }
    }

    pub fn load(&self) -> Result<Image> {
        match self {
            ImageSource::Phantom { width, height } => phantom(*width, *height),
            ImageSource::Pgm(path) => Image::read_pgm(path),
        }
    }
}

/// Checks that every agent has a symmetric linear part with spectrum in
/// `[0, 1]`. Then each `2F_i − I` is nonexpansive, and so is `T`.
pub fn certify_nonexpansive(denoisers: &[GaussianDenoiser], fidelity_contraction: f64) -> Result<()> {
    for d in denoisers {
        let (lo, hi) = d.spectrum_bounds();
        if lo < -SPECTRUM_SLACK || hi > 1.0 + SPECTRUM_SLACK {
            return Err(Error::InvalidConfig(format!(
                "{} has spectrum [{lo}, {hi}], outside [0, 1]",
                d.label()
            ))
            .into());
        }
    }
    if !(0.0..=1.0).contains(&fidelity_contraction) {
        return Err(Error::InvalidConfig(format!("fidelity contraction {fidelity_contraction} outside [0, 1]")).into());
    }
    Ok(())
}

/// Denoiser weights rescaled to sum to one once the fidelity slot is dropped.
pub fn baseline_weights(weights: &Weights) -> Vec<f64> {
    let mu = weights.as_slice();
    let denoisers = &mu[..mu.len() - 1];
    let total: f64 = denoisers.iter().sum();
    let out: Vec<f64> = denoisers.iter().map(|m| m / total).collect();
    let sum: f64 = out.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-12, "baseline weights sum to {sum}");
    out
}

/// Weighted combination of the single-denoiser estimates.
pub fn baseline_estimate(estimates: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; estimates[0].len()];
    for (est, w) in estimates.iter().zip(weights) {
        out.iter_mut().zip(est).for_each(|(o, e)| *o += w * e);
    }
    out
}

/// Agents `F_1..F_K` (denoisers) and `F_{K+1}` (fidelity) with adaptive weights.
pub fn denoise_problem(noisy: &Image, np: &NoiseParams) -> Result<(Problem, Vec<GaussianDenoiser>)> {
    let (w, h) = (noisy.width(), noisy.height());
    let denoisers: Vec<GaussianDenoiser> = np
        .sigma_list
        .iter()
        .map(|&s| gaussian_denoiser_agent(w, h, s))
        .collect::<ce_core::Result<_>>()?;
    let fidelity = data_fidelity_agent(noisy.pixels(), np.sigma_eta, np.sigma_prox)?;
    certify_nonexpansive(&denoisers, fidelity.contraction())?;
    let weights = denoiser_weights(np)?;
    let fidelity_weight = *weights.as_slice().last().expect("fidelity slot");
    assert_eq!(fidelity_weight, 0.5, "fidelity weight must be exactly one half");
    let mut agents: Vec<Arc<dyn Agent>> = denoisers.iter().map(|d| Arc::new(d.clone()) as Arc<dyn Agent>).collect();
    agents.push(Arc::new(fidelity));
    Ok((Problem::new(agents, weights)?, denoisers))
}

pub struct DenoiseRun {
    pub clean: Image,
    pub noisy: Image,
    pub single: Vec<Image>,
    pub baseline: Image,
    pub ce: Image,
    pub weights: Weights,
    pub run: SolverRun,
    pub solution: Option<CESolution>,
    pub psnr: PsnrReport,
    pub summary: ExperimentSummary,
}

fn db(x: &Image, clean: &Image) -> Result<Option<f64>> {
    Ok(finite(psnr(x, clean)?))
}

fn fmt_db(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "inf".into())
}

/// Writes the images as PGM, `trace_admm.csv`, `table.csv` and `summary.json`.
pub fn run_denoise_full(
    source: &ImageSource,
    np: &NoiseParams,
    seed: u64,
    base: &SolverConfig,
    out_dir: &Path,
) -> Result<DenoiseRun> {
    ensure_dir(out_dir)?;
    let clean = source.load()?;
    let noisy = clean.add_gaussian_noise(np.sigma_eta, &mut Rng::new(seed));
    let (problem, denoisers) = denoise_problem(&noisy, np)?;
    let weights = problem.weights().clone();

    let single_px: Vec<Vec<f64>> = denoisers
        .iter()
        .map(|d| d.apply(noisy.pixels()).map(|v| v.into_vec()))
        .collect::<ce_core::Result<_>>()?;
    let baseline = noisy.with_pixels(baseline_estimate(&single_px, &baseline_weights(&weights)))?;
    let single: Vec<Image> = single_px.into_iter().map(|px| noisy.with_pixels(px)).collect::<Result<_>>()?;

    let solver = Mann::new("admm", base.clone().with_rho(0.5))?;
    let v0 = StackedPoint::replicate(noisy.pixels(), problem.num_agents());
    let run = run_solver(&solver, &problem, &v0, None)?;
    let solution = run.solution.clone();
    let ce = match &solution {
        Some(sol) => noisy.with_pixels(sol.x_star.to_vec())?,
        None => noisy.clone(),
    };
    if let Some(sol) = solution.as_ref().filter(|s| s.converged) {
        if !problem.verify_ce(&sol.x_star, &sol.u_star, VERIFY_TOL)? {
            return Err(ExperimentError::Verification(format!(
                "converged solution fails the equilibrium check at {VERIFY_TOL:e}"
            )));
        }
    }

    let report = PsnrReport {
        noisy: db(&noisy, &clean)?,
        single: single.iter().map(|s| db(s, &clean)).collect::<Result<_>>()?,
        baseline: db(&baseline, &clean)?,
        ce: if solution.is_some() { db(&ce, &clean)? } else { None },
    };

    clean.write_pgm(out_dir.join("clean.pgm"))?;
    noisy.write_pgm(out_dir.join("noisy.pgm"))?;
    for (k, img) in single.iter().enumerate() {
        img.write_pgm(out_dir.join(format!("denoiser_{}.pgm", k + 1)))?;
    }
    baseline.write_pgm(out_dir.join("baseline.pgm"))?;
    ce.write_pgm(out_dir.join("ce.pgm"))?;
    write_trace(out_dir, &run.trace)?;

    let mut table = String::from("sigma_eta,noisy");
    for s in &np.sigma_list {
        let _ = write!(table, ",denoiser_{:.1}", s * 255.0);
    }
    table.push_str(",baseline,ce\n");
    let _ = write!(table, "{:.1}/255,{}", np.sigma_eta * 255.0, fmt_db(report.noisy));
    for s in &report.single {
        let _ = write!(table, ",{}", fmt_db(*s));
    }
    let _ = writeln!(table, ",{},{}", fmt_db(report.baseline), fmt_db(report.ce));
    write_text(&out_dir.join("table.csv"), &table)?;

    let mut summary = ExperimentSummary::from_trace("denoise", Some(seed), &run.trace, run.wall_time);
    summary.psnr = Some(report.clone());
    write_summaries(out_dir, std::slice::from_ref(&summary))?;

    Ok(DenoiseRun {
        clean,
        noisy,
        single,
        baseline,
        ce,
        weights,
        run,
        solution,
        psnr: report,
        summary,
    })
}

pub fn run_denoise(
    source: &ImageSource,
    np: &NoiseParams,
    seed: u64,
    base: &SolverConfig,
    out_dir: &Path,
) -> Result<Vec<ExperimentSummary>> {
    Ok(vec![run_denoise_full(source, np, seed, base, out_dir)?.summary])
}
