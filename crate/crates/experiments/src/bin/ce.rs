use std::path::PathBuf;
use std::process::ExitCode;

use ce_core::agents::NoiseParams;
use ce_core::SolverConfig;
use ce_experiments::denoise::{run_denoise, ImageSource};
use ce_experiments::stochastic::{run_stochastic, StochasticOptions, DEFAULT_MAX_OUTER, DEFAULT_STOCHASTIC_SEED};
use ce_experiments::summary::ExperimentSummary;
use ce_experiments::toy::run_toy2d;
use ce_experiments::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ce", about = "Consensus equilibrium experiments")]
struct Cli {
    /// Residual tolerance ‖F(v) − G(v)‖.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap per solver run.
    #[arg(long, global = true, default_value_t = 10_000)]
    max_iter: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Planar problem with a weakly expanding agent.
    Toy2d {
        #[arg(long)]
        out: PathBuf,
    },
    /// Quadratic prox coupled with a blended row-stochastic map.
    Stochastic {
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = DEFAULT_STOCHASTIC_SEED)]
        seed: u64,
        /// Comma-separated solver names.
        #[arg(long, value_delimiter = ',', default_value = "admm,mann08,jfnk")]
        solvers: Vec<String>,
        /// Krylov dimension for jfnk; chosen from the spectrum when omitted.
        #[arg(long)]
        krylov_dim: Option<usize>,
        /// Outer-step cap for Newton-type solvers.
        #[arg(long, default_value_t = DEFAULT_MAX_OUTER)]
        max_outer: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-denoiser fusion on a phantom or a PGM image.
    Denoise {
        /// `phantom` or a path to a PGM file.
        #[arg(long, default_value = "phantom")]
        input: String,
        /// Noise level on the [0, 1] scale; accepts fractions such as `20/255`.
        #[arg(long, value_parser = parse_fraction)]
        sigma_eta: f64,
        /// Weight cutoff; accepts fractions.
        #[arg(long, value_parser = parse_fraction, default_value = "5/255")]
        h: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let den: f64 = den.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            num / den
        }
        None => s.trim().parse().map_err(|e| format!("{s}: {e}"))?,
    };
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(format!("{s}: expected a positive number"))
    }
}

fn run(cli: Cli) -> Result<Vec<ExperimentSummary>> {
    let base = SolverConfig::default().with_tol(cli.tol).with_max_iter(cli.max_iter);
    base.validate()?;
    match cli.command {
        Command::Toy2d { out } => run_toy2d(&out, &base),
        Command::Stochastic {
            r,
            seed,
            solvers,
            krylov_dim,
            max_outer,
            out,
        } => {
            let opts = StochasticOptions {
                solvers,
                krylov_dim,
                max_outer,
                ..StochasticOptions::new(r, seed)
            };
            run_stochastic(&opts, &base, &out)
        }
        Command::Denoise {
            input,
            sigma_eta,
            h,
            seed,
            out,
        } => {
            let standard = NoiseParams::standard(sigma_eta)?;
            let np = NoiseParams::new(sigma_eta, standard.sigma_list, h, sigma_eta)?;
            run_denoise(&ImageSource::parse(&input), &np, seed, &base, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summaries) => {
            for s in &summaries {
                let residual = s.final_residual.map_or("n/a".into(), |r| format!("{r:.3e}"));
                println!(
                    "{:<12} {:<15} iterations {:>6}  evals {:>7}  residual {residual}",
                    s.solver, s.outcome, s.iterations, s.map_evals
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("20/255").unwrap(), 20.0 / 255.0);
        assert_eq!(parse_fraction("0.1").unwrap(), 0.1);
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("-3").is_err());
        assert!(parse_fraction("x/2").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
