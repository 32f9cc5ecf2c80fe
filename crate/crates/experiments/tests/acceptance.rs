//! Exit criteria, one line each. Runs without the libtest harness so every
//! line prints; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ce_core::agents::{Agent, LinearAgent, NoiseParams};
use ce_core::analysis::{
    affine_ce_oracle, consensus_opt_oracle, mann_spectrum_check, max_modulus, spectrum_of, t_jacobian,
    QuadraticObjective,
};
use ce_core::solvers::{jfnk_solve, mann_solve, preconditioned_mann_solve};
use ce_core::tensor::{eigenvalues, ComplexScalar, Matrix, Rng, Vector};
use ce_core::{denoiser_weights, CESolution, Problem, SolverConfig, Weights};
use ce_experiments::denoise::{run_denoise_full, ImageSource};
use ce_experiments::stochastic::{run_stochastic_full, StochasticOptions, DEFAULT_STOCHASTIC_SEED};
use ce_experiments::toy::run_toy2d_runs;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() <= limit_secs
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// Shared by criteria 1 and 2.

// σ = 0.3 amplifies the residual into x* by roughly 1/σ²
const OPT_TOL: f64 = 1e-10;

struct OptCase {
    seed: u64,
    problem: Problem,
    minimizer: Vector,
}

fn opt_cases() -> Vec<OptCase> {
    let sigmas = [0.3, 1.0, 3.0];
    (0..20u64)
        .map(|seed| {
            let mut rng = Rng::new(0xACCE_0000 + seed);
            let n = 1 + (rng.next_u64() % 10) as usize;
            let agents = 2 + (seed % 3) as usize;
            let sigma = sigmas[(seed / 3 % 3) as usize];
            let fs: Vec<QuadraticObjective> =
                (0..agents).map(|_| QuadraticObjective::random_pd(n, &mut rng).unwrap()).collect();
            let weights = Weights::uniform(agents);
            let minimizer = consensus_opt_oracle(&fs, &weights).unwrap();
            let list: Vec<Arc<dyn Agent>> =
                fs.iter().map(|f| Arc::new(f.prox_agent(sigma).unwrap()) as Arc<dyn Agent>).collect();
            OptCase {
                seed,
                problem: Problem::new(list, weights).unwrap(),
                minimizer,
            }
        })
        .collect()
}

type OptSolve<'a> = (u64, &'static str, &'a Problem, &'a Vector, CESolution);

fn opt_solutions(cases: &[OptCase]) -> Vec<OptSolve<'_>> {
    let cfg = SolverConfig::default().with_tol(OPT_TOL);
    let mut out = Vec::new();
    for c in cases {
        let v0 = c.problem.zeros();
        let krylov = cfg.clone().with_krylov_dim(10.min(c.problem.stacked_dim()));
        let j = jfnk_solve(&c.problem, &v0, &krylov, None).unwrap();
        let m = mann_solve(&c.problem, &v0, &cfg.clone().with_rho(0.5), None).unwrap();
        out.push((c.seed, "jfnk", &c.problem, &c.minimizer, j));
        out.push((c.seed, "mann", &c.problem, &c.minimizer, m));
    }
    out
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let cases = opt_cases();
    let sols = opt_solutions(&cases);
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (seed, name, _, minimizer, sol) in &sols {
        let err = max_abs_diff(&sol.x_star, minimizer);
        worst = worst.max(err);
        if !sol.converged || err > 1e-7 {
            failures.push(format!("{name}@{seed}"));
        }
    }
    verdict(
        failures.is_empty() && within(elapsed, 10.0),
        format!(
            "40 solves, worst max-norm error {worst:.2e} (limit 1e-7), {:.2}s (limit 10s), failures {failures:?}",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let cases = opt_cases();
    let sols = opt_solutions(&cases);
    let mut worst_ratio: f64 = 0.0;
    let mut failures = Vec::new();
    let mut checked = 0;
    for (seed, name, p, _, sol) in sols.iter().filter(|s| s.4.converged) {
        checked += 1;
        let t = p.apply_t(&sol.v_star).unwrap();
        let gap: f64 = t
            .as_slice()
            .iter()
            .zip(sol.v_star.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst_ratio = worst_ratio.max(gap / OPT_TOL);
        let ce_ok = p.verify_ce(&sol.x_star, &sol.u_star, 10.0 * OPT_TOL).unwrap();
        if gap > 2.0 * OPT_TOL || !ce_ok {
            failures.push(format!("{name}@{seed}"));
        }
    }
    verdict(
        failures.is_empty() && checked > 0,
        format!("{checked} converged runs, worst ‖T(v)−v‖/tol {worst_ratio:.3} (limit 2), failures {failures:?}"),
    )
}

fn first_below(values: &[f64], limit: f64) -> Option<usize> {
    values.iter().position(|&r| r <= limit)
}

fn criterion_3() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = SolverConfig::default().with_tol(1e-10).with_max_iter(500);
    let runs = run_toy2d_runs(dir.path(), &cfg).unwrap();
    let elapsed = start.elapsed();
    let (fg, nm, admm) = (&runs[0], &runs[1], &runs[2]);
    let hit_fg = first_below(&fg.trace.residual, 1e-10);
    let hit_nm = first_below(&nm.trace.residual, 1e-10);
    let newton_ok = hit_fg.is_some_and(|k| k <= 25) && hit_nm.is_some_and(|k| k <= 25);
    let agree = match (&fg.solution, &nm.solution) {
        (Some(a), Some(b)) => max_abs_diff(&a.x_star, &b.x_star),
        _ => f64::INFINITY,
    };
    let admm_window = &admm.trace.residual[..admm.trace.residual.len().min(501)];
    let admm_best = admm_window.iter().cloned().fold(f64::INFINITY, f64::min);
    let admm_ok = admm_best > 1e-6;
    verdict(
        newton_ok && agree <= 1e-8 && admm_ok && within(elapsed, 1.0),
        format!(
            "newton-fg {} ({} rows, final residual {:.2e}), newton-mann {} ({} rows, final residual {:.2e}), \
             x* gap {agree:.2e}, admm best residual in 500 iterations {admm_best:.2e} (must exceed 1e-6), {:.3}s",
            hit_fg.map_or("never reached 1e-10".into(), |k| format!("reached 1e-10 at iteration {k}")),
            fg.trace.len(),
            fg.trace.final_residual().unwrap_or(f64::NAN),
            hit_nm.map_or("never reached 1e-10".into(), |k| format!("reached 1e-10 at iteration {k}")),
            nm.trace.len(),
            nm.trace.final_residual().unwrap_or(f64::NAN),
            elapsed.as_secs_f64()
        ),
    )
}

fn rmse_hit(run: &ce_experiments::run::SolverRun, limit: f64) -> Option<usize> {
    run.trace.rmse_error.iter().position(|e| e.is_some_and(|e| e <= limit))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    // RMSE 1e-8 sits below the residual at which the default tolerance stops
    let cfg = SolverConfig::default().with_tol(1e-10).with_max_iter(10_000);
    let mut notes = Vec::new();
    let mut pass = true;

    let dir = tempfile::tempdir().unwrap();
    let mut opts = StochasticOptions::new(1.02, DEFAULT_STOCHASTIC_SEED);
    opts.solvers = vec!["admm".into(), "jfnk".into()];
    opts.krylov_dim = Some(10);
    let stable = run_stochastic_full(&opts, &cfg, dir.path()).unwrap();
    let gate = stable.spectrum.max_real < 1.0;
    let admm = rmse_hit(&stable.runs[0], 1e-8);
    let jfnk = rmse_hit(&stable.runs[1], 1e-8);
    pass &= gate && admm.is_some_and(|k| k <= 10_000) && jfnk.is_some_and(|k| k <= 50);
    notes.push(format!(
        "r=1.02 max_real {:.5}, admm RMSE≤1e-8 at {admm:?}, jfnk(10) at {jfnk:?}",
        stable.spectrum.max_real
    ));

    let dir = tempfile::tempdir().unwrap();
    let mut opts = StochasticOptions::new(1.06, DEFAULT_STOCHASTIC_SEED);
    opts.solvers = vec!["admm".into(), "jfnk".into()];
    opts.krylov_dim = Some(75);
    let unstable = run_stochastic_full(&opts, &cfg, dir.path()).unwrap();
    let gate = unstable.spectrum.max_real > 1.0;
    let admm_conv = unstable.runs[0].trace.converged();
    let jfnk = rmse_hit(&unstable.runs[1], 1e-8);
    pass &= gate && !admm_conv && jfnk.is_some();
    notes.push(format!(
        "r=1.06 max_real {:.5}, admm converged={admm_conv}, jfnk(75) RMSE≤1e-8 at {jfnk:?}",
        unstable.spectrum.max_real
    ));

    let elapsed = start.elapsed();
    verdict(
        pass && within(elapsed, 60.0),
        format!("{}; {:.2}s (limit 60s)", notes.join("; "), elapsed.as_secs_f64()),
    )
}

/// `Q diag(λ) Qᵀ` with `Q` from Gram–Schmidt on seeded normals.
fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut Rng) -> Matrix {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < n {
        let mut v = rng.normals(n);
        for b in &q {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.iter().map(|x| x / norm).collect());
        }
    }
    let lambda: Vec<f64> = (0..n).map(|_| lo + (hi - lo) * rng.uniform()).collect();
    let mut h = Matrix::from_fn(n, n, |i, j| (0..n).map(|k| q[k][i] * lambda[k] * q[k][j]).sum());
    // exact symmetry
    let t = h.transpose();
    h = h.add_scaled(1.0, &t).scaled(0.5);
    h
}

fn prox_problem(rng: &mut Rng) -> Problem {
    let n = 2 + (rng.next_u64() % 5) as usize;
    let agents = 2 + (rng.next_u64() % 3) as usize;
    let sigma = 0.5 + 2.0 * rng.uniform();
    let list: Vec<Arc<dyn Agent>> = (0..agents)
        .map(|_| Arc::new(QuadraticObjective::random_pd(n, rng).unwrap().prox_agent(sigma).unwrap()) as Arc<dyn Agent>)
        .collect();
    Problem::with_uniform_weights(list).unwrap()
}

fn criterion_5() -> Verdict {
    let mut failures = Vec::new();
    let mut worst_increase: f64 = 0.0;
    let mut worst_replay: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = Rng::new(0x5EED_0500 + seed);
        let p = prox_problem(&mut rng);
        let h = random_spd(p.stacked_dim(), 0.1, 0.9, &mut rng);
        let reference = affine_ce_oracle(&p).unwrap();
        let cfg = SolverConfig::default().with_tol(1e-8).with_max_iter(100_000);
        let sol = preconditioned_mann_solve(&p, &p.zeros(), &h, &cfg, Some(&reference)).unwrap();
        let e = &sol.trace.hinv_error;
        let increase = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        worst_increase = worst_increase.max(increase);
        let close = sol.v_star.rms_distance(&reference) * (p.stacked_dim() as f64).sqrt();
        if !sol.converged || sol.residual > 1e-8 || increase > 0.0 || close > 1e-6 {
            failures.push(format!("seed {seed}"));
        }

        let rho = 0.1 + 0.8 * rng.uniform();
        let steps = SolverConfig::default().with_tol(1e-300).with_max_iter(200).with_iterates(true);
        let scaled = Matrix::identity(p.stacked_dim()).scaled(rho);
        let pre = preconditioned_mann_solve(&p, &p.zeros(), &scaled, &steps, None).unwrap();
        let plain = mann_solve(&p, &p.zeros(), &steps.clone().with_rho(rho), None).unwrap();
        let replay = pre
            .trace
            .iterates
            .iter()
            .zip(&plain.trace.iterates)
            .map(|(a, b)| max_abs_diff(a.as_slice(), b.as_slice()))
            .fold(0.0, f64::max);
        worst_replay = worst_replay.max(replay);
        if replay > 1e-14 || pre.trace.iterates.len() != plain.trace.iterates.len() {
            failures.push(format!("replay seed {seed}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "10 problems, largest step change in H⁻¹ error {worst_increase:.2e} (must be ≤ 0), \
             H=ρI replay gap {worst_replay:.2e} (limit 1e-14), failures {failures:?}"
        ),
    )
}

/// Greedy nearest matching; returns the largest matched distance.
fn multiset_distance(a: &[ComplexScalar], b: &[ComplexScalar]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|l, r| l.1.total_cmp(&r.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn affine_problem(rng: &mut Rng) -> Problem {
    let n = 2 + (rng.next_u64() % 4) as usize;
    let agents = 2 + (rng.next_u64() % 2) as usize;
    let list: Vec<Arc<dyn Agent>> = (0..agents)
        .map(|_| {
            // αI + βR spans contractive to strongly non-normal agents
            let alpha = 0.2 + 0.6 * rng.uniform();
            let beta = 1.6 * rng.uniform() / (n as f64).sqrt();
            let m = Matrix::from_fn(n, n, |i, j| {
                beta * (2.0 * rng.uniform() - 1.0) + if i == j { alpha } else { 0.0 }
            });
            let b: Vector = (0..n).map(|_| rng.uniform()).collect();
            Arc::new(LinearAgent::new("affine", m, b).unwrap()) as Arc<dyn Agent>
        })
        .collect();
    Problem::with_uniform_weights(list).unwrap()
}

fn criterion_6() -> Verdict {
    let mut worst_eig: f64 = 0.0;
    let mut mismatches = Vec::new();
    let (mut converging, mut diverging, mut boundary) = (0, 0, 0);
    for seed in 0..10u64 {
        let mut rng = Rng::new(0x5EED_0600 + seed);
        let p = affine_problem(&mut rng);
        let jt = t_jacobian(&p, &p.zeros()).unwrap();
        let report = spectrum_of(&jt).unwrap();
        for k in 1..=9 {
            let rho = k as f64 / 10.0;
            let relaxed = Matrix::identity(jt.rows()).scaled(1.0 - rho).add_scaled(rho, &jt);
            let direct = eigenvalues(&relaxed).unwrap();
            let predicted = mann_spectrum_check(&report, rho);
            worst_eig = worst_eig.max(multiset_distance(&predicted, &direct));

            let modulus = max_modulus(&predicted);
            if (modulus - 1.0).abs() <= 0.02 {
                boundary += 1;
                continue;
            }
            let cfg = SolverConfig::default().with_rho(rho).with_tol(1e-8).with_max_iter(20_000);
            let converged = match mann_solve(&p, &p.zeros(), &cfg, None) {
                Ok(sol) => sol.converged,
                Err(_) => false,
            };
            if modulus < 1.0 {
                converging += 1;
            } else {
                diverging += 1;
            }
            if converged != (modulus < 1.0) {
                mismatches.push(format!("seed {seed} rho {rho} modulus {modulus:.4}"));
            }
        }
    }
    verdict(
        worst_eig <= 1e-9 && mismatches.is_empty(),
        format!(
            "eigenvalue multiset gap {worst_eig:.2e} (limit 1e-9); predicted {converging} convergent, \
             {diverging} divergent, {boundary} boundary skipped; mismatches {mismatches:?}"
        ),
    )
}

fn criterion_7() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let s = 20.0 / 255.0;
    let np = NoiseParams::new(s, vec![s], 5.0 / 255.0, s).unwrap();
    let source = ImageSource::Phantom { width: 64, height: 64 };
    let run = run_denoise_full(&source, &np, 7, &SolverConfig::default(), dir.path()).unwrap();
    let direct = run.single[0].pixels();
    let gap = max_abs_diff(run.ce.pixels(), direct);
    let elapsed = start.elapsed();
    verdict(
        run.summary.converged && gap <= 1e-8 && within(elapsed, 5.0),
        format!(
            "64x64, {} after {} iterations, max |x* − F(y)| {gap:.2e} (limit 1e-8), {:.2}s (limit 5s)",
            run.summary.outcome,
            run.summary.iterations,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Verdict {
    let levels = [20.0, 30.0, 40.0];
    let cfg = SolverConfig::default().with_tol(1e-6);
    let results: Vec<String> = std::thread::scope(|scope| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&level| {
                let cfg = cfg.clone();
                scope.spawn(move || {
                    let np = NoiseParams::standard(level / 255.0).unwrap();
                    let w = denoiser_weights(&np).unwrap();
                    let mu = w.as_slice();
                    let sum: f64 = mu.iter().sum();
                    let weights_ok = (sum - 1.0).abs() <= 1e-15 && mu[mu.len() - 1] == 0.5;
                    let dir = tempfile::tempdir().unwrap();
                    let source = ImageSource::Phantom { width: 64, height: 64 };
                    let run = run_denoise_full(&source, &np, 0, &cfg, dir.path()).unwrap();
                    let residual = run.summary.final_residual.unwrap_or(f64::INFINITY);
                    let psnr = &run.psnr;
                    let recorded = psnr.ce.is_some() && psnr.baseline.is_some();
                    let ok = run.summary.converged && residual <= 1e-6 && weights_ok && recorded;
                    format!(
                        "{}{level}/255: {} residual {residual:.2e} after {} iterations, PSNR ce {:.2} baseline {:.2}, \
                         weights ok {weights_ok}",
                        if ok { "" } else { "!" },
                        run.summary.outcome,
                        run.summary.iterations,
                        psnr.ce.unwrap_or(f64::NAN),
                        psnr.baseline.unwrap_or(f64::NAN),
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let pass = results.iter().all(|r| !r.starts_with('!'));
    verdict(pass, results.join("; "))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Verdict {
    let cfg = SolverConfig::default().with_max_iter(300);
    type Experiment<'a> = (&'a str, Box<dyn Fn(&Path) + 'a>);
    let experiments: [Experiment; 3] = [
        (
            "toy2d",
            Box::new(|d: &Path| {
                ce_experiments::run_toy2d(d, &cfg).unwrap();
            }),
        ),
        (
            "stochastic",
            Box::new(|d: &Path| {
                ce_experiments::run_stochastic(&StochasticOptions::new(1.02, DEFAULT_STOCHASTIC_SEED), &cfg, d).unwrap();
            }),
        ),
        (
            "denoise",
            Box::new(|d: &Path| {
                let np = NoiseParams::standard(30.0 / 255.0).unwrap();
                let source = ImageSource::Phantom { width: 32, height: 32 };
                ce_experiments::run_denoise(&source, &np, 5, &cfg, d).unwrap();
            }),
        ),
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for (name, run) in &experiments {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(a.path());
        run(b.path());
        let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
        files += sa.len();
        if sa != sb {
            differing.push(*name);
        }
    }
    verdict(
        differing.is_empty() && files > 0,
        format!("{files} files compared across toy2d, stochastic and denoise, differing experiments {differing:?}"),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("prox equilibrium matches weighted minimizer", criterion_1),
        ("converged runs are fixed points of T", criterion_2),
        ("planar expanding problem", criterion_3),
        ("row-stochastic family", criterion_4),
        ("preconditioned Mann", criterion_5),
        ("relaxed spectrum law", criterion_6),
        ("single denoiser reduces to denoised data", criterion_7),
        ("five-denoiser phantom runs", criterion_8),
        ("byte-identical reruns", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    // panics are reported on the criterion line
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "{id} [{}] {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
