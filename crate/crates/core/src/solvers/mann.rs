use super::{Outcome, Recorder, Solver, SolverConfig};
use crate::equilibrium::{CESolution, Problem, StackedPoint};
use crate::error::{Error, Result};
use crate::tensor::{Cholesky, Matrix};

/// One Mann update `w ← (1 − ρ)w + ρT(w)`, given `f = F(w)`.
fn relax(p: &Problem, w: &StackedPoint, f: &StackedPoint, rho: f64) -> StackedPoint {
    let t = p.t_from_f(w, f);
    let mut next = w.clone();
    for (x, ti) in next.as_mut_slice().iter_mut().zip(t.as_slice()) {
        *x = (1.0 - rho) * *x + rho * ti;
    }
    next
}

/// Single Mann step from `w`.
pub fn mann_step(p: &Problem, w: &StackedPoint, rho: f64) -> Result<StackedPoint> {
    let f = p.apply_f(w)?;
    Ok(relax(p, w, &f, rho))
}

/// `v ← (I − H)v + H T(v)`, given `f = F(v)`.
fn precondition(p: &Problem, v: &StackedPoint, f: &StackedPoint, h: &Matrix) -> StackedPoint {
    let t = p.t_from_f(v, f);
    let hv = h.matvec(v.as_slice());
    let ht = h.matvec(t.as_slice());
    let mut next = v.clone();
    for ((x, a), b) in next.as_mut_slice().iter_mut().zip(hv.iter()).zip(ht.iter()) {
        *x = *x - a + b;
    }
    next
}

/// Single preconditioned Mann step from `v`.
pub fn preconditioned_step(p: &Problem, v: &StackedPoint, h: &Matrix) -> Result<StackedPoint> {
    if h.rows() != v.len() || h.cols() != v.len() {
        return Err(Error::dims(v.len(), h.rows()));
    }
    let f = p.apply_f(v)?;
    Ok(precondition(p, v, &f, h))
}

/// Mann iteration `w^{k+1} = (1 − ρ)w^k + ρT(w^k)`. With ρ = 0.5 this is
/// the ADMM-equivalent iteration.
pub fn mann_solve(
    p: &Problem,
    v0: &StackedPoint,
    cfg: &SolverConfig,
    reference: Option<&StackedPoint>,
) -> Result<CESolution> {
    Mann::new(if cfg.rho == 0.5 { "admm" } else { "mann" }, cfg.clone())?.solve(p, v0, reference)
}

#[derive(Clone, Debug)]
pub struct Mann {
    label: String,
    cfg: SolverConfig,
}

impl Mann {
    pub fn new(label: impl Into<String>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Mann {
            label: label.into(),
            cfg,
        })
    }
}

impl Solver for Mann {
    fn label(&self) -> &str {
        &self.label
    }

    fn solve(&self, p: &Problem, v0: &StackedPoint, reference: Option<&StackedPoint>) -> Result<CESolution> {
        p.check(v0)?;
        let mut rec = Recorder::new(&self.label, reference, &self.cfg);
        let mut w = v0.clone();
        let mut k = 0;
        let outcome = loop {
            // F(w) serves both the residual and T(w)
            let f = p.apply_f_unchecked(&w);
            rec.count(1);
            let residual = p.fg_from_f(&w, &f).norm();
            if let Some(stop) = rec.record(&w, residual) {
                break stop;
            }
            if k == self.cfg.max_iter {
                break Outcome::MaxIterations;
            }
            w = relax(p, &w, &f, self.cfg.rho);
            k += 1;
        };
        rec.finish(p, &w, outcome)
    }
}

/// Anisotropic preconditioned Mann iteration with a symmetric positive
/// definite `H` whose eigenvalues lie below one.
#[derive(Clone, Debug)]
pub struct PreconditionedMann {
    cfg: SolverConfig,
    h: Matrix,
    chol: Cholesky,
}

impl PreconditionedMann {
    pub fn new(h: Matrix, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if !h.is_square() {
            return Err(Error::BadPreconditioner("H must be square".into()));
        }
        if !h.is_symmetric(1e-12 * h.max_abs()) {
            return Err(Error::BadPreconditioner("H must be symmetric".into()));
        }
        // H ≻ 0 and I − H ≻ 0 together place every eigenvalue in (0, 1)
        let chol = Cholesky::factor(&h)
            .map_err(|_| Error::BadPreconditioner("H must be positive definite".into()))?;
        let complement = Matrix::identity(h.rows()).add_scaled(-1.0, &h);
        Cholesky::factor(&complement)
            .map_err(|_| Error::BadPreconditioner("largest eigenvalue of H must be below 1".into()))?;
        Ok(PreconditionedMann { cfg, h, chol })
    }

    pub fn from_config(cfg: SolverConfig) -> Result<Self> {
        let h = cfg
            .h
            .clone()
            .ok_or_else(|| Error::BadPreconditioner("no preconditioner configured".into()))?;
        PreconditionedMann::new(h, cfg)
    }
}

impl Solver for PreconditionedMann {
    fn label(&self) -> &str {
        "precond-mann"
    }

    fn solve(&self, p: &Problem, v0: &StackedPoint, reference: Option<&StackedPoint>) -> Result<CESolution> {
        p.check(v0)?;
        if self.h.rows() != v0.len() {
            return Err(Error::dims(v0.len(), self.h.rows()));
        }
        let mut rec = Recorder::new(self.label(), reference, &self.cfg);
        let mut v = v0.clone();
        let mut k = 0;
        let outcome = loop {
            let f = p.apply_f_unchecked(&v);
            rec.count(1);
            let residual = p.fg_from_f(&v, &f).norm();
            if let Some(r) = reference {
                let diff: Vec<f64> = v.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a - b).collect();
                let e = self.chol.inv_norm(&diff)?;
                rec.trace_mut().hinv_error.push(e);
            }
            if let Some(stop) = rec.record(&v, residual) {
                break stop;
            }
            if k == self.cfg.max_iter {
                break Outcome::MaxIterations;
            }
            v = precondition(p, &v, &f, &self.h);
            k += 1;
        };
        rec.finish(p, &v, outcome)
    }
}

pub fn preconditioned_mann_solve(
    p: &Problem,
    v0: &StackedPoint,
    h: &Matrix,
    cfg: &SolverConfig,
    reference: Option<&StackedPoint>,
) -> Result<CESolution> {
    PreconditionedMann::new(h.clone(), cfg.clone())?.solve(p, v0, reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{prox_quadratic_norm_agent, Agent};
    use crate::solvers::DIVERGENCE_THRESHOLD;
    use crate::tensor::distance;
    use std::sync::Arc;

    struct Identity;
    impl Agent for Identity {
        fn label(&self) -> &str {
            "identity"
        }
        fn dim(&self) -> usize {
            2
        }
        fn apply_into(&self, v: &[f64], out: &mut [f64]) {
            out.copy_from_slice(v);
        }
    }

    struct Scale(f64);
    impl Agent for Scale {
        fn label(&self) -> &str {
            "scale"
        }
        fn dim(&self) -> usize {
            1
        }
        fn apply_into(&self, v: &[f64], out: &mut [f64]) {
            out[0] = self.0 * v[0];
        }
    }

    #[test]
    fn consensus_start_with_identity_agents_is_immediate() {
        let p = Problem::with_uniform_weights(vec![Arc::new(Identity), Arc::new(Identity)]).unwrap();
        let v0 = StackedPoint::replicate(&[0.4, -1.0], 2);
        let sol = mann_solve(&p, &v0, &SolverConfig::default(), None).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.trace.iterations(), 0);
        assert_eq!(sol.trace.total_map_evals(), 1);
    }

    #[test]
    fn two_norm_proxes_meet_in_between() {
        // F1 = prox of ½(v−1)², F2 = prox of ½(v−3)²; equilibrium at x = 2
        let f1 = prox_quadratic_norm_agent(&[1.0], 1.0, 1.0).unwrap();
        let f2 = prox_quadratic_norm_agent(&[3.0], 1.0, 1.0).unwrap();
        let p = Problem::with_uniform_weights(vec![Arc::new(f1), Arc::new(f2)]).unwrap();
        let sol = mann_solve(&p, &p.zeros(), &SolverConfig::default(), None).unwrap();
        assert!(sol.converged);
        assert!((sol.x_star[0] - 2.0).abs() < 1e-7);
        assert!(sol.residual <= 1e-8);
        // one stacked evaluation per row
        assert_eq!(sol.trace.total_map_evals() as usize, sol.trace.len());
    }

    #[test]
    fn divergence_is_an_outcome() {
        // scalar T(v) has an expanding direction for F = 3v
        let p = Problem::with_uniform_weights(vec![Arc::new(Scale(3.0)), Arc::new(Scale(-0.5))]).unwrap();
        let v0 = StackedPoint::from_blocks(&[[1.0], [0.0]]).unwrap();
        let sol = mann_solve(&p, &v0, &SolverConfig::default(), None).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.trace.outcome, Outcome::Diverged);
        assert!(sol.trace.final_residual().unwrap() > DIVERGENCE_THRESHOLD);
    }

    #[test]
    fn nan_is_reported_with_trace() {
        let p = Problem::with_uniform_weights(vec![Arc::new(Scale(f64::NAN))]).unwrap();
        let v0 = StackedPoint::from_blocks(&[[1.0]]).unwrap();
        match mann_solve(&p, &v0, &SolverConfig::default(), None) {
            Err(Error::NonFinite { trace }) => assert_eq!(trace.len(), 1),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn max_iter_respected() {
        let f1 = prox_quadratic_norm_agent(&[1.0], 1.0, 1.0).unwrap();
        let f2 = prox_quadratic_norm_agent(&[3.0], 1.0, 1.0).unwrap();
        let p = Problem::with_uniform_weights(vec![Arc::new(f1), Arc::new(f2)]).unwrap();
        let cfg = SolverConfig::default().with_max_iter(3);
        let sol = mann_solve(&p, &p.zeros(), &cfg, None).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.trace.outcome, Outcome::MaxIterations);
        assert_eq!(sol.trace.iterations(), 3);
    }

    #[test]
    fn isotropic_preconditioner_reproduces_mann() {
        let f1 = prox_quadratic_norm_agent(&[1.0, 0.0], 2.0, 1.0).unwrap();
        let f2 = prox_quadratic_norm_agent(&[3.0, 1.0], 0.5, 1.0).unwrap();
        let p = Problem::with_uniform_weights(vec![Arc::new(f1), Arc::new(f2)]).unwrap();
        let h = Matrix::identity(4).scaled(0.3);
        let mut a = p.zeros();
        let mut b = p.zeros();
        for _ in 0..50 {
            a = mann_step(&p, &a, 0.3).unwrap();
            b = preconditioned_step(&p, &b, &h).unwrap();
            assert!(distance(a.as_slice(), b.as_slice()) <= 1e-14 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn preconditioner_validation() {
        let cfg = SolverConfig::default();
        assert!(matches!(
            PreconditionedMann::new(Matrix::identity(2), cfg.clone()),
            Err(Error::BadPreconditioner(_))
        ));
        assert!(PreconditionedMann::new(Matrix::from_diag(&[0.5, -0.1]), cfg.clone()).is_err());
        assert!(PreconditionedMann::new(Matrix::from_rows(&[[0.5, 0.1], [0.0, 0.5]]), cfg.clone()).is_err());
        assert!(PreconditionedMann::new(Matrix::from_diag(&[0.5, 0.9]), cfg).is_ok());
    }
}
