use super::{Outcome, Recorder, Solver, SolverConfig};
use crate::equilibrium::{CESolution, Problem, StackedPoint};
use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, norm, qr_least_squares, Matrix};

/// Basis vectors shorter than this end the Arnoldi process early.
const BREAKDOWN_TOL: f64 = 1e-14;

/// Jacobian-free Newton–Krylov on `F − G`: each Newton step minimizes
/// `‖H(v) + J dx‖` over a fixed-dimension Krylov subspace, with `J q`
/// approximated by a forward difference of `F`.
#[derive(Clone, Debug)]
pub struct Jfnk {
    cfg: SolverConfig,
}

impl Jfnk {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Jfnk { cfg })
    }
}

pub fn jfnk_solve(
    p: &Problem,
    v0: &StackedPoint,
    cfg: &SolverConfig,
    reference: Option<&StackedPoint>,
) -> Result<CESolution> {
    Jfnk::new(cfg.clone())?.solve(p, v0, reference)
}

impl Jfnk {
    /// GMRES step for `J dx = −r` from the Krylov space of `J` and `r`.
    /// Returns the step and the number of `F` evaluations spent, or `None`
    /// if a probe produced non-finite values.
    fn krylov_step(
        &self,
        p: &Problem,
        v: &StackedPoint,
        f: &StackedPoint,
        r: &StackedPoint,
    ) -> Result<Option<(Vec<f64>, u64)>> {
        let m = v.len();
        let j = self.cfg.krylov_dim;
        let beta = r.norm();
        let scale = self.cfg.fd_eps * (1.0 + v.norm());
        let mut basis: Vec<Vec<f64>> = vec![r.as_slice().iter().map(|x| x / beta).collect()];
        let mut hess = Matrix::zeros(j + 1, j);
        let mut evals = 0;
        let mut cols = 0;
        while cols < j {
            let q = &basis[cols];
            // ‖q‖ = 1, so ε = fd_eps·(1 + ‖v‖)
            let mut probe = v.clone();
            axpy(scale, q, probe.as_mut_slice());
            let fp = p.apply_f_unchecked(&probe);
            evals += 1;
            let qv = StackedPoint::from_flat(q.clone(), v.block_len())?;
            let gq = p.weighted_mean(&qv);
            let mut w: Vec<f64> = fp
                .as_slice()
                .iter()
                .zip(f.as_slice())
                .enumerate()
                .map(|(idx, (a, b))| (a - b) / scale - gq[idx % v.block_len()])
                .collect();
            if !w.iter().all(|x| x.is_finite()) {
                return Ok(None);
            }
            // modified Gram–Schmidt
            for (i, b) in basis.iter().enumerate() {
                let h = dot(&w, b);
                hess.row_mut(i)[cols] = h;
                axpy(-h, b, &mut w);
            }
            let h = norm(&w);
            hess.row_mut(cols + 1)[cols] = h;
            cols += 1;
            if h < BREAKDOWN_TOL * beta.max(1.0) {
                break;
            }
            if cols < j {
                basis.push(w.iter().map(|x| x / h).collect());
            }
        }
        // minimize ‖β e₁ + H̄ y‖ over y, dropping trailing columns if rank deficient
        let mut rhs = vec![0.0; cols + 1];
        rhs[0] = -beta;
        let mut k = cols;
        let y = loop {
            let sub = Matrix::from_fn(k + 1, k, |a, b| hess[(a, b)]);
            match qr_least_squares(&sub, &rhs[..k + 1]) {
                Ok(y) => break y,
                Err(Error::RankDeficient { .. }) if k > 1 => k -= 1,
                Err(e) => return Err(e),
            }
        };
        let mut dx = vec![0.0; m];
        for (coef, b) in y.iter().zip(&basis) {
            axpy(*coef, b, &mut dx);
        }
        Ok(Some((dx, evals)))
    }
}

impl Solver for Jfnk {
    fn label(&self) -> &str {
        "jfnk"
    }

    fn solve(&self, p: &Problem, v0: &StackedPoint, reference: Option<&StackedPoint>) -> Result<CESolution> {
        p.check(v0)?;
        if self.cfg.krylov_dim > p.stacked_dim() {
            return Err(Error::InvalidConfig(format!(
                "krylov_dim {} exceeds the stacked dimension {}",
                self.cfg.krylov_dim,
                p.stacked_dim()
            )));
        }
        let mut rec = Recorder::new(self.label(), reference, &self.cfg);
        let mut v = v0.clone();
        let mut k = 0;
        let outcome = loop {
            let f = p.apply_f_unchecked(&v);
            rec.count(1);
            let r = p.fg_from_f(&v, &f);
            if let Some(stop) = rec.record(&v, r.norm()) {
                break stop;
            }
            if k == self.cfg.max_iter {
                break Outcome::MaxIterations;
            }
            let Some((dx, evals)) = self.krylov_step(p, &v, &f, &r)? else {
                break Outcome::NonFinite;
            };
            rec.count(evals);
            for (x, d) in v.as_mut_slice().iter_mut().zip(&dx) {
                *x += d;
            }
            k += 1;
        };
        rec.finish(p, &v, outcome)
    }
}
