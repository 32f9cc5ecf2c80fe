use super::{fd_block_jacobians, Outcome, Recorder, Solver, SolverConfig, MAX_DENSE_NEWTON_DIM};
use crate::equilibrium::{CESolution, Problem, StackedPoint};
use crate::error::{Error, Result};
use crate::tensor::{lu_solve, Matrix};

/// Residual map driven to zero by [`Newton`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NewtonTarget {
    /// `F − G`
    FG,
    /// `T − I` ("Newton–Mann")
    Mann,
}

/// Dense Newton with forward-difference Jacobian blocks and full steps.
#[derive(Clone, Debug)]
pub struct Newton {
    target: NewtonTarget,
    cfg: SolverConfig,
}

impl Newton {
    pub fn new(target: NewtonTarget, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Newton { target, cfg })
    }
}

pub fn newton_solve(
    p: &Problem,
    v0: &StackedPoint,
    target: NewtonTarget,
    cfg: &SolverConfig,
    reference: Option<&StackedPoint>,
) -> Result<CESolution> {
    Newton::new(target, cfg.clone())?.solve(p, v0, reference)
}

/// Dense Jacobian of the residual map from the agent blocks `J_i`.
fn assemble(p: &Problem, blocks: &[Matrix], target: NewtonTarget) -> Matrix {
    let (n, nb) = (p.dim(), p.num_agents());
    let mu = p.weights().as_slice();
    let mut jac = Matrix::zeros(n * nb, n * nb);
    for bi in 0..nb {
        for bj in 0..nb {
            let same = bi == bj;
            for r in 0..n {
                for c in 0..n {
                    let id = if r == c { 1.0 } else { 0.0 };
                    let jv = blocks[bj][(r, c)];
                    let val = match target {
                        // δ_ij J_j − μ_j I
                        NewtonTarget::FG => (if same { jv } else { 0.0 }) - mu[bj] * id,
                        // (2Ḡ − I)(2J − I) − I, with B_j = 2J_j − I
                        NewtonTarget::Mann => {
                            let b = 2.0 * jv - id;
                            2.0 * mu[bj] * b - if same { b + id } else { 0.0 }
                        }
                    };
                    jac.row_mut(bi * n + r)[bj * n + c] = val;
                }
            }
        }
    }
    jac
}

impl Solver for Newton {
    fn label(&self) -> &str {
        match self.target {
            NewtonTarget::FG => "newton-fg",
            NewtonTarget::Mann => "newton-mann",
        }
    }

    fn solve(&self, p: &Problem, v0: &StackedPoint, reference: Option<&StackedPoint>) -> Result<CESolution> {
        p.check(v0)?;
        if p.stacked_dim() > MAX_DENSE_NEWTON_DIM {
            return Err(Error::InvalidConfig(format!(
                "dense Newton needs nN <= {MAX_DENSE_NEWTON_DIM}, got {}",
                p.stacked_dim()
            )));
        }
        let mut rec = Recorder::new(self.label(), reference, &self.cfg);
        let mut v = v0.clone();
        let mut frozen: Option<Matrix> = None;
        let mut k = 0;
        let outcome = loop {
            let f = p.apply_f_unchecked(&v);
            rec.count(1);
            let fg = p.fg_from_f(&v, &f);
            if let Some(stop) = rec.record(&v, fg.norm()) {
                break stop;
            }
            if k == self.cfg.max_iter {
                break Outcome::MaxIterations;
            }
            let rhs: Vec<f64> = match self.target {
                NewtonTarget::FG => fg.as_slice().iter().map(|x| -x).collect(),
                NewtonTarget::Mann => {
                    let t = p.t_from_f(&v, &f);
                    v.as_slice().iter().zip(t.as_slice()).map(|(a, b)| a - b).collect()
                }
            };
            let jac = match &frozen {
                Some(j) => j.clone(),
                None => {
                    let blocks = fd_block_jacobians(p, &v, &f, self.cfg.fd_eps)?;
                    rec.count(p.dim() as u64);
                    let j = assemble(p, &blocks, self.target);
                    if self.cfg.freeze_jacobian {
                        frozen = Some(j.clone());
                    }
                    j
                }
            };
            let dx = lu_solve(&jac, &rhs).map_err(|e| Error::SingularJacobian(Box::new(e)))?;
            for (x, d) in v.as_mut_slice().iter_mut().zip(dx.iter()) {
                *x += d;
            }
            k += 1;
        };
        rec.finish(p, &v, outcome)
    }
}
