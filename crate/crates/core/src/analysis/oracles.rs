use crate::agents::QuadraticProx;
use crate::equilibrium::{Problem, StackedPoint, Weights};
use crate::error::{Error, Result};
use crate::tensor::{eigenvalues, lu_solve, Matrix, Rng, Vector};

/// `f(x) = ½xᵀPx + qᵀx + c` with `P` symmetric positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective {
    p: Matrix,
    q: Vector,
    c: f64,
}

impl QuadraticObjective {
    pub fn new(p: Matrix, q: Vector, c: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::dims(p.rows(), p.cols()));
        }
        if q.len() != p.rows() {
            return Err(Error::dims(p.rows(), q.len()));
        }
        if !p.is_symmetric(1e-12) {
            return Err(Error::InvalidConfig("P must be symmetric".into()));
        }
        let min_eig = eigenvalues(&p)?.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::InvalidConfig(format!("P must be PSD, min eigenvalue {min_eig}")));
        }
        Ok(QuadraticObjective { p, q, c })
    }

    /// `P = BᵀB/n + 0.1 I` and `q` with standard normal entries.
    pub fn random_pd(n: usize, rng: &mut Rng) -> Result<Self> {
        let b = Matrix::from_row_major(n, n, rng.normals(n * n))?;
        let mut p = b.transpose().matmul(&b).scaled(1.0 / n as f64);
        for i in 0..n {
            p.row_mut(i)[i] += 0.1;
        }
        // symmetrize away matmul rounding
        let p = Matrix::from_fn(n, n, |i, j| 0.5 * (p[(i, j)] + p[(j, i)]));
        let q = Vector::from(rng.normals(n));
        QuadraticObjective::new(p, q, 0.0)
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn q(&self) -> &Vector {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.p.matvec(x).dot(x) + self.q.dot(x) + self.c
    }

    pub fn prox_agent(&self, sigma: f64) -> Result<QuadraticProx> {
        QuadraticProx::new(&self.p, &self.q, sigma)
    }
}

/// Exact stacked solution of `F(v) = G(v)` for affine agents, from
/// `(blockdiag(M_i) − Ḡ) v = −b`.
pub fn affine_ce_oracle(p: &Problem) -> Result<StackedPoint> {
    let n = p.dim();
    let nb = p.num_agents();
    let mu = p.weights().as_slice();
    let mut system = Matrix::zeros(n * nb, n * nb);
    let mut rhs = vec![0.0; n * nb];
    for (i, agent) in p.agents().iter().enumerate() {
        let part = agent
            .affine_part()
            .ok_or_else(|| Error::InvalidConfig(format!("agent {} has no affine part", agent.label())))?;
        for r in 0..n {
            rhs[i * n + r] = -part.offset[r];
            let row = system.row_mut(i * n + r);
            row[i * n..(i + 1) * n].copy_from_slice(part.matrix.row(r));
            for (j, m) in mu.iter().enumerate() {
                row[j * n + r] -= m;
            }
        }
    }
    let v = lu_solve(&system, &rhs).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularSystem,
        other => other,
    })?;
    StackedPoint::from_flat(v.into_vec(), n)
}

/// `argmin Σ μ_i f_i(x)` from `(Σ μ_i P_i) x = −Σ μ_i q_i`.
pub fn consensus_opt_oracle(fs: &[QuadraticObjective], mu: &Weights) -> Result<Vector> {
    let first = fs.first().ok_or_else(|| Error::InvalidConfig("no objectives".into()))?;
    if fs.len() != mu.len() {
        return Err(Error::dims(fs.len(), mu.len()));
    }
    let n = first.dim();
    let mut a = Matrix::zeros(n, n);
    let mut b = Vector::zeros(n);
    for (f, m) in fs.iter().zip(mu.as_slice()) {
        if f.dim() != n {
            return Err(Error::dims(n, f.dim()));
        }
        a = a.add_scaled(*m, &f.p);
        b.axpy(-m, &f.q);
    }
    lu_solve(&a, &b).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularSystem,
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Agent, LinearAgent};
    use std::sync::Arc;

    fn linear(scale: f64, offset: f64) -> Arc<dyn Agent> {
        Arc::new(LinearAgent::new("lin", Matrix::from_diag(&[scale]), Vector::from(vec![offset])).unwrap())
    }

    #[test]
    fn single_halving_agent() {
        let p = Problem::with_uniform_weights(vec![linear(0.5, 0.0)]).unwrap();
        let v = affine_ce_oracle(&p).unwrap();
        assert_eq!(v.as_slice(), &[0.0]);
    }

    #[test]
    fn two_affine_agents_by_elimination() {
        // v1/2 = x, (v2 + 2)/2 = x, v1 + v2 = 2x  ⇒  v1 = 2x, v2 = 2x − 2, 4x − 2 = 2x
        let p = Problem::with_uniform_weights(vec![linear(0.5, 0.0), linear(0.5, 1.0)]).unwrap();
        let v = affine_ce_oracle(&p).unwrap();
        assert!((v.as_slice()[0] - 2.0).abs() < 1e-14);
        assert!((v.as_slice()[1] - 0.0).abs() < 1e-14);
        assert!(p.residual(&v).unwrap() < 1e-14);
    }

    #[test]
    fn non_unique_equilibrium_is_singular() {
        // identity agents: every consensus point is an equilibrium
        let p = Problem::with_uniform_weights(vec![linear(1.0, 0.0), linear(1.0, 0.0)]).unwrap();
        assert!(matches!(affine_ce_oracle(&p), Err(Error::SingularSystem)));
    }

    #[test]
    fn non_affine_rejected() {
        let p = Problem::with_uniform_weights(vec![Arc::new(crate::agents::toy_expanding_agent())]).unwrap();
        assert!(matches!(affine_ce_oracle(&p), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn consensus_minimizer_examples() {
        let id = QuadraticObjective::new(Matrix::identity(3), Vector::zeros(3), 0.0).unwrap();
        let x = consensus_opt_oracle(std::slice::from_ref(&id), &Weights::uniform(1)).unwrap();
        assert_eq!(x.as_slice(), &[0.0; 3]);

        // ½(x−1)² and ½(x−3)² up to constants
        let f1 = QuadraticObjective::new(Matrix::identity(1), Vector::from(vec![-1.0]), 0.5).unwrap();
        let f2 = QuadraticObjective::new(Matrix::identity(1), Vector::from(vec![-3.0]), 4.5).unwrap();
        let x = consensus_opt_oracle(&[f1.clone(), f2], &Weights::uniform(2)).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
        assert!((f1.value(&[1.0])).abs() < 1e-15);
    }

    #[test]
    fn objective_validation() {
        let asym = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]);
        assert!(QuadraticObjective::new(asym, Vector::zeros(2), 0.0).is_err());
        let indef = Matrix::from_diag(&[1.0, -0.1]);
        assert!(QuadraticObjective::new(indef, Vector::zeros(2), 0.0).is_err());
        let psd = Matrix::from_diag(&[1.0, 0.0]);
        assert!(QuadraticObjective::new(psd, Vector::zeros(2), 0.0).is_ok());
    }

    #[test]
    fn random_objectives_are_positive_definite() {
        let mut rng = Rng::new(11);
        for n in [1, 4, 10] {
            let f = QuadraticObjective::random_pd(n, &mut rng).unwrap();
            let min = eigenvalues(f.p()).unwrap().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            assert!(min >= 0.1 - 1e-10);
        }
    }
}
