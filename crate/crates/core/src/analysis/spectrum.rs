use serde::{Deserialize, Serialize};

use crate::equilibrium::{Problem, StackedPoint};
use crate::error::Result;
use crate::solvers::fd_block_jacobians;
use crate::tensor::{eigenvalues, spectral_norm, ComplexScalar, Matrix};

/// Smallest relaxation considered by the optimal-ρ search.
const RHO_MIN: f64 = 1e-6;
const RHO_TOL: f64 = 1e-6;
const JACOBIAN_FD_EPS: f64 = 1e-7;

/// Eigen-analysis of `J_T` at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted by real part, then imaginary part; serialized as `[re, im]`.
    #[serde(with = "complex_pairs")]
    pub eigenvalues: Vec<ComplexScalar>,
    pub max_real: f64,
    /// Spectral norm of `J_T`.
    pub lipschitz: f64,
    /// Minimizer over `ρ ∈ (0, 1]` of `max_j |ρλ_j + 1 − ρ|`.
    pub rho_star: f64,
    pub rho_star_radius: f64,
}

mod complex_pairs {
    use super::ComplexScalar;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[ComplexScalar], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexScalar>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| ComplexScalar::new(re, im)).collect())
    }
}

impl SpectrumReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

/// `J_T = (2Ḡ − I)(2 blockdiag(J_i) − I)`; exact for agents with an affine
/// part, forward differences at `v` otherwise.
pub fn t_jacobian(p: &Problem, v: &StackedPoint) -> Result<Matrix> {
    p.check(v)?;
    let exact: Option<Vec<Matrix>> = p.agents().iter().map(|a| a.affine_part().map(|ap| ap.matrix)).collect();
    let blocks = match exact {
        Some(b) => b,
        None => {
            let f = p.apply_f(v)?;
            fd_block_jacobians(p, v, &f, JACOBIAN_FD_EPS)?
        }
    };
    let (n, nb) = (p.dim(), p.num_agents());
    let mu = p.weights().as_slice();
    Ok(Matrix::from_fn(n * nb, n * nb, |row, col| {
        let (bi, r) = (row / n, row % n);
        let (bj, c) = (col / n, col % n);
        let id = if r == c { 1.0 } else { 0.0 };
        let b = 2.0 * blocks[bj][(r, c)] - id;
        2.0 * mu[bj] * b - if bi == bj { b } else { 0.0 }
    }))
}

pub fn jacobian_spectrum(p: &Problem, v: &StackedPoint) -> Result<SpectrumReport> {
    let jt = t_jacobian(p, v)?;
    spectrum_of(&jt)
}

/// Report for an explicit `J_T`.
pub fn spectrum_of(jt: &Matrix) -> Result<SpectrumReport> {
    let mut eigs = eigenvalues(jt)?;
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let max_real = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let (rho_star, rho_star_radius) = optimal_rho(&eigs);
    Ok(SpectrumReport {
        eigenvalues: eigs,
        max_real,
        lipschitz: spectral_norm(jt),
        rho_star,
        rho_star_radius,
    })
}

/// Eigenvalues `ρλ_j + 1 − ρ` of the relaxed map `(1 − ρ)I + ρT`.
pub fn mann_spectrum_check(report: &SpectrumReport, rho: f64) -> Vec<ComplexScalar> {
    relaxed(&report.eigenvalues, rho)
}

fn relaxed(eigs: &[ComplexScalar], rho: f64) -> Vec<ComplexScalar> {
    eigs.iter().map(|l| l * rho + (1.0 - rho)).collect()
}

pub fn max_modulus(values: &[ComplexScalar]) -> f64 {
    values.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Golden-section search of the convex map `ρ ↦ max_j |ρλ_j + 1 − ρ|`.
pub fn optimal_rho(eigs: &[ComplexScalar]) -> (f64, f64) {
    let phi = |rho: f64| max_modulus(&relaxed(eigs, rho));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (RHO_MIN, 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    while b - a > RHO_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = phi(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(mid, phi(mid)), (1.0, phi(1.0)), (RHO_MIN, phi(RHO_MIN))]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("three candidates")
}
