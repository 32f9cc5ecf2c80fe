use super::matrix::Matrix;
use super::vector::Vector;
use crate::error::{Error, Result};

/// Cholesky factor `H = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(h: &Matrix) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::dims(h.rows(), h.cols()));
        }
        let tol = 1e-12 * h.max_abs().max(f64::MIN_POSITIVE);
        if !h.is_symmetric(tol) {
            return Err(Error::NotPositiveDefinite);
        }
        let n = h.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let s: f64 = (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum();
            let d = h[(j, j)] - s;
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
                l[(i, j)] = (h[(i, j)] - s) / d;
            }
        }
        Ok(Cholesky { l })
    }

    /// Solves `L y = v`.
    fn forward(&self, v: &[f64]) -> Vector {
        let n = self.l.rows();
        let mut y = Vector::zeros(n);
        for i in 0..n {
            let row = self.l.row(i);
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (v[i] - s) / row[i];
        }
        y
    }

    /// `sqrt(vᵀ H⁻¹ v) = ‖L⁻¹ v‖`
    pub fn inv_norm(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.l.rows() {
            return Err(Error::dims(self.l.rows(), v.len()));
        }
        Ok(self.forward(v).norm())
    }
}

/// `sqrt(vᵀ H⁻¹ v)` for symmetric positive definite `H`.
pub fn weighted_norm_hinv(v: &[f64], h: &Matrix) -> Result<f64> {
    Cholesky::factor(h)?.inv_norm(v)
}
