use super::matrix::Matrix;
use super::vector::{norm, Vector};
use crate::error::{Error, Result};

/// Diagonal entries of R below this fraction of the largest one mark a
/// rank-deficient column.
pub const RANK_RTOL: f64 = 1e-12;

/// Householder QR of a tall matrix, stored compactly.
#[derive(Clone, Debug)]
pub struct Qr {
    // R in the upper triangle, Householder vectors below (v[0] implicit in `beta`)
    qr: Matrix,
    vs: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

impl Qr {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let (m, k) = (a.rows(), a.cols());
        if m < k {
            return Err(Error::dims(k, m));
        }
        let mut qr = a.clone();
        let mut vs = Vec::with_capacity(k);
        let mut betas = Vec::with_capacity(k);
        for j in 0..k {
            let x: Vec<f64> = (j..m).map(|i| qr[(i, j)]).collect();
            let alpha = norm(&x);
            let mut v = x;
            if alpha == 0.0 {
                vs.push(v);
                betas.push(0.0);
                continue;
            }
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * alpha;
            let vnorm2: f64 = v.iter().map(|t| t * t).sum();
            let beta = 2.0 / vnorm2;
            for c in j..k {
                let s: f64 = (j..m).map(|i| v[i - j] * qr[(i, c)]).sum();
                let f = beta * s;
                for i in j..m {
                    qr[(i, c)] -= f * v[i - j];
                }
            }
            vs.push(v);
            betas.push(beta);
        }
        Ok(Qr { qr, vs, betas })
    }

    /// Applies `Qᵀ` to `b` in place.
    pub fn apply_qt(&self, b: &mut [f64]) {
        let m = self.qr.rows();
        for (j, (v, beta)) in self.vs.iter().zip(&self.betas).enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let s: f64 = (j..m).map(|i| v[i - j] * b[i]).sum();
            let f = beta * s;
            for i in j..m {
                b[i] -= f * v[i - j];
            }
        }
    }

    pub fn r_diag(&self) -> Vec<f64> {
        (0..self.qr.cols()).map(|j| self.qr[(j, j)]).collect()
    }

    pub fn solve_least_squares(&self, b: &[f64]) -> Result<Vector> {
        let (m, k) = (self.qr.rows(), self.qr.cols());
        if b.len() != m {
            return Err(Error::dims(m, b.len()));
        }
        let diag = self.r_diag();
        let scale = diag.iter().fold(0.0f64, |s, d| s.max(d.abs()));
        if let Some(column) = diag.iter().position(|d| !(d.abs() > RANK_RTOL * scale) || *d == 0.0) {
            return Err(Error::RankDeficient { column });
        }
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut x = Vector::zeros(k);
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| self.qr[(i, j)] * x[j]).sum();
            x[i] = (qtb[i] - s) / self.qr[(i, i)];
        }
        Ok(x)
    }
}

/// `argmin ‖Ax − b‖` for `A` with full column rank.
pub fn qr_least_squares(a: &Matrix, b: &[f64]) -> Result<Vector> {
    Qr::factor(a)?.solve_least_squares(b)
}
