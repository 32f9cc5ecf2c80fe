use super::{Agent, AffinePart};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng, Vector};

/// Affine agent `v ↦ Mv + b` backed by a dense matrix.
#[derive(Clone, Debug)]
pub struct LinearAgent {
    label: String,
    affine: AffinePart,
}

impl LinearAgent {
    pub fn new(label: impl Into<String>, matrix: Matrix, offset: Vector) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims(matrix.rows(), matrix.cols()));
        }
        if offset.len() != matrix.rows() {
            return Err(Error::dims(matrix.rows(), offset.len()));
        }
        Ok(LinearAgent {
            label: label.into(),
            affine: AffinePart { matrix, offset },
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.affine.matrix
    }
}

impl Agent for LinearAgent {
    fn label(&self) -> &str {
        &self.label
    }

    fn dim(&self) -> usize {
        self.affine.offset.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.affine.matrix.matvec_into(v, out);
        for (o, b) in out.iter_mut().zip(self.affine.offset.iter()) {
            *o += b;
        }
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn affine_part(&self) -> Option<AffinePart> {
        Some(self.affine.clone())
    }
}

/// Random row-stochastic matrix: uniform entries, each diagonal entry
/// replaced by its row maximum, rows normalized to sum to one.
///
/// Entries are drawn row-major from `rng`.
pub fn row_stochastic_matrix(n: usize, rng: &mut Rng) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidConfig("row-stochastic matrix needs n >= 2".into()));
    }
    let mut w = Matrix::from_fn(n, n, |_, _| rng.uniform());
    for i in 0..n {
        let row = w.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // the max may now appear twice in the row
        row[i] = max;
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(w)
}

/// `v ↦ Wv` for a freshly drawn row-stochastic `W`.
pub fn row_stochastic_agent(n: usize, rng: &mut Rng) -> Result<LinearAgent> {
    let w = row_stochastic_matrix(n, rng)?;
    LinearAgent::new("row-stochastic", w, Vector::zeros(n))
}

/// `v ↦ rWv + (1 − r)v/2`, so that `2F(v) − v = r(2W − I)v`.
pub fn blended_agent(w: &Matrix, r: f64) -> Result<LinearAgent> {
    if !w.is_square() {
        return Err(Error::dims(w.rows(), w.cols()));
    }
    let n = w.rows();
    let m = w.scaled(r).add_scaled(0.5 * (1.0 - r), &Matrix::identity(n));
    LinearAgent::new(format!("blended(r={r})"), m, Vector::zeros(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::testing::assert_affine_consistent;
    use crate::tensor::distance;

    #[test]
    fn row_stochastic_construction() {
        let mut rng = Rng::new(1);
        let w = row_stochastic_matrix(30, &mut rng).unwrap();
        let ones = vec![1.0; 30];
        assert!(distance(&w.matvec(&ones), &ones) <= 1e-12 * 30f64.sqrt());
        for i in 0..30 {
            let row = w.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|x| *x >= 0.0));
            let max = row.iter().cloned().fold(0.0, f64::max);
            assert_eq!(row[i], max);
        }
        assert!(row_stochastic_matrix(1, &mut rng).is_err());
    }

    #[test]
    fn blended_limits() {
        let mut rng = Rng::new(2);
        let w = row_stochastic_matrix(6, &mut rng).unwrap();
        let v = Vector::from_fn(6, |i| i as f64 - 2.5);
        let zero = blended_agent(&w, 0.0).unwrap().apply(&v).unwrap();
        let half: Vec<f64> = v.iter().map(|x| x / 2.0).collect();
        assert!(distance(&zero, &half) < 1e-15);
        let one = blended_agent(&w, 1.0).unwrap().apply(&v).unwrap();
        assert!(distance(&one, &w.matvec(&v)) < 1e-14);
    }

    #[test]
    fn reflection_identity() {
        let mut rng = Rng::new(3);
        let w = row_stochastic_matrix(20, &mut rng).unwrap();
        let r = 1.02;
        let f = blended_agent(&w, r).unwrap();
        let v = Vector::from_fn(20, |_| rng.uniform() - 0.5);
        let fv = f.apply(&v).unwrap();
        let lhs: Vec<f64> = fv.iter().zip(v.iter()).map(|(a, b)| 2.0 * a - b).collect();
        let wv = w.matvec(&v);
        let rhs: Vec<f64> = wv.iter().zip(v.iter()).map(|(a, b)| r * (2.0 * a - b)).collect();
        assert!(distance(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn affine_parts_consistent() {
        let mut rng = Rng::new(4);
        let agent = row_stochastic_agent(12, &mut rng).unwrap();
        assert_affine_consistent(&agent, 9);
        assert_affine_consistent(&blended_agent(agent.matrix(), 1.06).unwrap(), 10);
    }
}
