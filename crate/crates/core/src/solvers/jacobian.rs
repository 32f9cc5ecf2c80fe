use rayon::prelude::*;

use crate::equilibrium::{Problem, StackedPoint};
use crate::error::Result;
use crate::tensor::Matrix;

/// Forward-difference Jacobians of every agent at its block of `v`.
///
/// Coordinate `j` of every block is perturbed at once (agents act on their
/// own blocks only), so the cost is `n` stacked evaluations of `F` plus the
/// one at `v` supplied as `f`. Step for entry `v_ij` is `eps·(1 + |v_ij|)`.
pub fn fd_block_jacobians(p: &Problem, v: &StackedPoint, f: &StackedPoint, eps: f64) -> Result<Vec<Matrix>> {
    p.check(v)?;
    p.check(f)?;
    let n = p.dim();
    let blocks = p.num_agents();
    let columns: Vec<(Vec<f64>, StackedPoint)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut vp = v.clone();
            let steps: Vec<f64> = (0..blocks)
                .map(|i| {
                    let x = &mut vp.block_mut(i)[j];
                    let h = eps * (1.0 + x.abs());
                    let bumped = *x + h;
                    // use the representable step
                    let h = bumped - *x;
                    *x = bumped;
                    h
                })
                .collect();
            let fp = p.apply_f_unchecked(&vp);
            (steps, fp)
        })
        .collect();
    let mut jac = vec![Matrix::zeros(n, n); blocks];
    for (j, (steps, fp)) in columns.iter().enumerate() {
        for (i, m) in jac.iter_mut().enumerate() {
            let (fb, f0) = (fp.block(i), f.block(i));
            for r in 0..n {
                m[(r, j)] = (fb[r] - f0[r]) / steps[i];
            }
        }
    }
    Ok(jac)
}

/// Forward-difference Jacobian of an arbitrary map on `R^m`.
pub fn fd_jacobian(map: impl Fn(&[f64]) -> Vec<f64> + Sync, x: &[f64], eps: f64) -> Matrix {
    let f0 = map(x);
    let m = x.len();
    let cols: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut xp = x.to_vec();
            let h0 = eps * (1.0 + x[j].abs());
            xp[j] += h0;
            let h = xp[j] - x[j];
            map(&xp).iter().zip(&f0).map(|(a, b)| (a - b) / h).collect()
        })
        .collect();
    let mut jac = Matrix::zeros(f0.len(), m);
    for (j, c) in cols.iter().enumerate() {
        jac.set_column(j, c);
    }
    jac
}
