//! Dense nonsymmetric eigenvalues: balancing, Householder reduction to upper
//! Hessenberg form, then the Francis double-shift QR iteration.

use num_complex::Complex64;

use super::matrix::Matrix;
use super::rng::Rng;
use super::vector::{norm, Vector};
use crate::error::{Error, Result};

pub type ComplexScalar = Complex64;

pub const MAX_EIGEN_DIM: usize = 1000;
const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// All eigenvalues of a real square matrix, complex-conjugate pairs adjacent.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<ComplexScalar>> {
    if !a.is_square() {
        return Err(Error::dims(a.rows(), a.cols()));
    }
    let n = a.rows();
    if n > MAX_EIGEN_DIM {
        return Err(Error::InvalidConfig(format!(
            "dense eigenvalue solver limited to n <= {MAX_EIGEN_DIM}, got {n}"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if !a.is_finite() {
        return Err(Error::NoConvergence { iterations: 0 });
    }
    // 1-based working copy keeps the QR sweep indices readable
    let mut h = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            h[i + 1][j + 1] = a[(i, j)];
        }
    }
    balance(&mut h, n);
    hessenberg(&mut h, n);
    hqr(&mut h, n)
}

fn balance(a: &mut [Vec<f64>], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for j in 1..=n {
                        a[j][i] *= f;
                    }
                }
            }
        }
    }
}

/// Orthogonal similarity reduction to upper Hessenberg form.
fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    let mut ort = vec![0.0; n + 1];
    for m in 2..n {
        let scale: f64 = (m..=n).map(|i| a[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut h = 0.0;
        for i in (m..=n).rev() {
            ort[i] = a[i][m - 1] / scale;
            h += ort[i] * ort[i];
        }
        let mut g = h.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        h -= ort[m] * g;
        ort[m] -= g;
        for j in m..=n {
            let f = (m..=n).rev().map(|i| ort[i] * a[i][j]).sum::<f64>() / h;
            for i in m..=n {
                a[i][j] -= f * ort[i];
            }
        }
        for i in 1..=n {
            let f = (m..=n).rev().map(|j| ort[j] * a[i][j]).sum::<f64>() / h;
            for j in m..=n {
                a[i][j] -= f * ort[j];
            }
        }
        a[m][m - 1] = scale * g;
        for i in m + 1..=n {
            a[i][m - 1] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<ComplexScalar>> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i - 1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r, mut s, mut w, mut x, mut y, mut z): (f64, f64, f64, f64, f64, f64, f64, f64);
    let mut total_sweeps = 0usize;
    while nn >= 1 {
        let mut its = 0;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l >= 2 {
                s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                // one root found
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    // two roots found
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    if nn < 2 {
                        break;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_SWEEPS_PER_EIGENVALUE {
                        return Err(Error::NoConvergence {
                            iterations: total_sweeps,
                        });
                    }
                    if its % 10 == 0 && its > 0 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    total_sweeps += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = nn.min(k + 3);
                            for i in l..=mmin {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                        k += 1;
                    }
                    // continue iterating on the same active block
                    continue;
                }
            }
            break;
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// Approximate eigenvector for `lambda` by complex inverse iteration.
/// Returned with unit Euclidean norm.
pub fn eigenvector(a: &Matrix, lambda: ComplexScalar) -> Result<Vec<ComplexScalar>> {
    if !a.is_square() {
        return Err(Error::dims(a.rows(), a.cols()));
    }
    let n = a.rows();
    let scale = a.max_abs().max(1.0);
    // shift off the exact eigenvalue so the factorization stays finite
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Complex64::new(a[(i, j)], 0.0) - if i == j { shift } else { Complex64::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    let perm = complex_lu(&mut m);
    let mut rng = Rng::new(0x00E1_6E4E);
    let mut x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.uniform() + 0.5, 0.0)).collect();
    for _ in 0..3 {
        x = complex_lu_solve(&m, &perm, &x);
        let nrm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::NoConvergence { iterations: 0 });
        }
        x.iter_mut().for_each(|c| *c /= nrm);
    }
    Ok(x)
}

fn complex_lu(m: &mut [Vec<Complex64>]) -> Vec<usize> {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm()))
            .unwrap_or(k);
        m.swap(k, p);
        perm.swap(k, p);
        let mut d = m[k][k];
        if d.norm() == 0.0 {
            d = Complex64::new(f64::EPSILON, 0.0);
            m[k][k] = d;
        }
        for i in k + 1..n {
            let l = m[i][k] / d;
            m[i][k] = l;
            for j in k + 1..n {
                let t = m[k][j];
                m[i][j] -= l * t;
            }
        }
    }
    perm
}

fn complex_lu_solve(m: &[Vec<Complex64>], perm: &[usize], b: &[Complex64]) -> Vec<Complex64> {
    let n = m.len();
    let mut x: Vec<Complex64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            let t = x[j];
            x[i] -= m[i][j] * t;
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            let t = x[j];
            x[i] -= m[i][j] * t;
        }
        x[i] /= m[i][i];
    }
    x
}

/// `‖Av − λv‖` for a complex vector `v`.
pub fn eigen_residual(a: &Matrix, lambda: ComplexScalar, v: &[ComplexScalar]) -> f64 {
    let n = a.rows();
    (0..n)
        .map(|i| {
            let av: Complex64 = (0..n).map(|j| v[j] * a[(i, j)]).sum();
            (av - lambda * v[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

const POWER_MAX_ITERS: usize = 20_000;
const POWER_MIN_ITERS: usize = 200;

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm(a: &Matrix) -> f64 {
    let n = a.cols();
    if n == 0 || a.rows() == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    let mut rng = Rng::new(0x5EED_0F5F);
    let mut x = Vector::from_fn(n, |_| 0.5 + rng.uniform());
    let nx = x.norm();
    x.scale(1.0 / nx);
    let mut estimate = 0.0;
    for it in 0..POWER_MAX_ITERS {
        let ax = a.matvec(&x);
        let next = ax.norm();
        let mut y = a.tr_matvec(&ax);
        let ny = norm(&y);
        if ny == 0.0 {
            // x landed in the null space; the estimate so far stands
            return next.max(estimate);
        }
        y.scale(1.0 / ny);
        x = y;
        let converged = (next - estimate).abs() <= 1e-12 * next;
        estimate = next;
        if converged && it + 1 >= POWER_MIN_ITERS.min(n * 4) {
            break;
        }
    }
    estimate
}
