use super::{Agent, AffinePart};
use crate::error::{Error, Result};
use crate::tensor::{Lu, Matrix, Vector};

/// Proximal map of `f(x) = ½xᵀPx + qᵀx`:
/// `F(v) = (I + σ²P)⁻¹(v − σ²q)`.
#[derive(Clone, Debug)]
pub struct QuadraticProx {
    label: String,
    lu: Lu,
    shift: Vector,
}

impl QuadraticProx {
    pub fn new(p: &Matrix, q: &[f64], sigma: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::dims(p.rows(), p.cols()));
        }
        if q.len() != p.rows() {
            return Err(Error::dims(p.rows(), q.len()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig("prox sigma must be positive".into()));
        }
        let s2 = sigma * sigma;
        let system = Matrix::identity(p.rows()).add_scaled(s2, p);
        let lu = Lu::factor(&system)?;
        let shift = q.iter().map(|qi| -s2 * qi).collect();
        Ok(QuadraticProx {
            label: format!("quadratic-prox(sigma={sigma})"),
            lu,
            shift,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl Agent for QuadraticProx {
    fn label(&self) -> &str {
        &self.label
    }

    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let rhs: Vec<f64> = v.iter().zip(self.shift.iter()).map(|(a, b)| a + b).collect();
        let x = self.lu.solve(&rhs).expect("dimension checked by caller");
        out.copy_from_slice(&x);
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn affine_part(&self) -> Option<AffinePart> {
        let matrix = self.lu.inverse();
        let offset = self.lu.solve(&self.shift).ok()?;
        Some(AffinePart { matrix, offset })
    }
}

/// Proximal map of the data term `‖Ax − y‖²/2`:
/// `F(v) = (I + σ²AᵀA)⁻¹(v + σ²Aᵀy)`.
pub fn quadratic_prox_agent(a: &Matrix, y: &[f64], sigma: f64) -> Result<QuadraticProx> {
    if y.len() != a.rows() {
        return Err(Error::dims(a.rows(), y.len()));
    }
    let p = a.transpose().matmul(a);
    let q: Vec<f64> = a.tr_matvec(y).iter().map(|x| -x).collect();
    Ok(QuadraticProx::new(&p, &q, sigma)?.with_label(format!("data-prox(sigma={sigma})")))
}

/// Proximal map of `λ‖v − c‖²/2`: `v ↦ (v + σ²λc)/(1 + σ²λ)`.
#[derive(Clone, Debug)]
pub struct NormProx {
    center: Vector,
    weight: f64,
    sigma: f64,
}

pub fn prox_quadratic_norm_agent(c: &[f64], lambda: f64, sigma: f64) -> Result<NormProx> {
    if !(lambda >= 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidConfig("need lambda >= 0 and sigma > 0".into()));
    }
    Ok(NormProx {
        center: c.into(),
        weight: lambda,
        sigma,
    })
}

impl NormProx {
    fn coefficients(&self) -> (f64, f64) {
        let s = self.sigma * self.sigma * self.weight;
        (1.0 / (1.0 + s), s / (1.0 + s))
    }
}

impl Agent for NormProx {
    fn label(&self) -> &str {
        "norm-prox"
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let s = self.sigma * self.sigma * self.weight;
        for ((o, vi), ci) in out.iter_mut().zip(v).zip(self.center.iter()) {
            *o = (vi + s * ci) / (1.0 + s);
        }
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn affine_part(&self) -> Option<AffinePart> {
        let (a, b) = self.coefficients();
        let n = self.dim();
        Some(AffinePart {
            matrix: Matrix::identity(n).scaled(a),
            offset: self.center.iter().map(|c| b * c).collect(),
        })
    }
}

/// Proximal map of the Gaussian likelihood,
/// `argmin_x ‖y − x‖²/(2σ_η²) + ‖v − x‖²/(2σ²) = (σ²y + σ_η²v)/(σ² + σ_η²)`.
#[derive(Clone, Debug)]
pub struct DataFidelity {
    y: Vector,
    data_coef: f64,
    input_coef: f64,
}

pub fn data_fidelity_agent(y: &[f64], sigma_eta: f64, sigma_prox: f64) -> Result<DataFidelity> {
    if !(sigma_eta > 0.0 && sigma_prox > 0.0) {
        return Err(Error::InvalidConfig("noise levels must be positive".into()));
    }
    let s2 = sigma_prox * sigma_prox;
    let e2 = sigma_eta * sigma_eta;
    let (data_coef, input_coef) = if sigma_eta == sigma_prox {
        (0.5, 0.5)
    } else {
        (s2 / (s2 + e2), e2 / (s2 + e2))
    };
    Ok(DataFidelity {
        y: y.into(),
        data_coef,
        input_coef,
    })
}

impl DataFidelity {
    /// Lipschitz constant `σ_η²/(σ² + σ_η²)`.
    pub fn contraction(&self) -> f64 {
        self.input_coef
    }
}

impl Agent for DataFidelity {
    fn label(&self) -> &str {
        "data-fidelity"
    }

    fn dim(&self) -> usize {
        self.y.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for ((o, vi), yi) in out.iter_mut().zip(v).zip(self.y.iter()) {
            *o = self.data_coef * yi + self.input_coef * vi;
        }
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn affine_part(&self) -> Option<AffinePart> {
        Some(AffinePart {
            matrix: Matrix::identity(self.dim()).scaled(self.input_coef),
            offset: self.y.iter().map(|y| self.data_coef * y).collect(),
        })
    }
}
