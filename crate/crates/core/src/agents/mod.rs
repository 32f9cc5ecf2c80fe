//! Agent maps `F_i: Rⁿ → Rⁿ` fused by the equilibrium.
//!
//! Every agent is a pure, immutable map. Affine agents can also hand out
//! their decomposition `F(v) = Mv + b`, which the analytic oracles and the
//! spectral diagnostics rely on.

mod denoiser;
mod prox;
mod stochastic;
mod toy;

pub use denoiser::{gaussian_denoiser_agent, GaussianDenoiser, KERNEL_STD_PER_STRENGTH};
pub use prox::{
    data_fidelity_agent, prox_quadratic_norm_agent, quadratic_prox_agent, DataFidelity, NormProx,
    QuadraticProx,
};
pub use stochastic::{blended_agent, row_stochastic_agent, row_stochastic_matrix, LinearAgent};
pub use toy::{toy_expanding_agent, ToyExpanding};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};

/// `F(v) = matrix · v + offset`
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePart {
    pub matrix: Matrix,
    pub offset: Vector,
}

impl AffinePart {
    pub fn apply(&self, v: &[f64]) -> Vector {
        self.matrix.matvec(v).add(&self.offset)
    }
}

pub trait Agent: Send + Sync {
    fn label(&self) -> &str;

    /// Input and output dimension.
    fn dim(&self) -> usize;

    /// Unchecked evaluation; `v` and `out` both have length `dim()`.
    fn apply_into(&self, v: &[f64], out: &mut [f64]);

    fn apply(&self, v: &[f64]) -> Result<Vector> {
        if v.len() != self.dim() {
            return Err(Error::dims(self.dim(), v.len()));
        }
        let mut out = Vector::zeros(self.dim());
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Whether the map is affine. Cheap, unlike [`Agent::affine_part`].
    fn is_affine(&self) -> bool {
        false
    }

    fn affine_part(&self) -> Option<AffinePart> {
        None
    }
}

/// Parameters of the multi-denoiser experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseParams {
    /// Standard deviation of the additive noise, on the [0, 1] intensity scale.
    pub sigma_eta: f64,
    /// Denoising strengths, strictly increasing.
    pub sigma_list: Vec<f64>,
    /// Weight cutoff.
    pub h: f64,
    /// Regularization strength of the data-fidelity prox.
    pub sigma_prox: f64,
}

impl NoiseParams {
    pub fn new(sigma_eta: f64, sigma_list: Vec<f64>, h: f64, sigma_prox: f64) -> Result<Self> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(sigma_eta) && positive(h) && positive(sigma_prox)) {
            return Err(Error::InvalidConfig("noise parameters must be positive".into()));
        }
        if sigma_list.is_empty() || !sigma_list.iter().all(|s| positive(*s)) {
            return Err(Error::InvalidConfig("denoiser strengths must be positive".into()));
        }
        if sigma_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("denoiser strengths must be strictly increasing".into()));
        }
        Ok(NoiseParams {
            sigma_eta,
            sigma_list,
            h,
            sigma_prox,
        })
    }

    /// The five strengths `{10, 15, 25, 35, 50}/255`, `h = 5/255` and `σ = σ_η`.
    pub fn standard(sigma_eta: f64) -> Result<Self> {
        let sigma_list = [10.0, 15.0, 25.0, 35.0, 50.0].iter().map(|s| s / 255.0).collect();
        NoiseParams::new(sigma_eta, sigma_list, 5.0 / 255.0, sigma_eta)
    }
}
