//! Independent oracles and spectral diagnostics.

mod oracles;
mod spectrum;

pub use oracles::{affine_ce_oracle, consensus_opt_oracle, QuadraticObjective};
pub use spectrum::{
    jacobian_spectrum, mann_spectrum_check, max_modulus, optimal_rho, spectrum_of, t_jacobian, SpectrumReport,
};
