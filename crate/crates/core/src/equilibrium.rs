//! The consensus equilibrium problem: `N` agents sharing a point `x*`,
//! balanced by tensions `u_i*` that average to zero under the weights.
//!
//! Everything operates on stacked points `v = (v_1, …, v_N)`. With
//! `F(v) = (F_1(v_1), …, F_N(v_N))` and `G(v) = (v̄, …, v̄)` for the
//! weighted mean `v̄ = Σ μ_i v_i`, the equilibrium is exactly `F(v) = G(v)`,
//! or equivalently the fixed point `T(v) = (2G − I)(2F − I)v = v`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::agents::{Agent, NoiseParams};
use crate::error::{Error, Result};
use crate::solvers::RunTrace;
use crate::tensor::{distance, write_csv_row, Vector};

/// Problems at least this large evaluate agents in parallel.
const PARALLEL_MIN_ENTRIES: usize = 1 << 14;

/// Element of `R^{nN}` stored as `N` contiguous blocks of length `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedPoint {
    block_len: usize,
    data: Vec<f64>,
}

impl StackedPoint {
    pub fn zeros(blocks: usize, block_len: usize) -> Self {
        StackedPoint {
            block_len,
            data: vec![0.0; blocks * block_len],
        }
    }

    /// `N` copies of `x`.
    pub fn replicate(x: &[f64], blocks: usize) -> Self {
        let mut data = Vec::with_capacity(x.len() * blocks);
        for _ in 0..blocks {
            data.extend_from_slice(x);
        }
        StackedPoint {
            block_len: x.len(),
            data,
        }
    }

    pub fn from_blocks<B: AsRef<[f64]>>(blocks: &[B]) -> Result<Self> {
        let block_len = blocks.first().map_or(0, |b| b.as_ref().len());
        let mut data = Vec::with_capacity(block_len * blocks.len());
        for b in blocks {
            if b.as_ref().len() != block_len {
                return Err(Error::dims(block_len, b.as_ref().len()));
            }
            data.extend_from_slice(b.as_ref());
        }
        Ok(StackedPoint { block_len, data })
    }

    pub fn from_flat(data: Vec<f64>, block_len: usize) -> Result<Self> {
        if block_len == 0 || !data.len().is_multiple_of(block_len) {
            return Err(Error::dims(block_len, data.len()));
        }
        Ok(StackedPoint { block_len, data })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn num_blocks(&self) -> usize {
        self.data.len().checked_div(self.block_len).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.block_len..(i + 1) * self.block_len]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.block_len..(i + 1) * self.block_len]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.block_len.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        crate::tensor::norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `‖self − other‖ / √(nN)`
    pub fn rms_distance(&self, other: &StackedPoint) -> f64 {
        distance(&self.data, &other.data) / (self.data.len() as f64).sqrt()
    }

    /// One block per CSV row, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for b in self.blocks() {
            write_csv_row(&mut s, b);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::InvalidConfig(format!("bad CSV value: {e}")))?;
            blocks.push(row);
        }
        StackedPoint::from_blocks(&blocks)
    }
}

/// Positive weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || !mu.iter().all(|m| m.is_finite() && *m > 0.0) {
            return Err(Error::InvalidConfig("weights must be positive".into()));
        }
        let sum: f64 = mu.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("weights sum to {sum}, not 1")));
        }
        Ok(Weights(mu))
    }

    pub fn uniform(n: usize) -> Self {
        Weights(vec![1.0 / n as f64; n])
    }

    /// Normalizes positive scores into weights.
    pub fn from_scores(p: &[f64]) -> Result<Self> {
        let total: f64 = p.iter().sum();
        Weights::new(p.iter().map(|x| x / total).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `N` agents of common dimension plus their weights.
#[derive(Clone)]
pub struct Problem {
    agents: Vec<Arc<dyn Agent>>,
    weights: Weights,
    dim: usize,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("agents", &self.agents.iter().map(|a| a.label()).collect::<Vec<_>>())
            .field("weights", &self.weights)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Result of a solve, with `v* = x̂* + u*`.
#[derive(Clone, Debug)]
pub struct CESolution {
    pub x_star: Vector,
    pub u_star: StackedPoint,
    pub v_star: StackedPoint,
    /// `‖F(v*) − G(v*)‖`, recomputed at extraction.
    pub residual: f64,
    pub converged: bool,
    pub trace: RunTrace,
    /// `‖Σ μ_i u_i‖`, zero up to rounding.
    pub weighted_tension: f64,
    /// `‖u*‖`; distinguishes equilibria when several exist.
    pub tension_norm: f64,
}

impl Problem {
    pub fn new(agents: Vec<Arc<dyn Agent>>, weights: Weights) -> Result<Self> {
        let dim = agents
            .first()
            .map(|a| a.dim())
            .ok_or_else(|| Error::InvalidConfig("problem needs at least one agent".into()))?;
        if let Some(a) = agents.iter().find(|a| a.dim() != dim) {
            return Err(Error::dims(dim, a.dim()));
        }
        if weights.len() != agents.len() {
            return Err(Error::dims(agents.len(), weights.len()));
        }
        Ok(Problem { agents, weights, dim })
    }

    pub fn with_uniform_weights(agents: Vec<Arc<dyn Agent>>) -> Result<Self> {
        let n = agents.len();
        Problem::new(agents, Weights::uniform(n.max(1)))
    }

    pub fn agents(&self) -> &[Arc<dyn Agent>] {
        &self.agents
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Agent dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// `nN`
    pub fn stacked_dim(&self) -> usize {
        self.dim * self.agents.len()
    }

    pub fn zeros(&self) -> StackedPoint {
        StackedPoint::zeros(self.num_agents(), self.dim)
    }

    pub fn check(&self, v: &StackedPoint) -> Result<()> {
        if v.block_len() != self.dim {
            return Err(Error::dims(self.dim, v.block_len()));
        }
        if v.num_blocks() != self.num_agents() {
            return Err(Error::dims(self.num_agents(), v.num_blocks()));
        }
        Ok(())
    }

    /// `F(v)`: each agent applied to its own block.
    pub fn apply_f(&self, v: &StackedPoint) -> Result<StackedPoint> {
        self.check(v)?;
        Ok(self.apply_f_unchecked(v))
    }

    pub(crate) fn apply_f_unchecked(&self, v: &StackedPoint) -> StackedPoint {
        let n = self.dim;
        let mut out = StackedPoint::zeros(self.num_agents(), n);
        if v.len() >= PARALLEL_MIN_ENTRIES && self.num_agents() > 1 {
            out.data
                .par_chunks_mut(n)
                .zip(v.data.par_chunks(n))
                .zip(self.agents.par_iter())
                .for_each(|((o, vi), a)| a.apply_into(vi, o));
        } else {
            for ((o, vi), a) in out.data.chunks_mut(n).zip(v.data.chunks(n)).zip(&self.agents) {
                a.apply_into(vi, o);
            }
        }
        out
    }

    /// `v̄ = Σ μ_i v_i`
    pub fn weighted_mean(&self, v: &StackedPoint) -> Vector {
        let mut mean = Vector::zeros(v.block_len());
        for (b, mu) in v.blocks().zip(self.weights.as_slice()) {
            mean.axpy(*mu, b);
        }
        mean
    }

    /// `G(v)`: every block replaced by the weighted mean.
    pub fn apply_g(&self, v: &StackedPoint) -> Result<StackedPoint> {
        self.check(v)?;
        Ok(StackedPoint::replicate(&self.weighted_mean(v), self.num_agents()))
    }

    /// `(2G − I) z`
    pub fn reflect_g(&self, z: &StackedPoint) -> StackedPoint {
        let mean = self.weighted_mean(z);
        let mut out = z.clone();
        for b in out.data.chunks_mut(z.block_len()) {
            for (o, m) in b.iter_mut().zip(mean.iter()) {
                *o = 2.0 * m - *o;
            }
        }
        out
    }

    /// `T(v) = (2G − I)(2F − I)v` given `f = F(v)`.
    pub fn t_from_f(&self, v: &StackedPoint, f: &StackedPoint) -> StackedPoint {
        let mut z = f.clone();
        for (zi, vi) in z.data.iter_mut().zip(&v.data) {
            *zi = 2.0 * *zi - vi;
        }
        self.reflect_g(&z)
    }

    /// `T(v)`, one sweep of the agents and one averaging.
    pub fn apply_t(&self, v: &StackedPoint) -> Result<StackedPoint> {
        let f = self.apply_f(v)?;
        Ok(self.t_from_f(v, &f))
    }

    /// `F(v) − G(v)` given `f = F(v)`.
    pub fn fg_from_f(&self, v: &StackedPoint, f: &StackedPoint) -> StackedPoint {
        let mean = self.weighted_mean(v);
        let mut out = f.clone();
        for b in out.data.chunks_mut(v.block_len()) {
            for (o, m) in b.iter_mut().zip(mean.iter()) {
                *o -= m;
            }
        }
        out
    }

    /// `R(v) = ‖F(v) − G(v)‖` over all `nN` entries.
    pub fn residual(&self, v: &StackedPoint) -> Result<f64> {
        let f = self.apply_f(v)?;
        Ok(self.fg_from_f(v, &f).norm())
    }

    /// `x* = v̄`, `u* = v − x̂*`, with the residual recomputed.
    pub fn extract_solution(&self, v: &StackedPoint, trace: RunTrace) -> Result<CESolution> {
        self.check(v)?;
        let x_star = self.weighted_mean(v);
        let mut u_star = v.clone();
        for b in u_star.data.chunks_mut(self.dim) {
            for (u, x) in b.iter_mut().zip(x_star.iter()) {
                *u -= x;
            }
        }
        let weighted_tension = self.weighted_mean(&u_star).norm();
        let residual = self.residual(v)?;
        let converged = trace.converged();
        Ok(CESolution {
            x_star,
            tension_norm: u_star.norm(),
            u_star,
            v_star: v.clone(),
            residual,
            converged,
            trace,
            weighted_tension,
        })
    }

    /// Checks `max_i ‖F_i(x + u_i) − x‖ ≤ tol` and `‖Σ μ_i u_i‖ ≤ tol`.
    pub fn verify_ce(&self, x: &[f64], u: &StackedPoint, tol: f64) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::dims(self.dim, x.len()));
        }
        self.check(u)?;
        let mut worst: f64 = 0.0;
        for (agent, ui) in self.agents.iter().zip(u.blocks()) {
            let point: Vec<f64> = x.iter().zip(ui).map(|(a, b)| a + b).collect();
            let fx = agent.apply(&point)?;
            worst = worst.max(distance(&fx, x));
        }
        let ubar = self.weighted_mean(u).norm();
        Ok(worst <= tol && ubar <= tol)
    }
}

/// Adaptive weights for `K` denoisers plus the data-fidelity slot:
/// `p_i = exp(−(σ_η − σ_i)²/(2h²))`, `p_{K+1} = Σ p_i`, `μ = p / Σp`.
/// The fidelity slot always gets exactly one half.
pub fn denoiser_weights(np: &NoiseParams) -> Result<Weights> {
    let mut p: Vec<f64> = np
        .sigma_list
        .iter()
        .map(|s| (-(np.sigma_eta - s).powi(2) / (2.0 * np.h * np.h)).exp())
        .collect();
    let denoiser_total: f64 = p.iter().sum();
    if !(denoiser_total > 0.0) {
        return Err(Error::InvalidConfig("all denoiser weights underflowed".into()));
    }
    p.push(denoiser_total);
    // Σp = 2·denoiser_total exactly, so the last weight is exactly 1/2
    let total = 2.0 * denoiser_total;
    Weights::new(p.iter().map(|x| x / total).collect())
}
