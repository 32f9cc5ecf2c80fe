use super::{Agent, AffinePart};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};

/// Kernel standard deviation in pixels per unit of denoising strength.
pub const KERNEL_STD_PER_STRENGTH: f64 = 10.0;

/// Kernel half-width in standard deviations. The truncated tail is below
/// `exp(-40)`, so the sampled kernel keeps a nonnegative spectrum.
const KERNEL_RADIUS_STDS: f64 = 9.0;

/// Dense affine parts are only materialized up to this many pixels.
pub const MAX_MATERIALIZED_PIXELS: usize = 4096;

/// Linear stand-in for a learned denoiser: separable Gaussian blur with
/// half-sample symmetric (mirror) borders.
#[derive(Clone, Debug)]
pub struct GaussianDenoiser {
    label: String,
    width: usize,
    height: usize,
    kernel_std: f64,
    // taps for offsets -radius..=radius
    taps: Vec<f64>,
}

pub fn gaussian_denoiser_agent(width: usize, height: usize, sigma_i: f64) -> Result<GaussianDenoiser> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig("image dimensions must be positive".into()));
    }
    if !(sigma_i >= 0.0) || !sigma_i.is_finite() {
        return Err(Error::InvalidConfig("denoiser strength must be nonnegative".into()));
    }
    let kernel_std = KERNEL_STD_PER_STRENGTH * sigma_i;
    let taps = gaussian_taps(kernel_std);
    Ok(GaussianDenoiser {
        label: format!("gaussian({:.1}/255)", sigma_i * 255.0),
        width,
        height,
        kernel_std,
        taps,
    })
}

fn gaussian_taps(std: f64) -> Vec<f64> {
    if std <= 0.0 {
        return vec![1.0];
    }
    let radius = (KERNEL_RADIUS_STDS * std).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * std * std)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Half-sample symmetric reflection of an arbitrary index into `0..len`.
fn mirror(i: i64, len: usize) -> usize {
    let period = 2 * len as i64;
    let m = i.rem_euclid(period);
    if m < len as i64 {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

impl GaussianDenoiser {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kernel_std(&self) -> f64 {
        self.kernel_std
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    fn radius(&self) -> i64 {
        (self.taps.len() / 2) as i64
    }

    /// Matrix of the 1-D blur along an axis of length `len`.
    pub fn axis_matrix(&self, len: usize) -> Matrix {
        let r = self.radius();
        let mut m = Matrix::zeros(len, len);
        for i in 0..len {
            for (k, w) in self.taps.iter().enumerate() {
                let j = mirror(i as i64 + k as i64 - r, len);
                m[(i, j)] += w;
            }
        }
        m
    }

    /// Eigenvalues of the 1-D blur along an axis of length `len`. The mirror
    /// extension diagonalizes the operator in the DCT-II basis, giving
    /// `λ_k = Σ_t g(t) cos(π k (t) / len)` summed over all taps.
    pub fn axis_spectrum(&self, len: usize) -> Vec<f64> {
        let r = self.radius();
        (0..len)
            .map(|k| {
                self.taps
                    .iter()
                    .enumerate()
                    .map(|(idx, w)| {
                        let t = (idx as i64 - r) as f64;
                        w * (std::f64::consts::PI * k as f64 * t / len as f64).cos()
                    })
                    .sum()
            })
            .collect()
    }

    /// Smallest and largest eigenvalue of the full 2-D operator, which is
    /// symmetric, so these bound its action. Eigenvalues in `[0, 1]` make
    /// both `F` and `2F − I` nonexpansive.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let sx = self.axis_spectrum(self.width);
        let sy = self.axis_spectrum(self.height);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &sx {
            for b in &sy {
                lo = lo.min(a * b);
                hi = hi.max(a * b);
            }
        }
        (lo, hi)
    }

    fn blur_rows(&self, src: &[f64], dst: &mut [f64]) {
        let (w, r) = (self.width, self.radius());
        for y in 0..self.height {
            let row = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (k, t) in self.taps.iter().enumerate() {
                    acc += t * row[mirror(x as i64 + k as i64 - r, w)];
                }
                dst[y * w + x] = acc;
            }
        }
    }

    fn blur_cols(&self, src: &[f64], dst: &mut [f64]) {
        let (w, h, r) = (self.width, self.height, self.radius());
        for y in 0..h {
            let out = &mut dst[y * w..(y + 1) * w];
            out.iter_mut().for_each(|o| *o = 0.0);
            for (k, t) in self.taps.iter().enumerate() {
                let sy = mirror(y as i64 + k as i64 - r, h);
                let row = &src[sy * w..(sy + 1) * w];
                for (o, s) in out.iter_mut().zip(row) {
                    *o += t * s;
                }
            }
        }
    }
}

impl Agent for GaussianDenoiser {
    fn label(&self) -> &str {
        &self.label
    }

    fn dim(&self) -> usize {
        self.width * self.height
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        if self.taps.len() == 1 {
            out.copy_from_slice(v);
            return;
        }
        let mut tmp = vec![0.0; v.len()];
        self.blur_rows(v, &mut tmp);
        self.blur_cols(&tmp, out);
    }

    fn is_affine(&self) -> bool {
        true
    }

    /// Kronecker product of the two axis matrices; only for images of at
    /// most [`MAX_MATERIALIZED_PIXELS`] pixels.
    fn affine_part(&self) -> Option<AffinePart> {
        let n = self.dim();
        if n > MAX_MATERIALIZED_PIXELS {
            return None;
        }
        let kx = self.axis_matrix(self.width);
        let ky = self.axis_matrix(self.height);
        let w = self.width;
        let matrix = Matrix::from_fn(n, n, |i, j| ky[(i / w, j / w)] * kx[(i % w, j % w)]);
        Some(AffinePart {
            matrix,
            offset: Vector::zeros(n),
        })
    }
}
