//! Grayscale images on `[0, 1]`, PGM files, PSNR and a synthetic phantom.

use std::path::Path;

use ce_core::tensor::Rng;

use crate::error::{ExperimentError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    /// Row-major. Values may leave `[0, 1]` until written.
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ExperimentError::BadImage("empty image".into()));
        }
        if pixels.len() != width * height {
            return Err(ExperimentError::BadImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Image { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Image::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Same dimensions, new pixels.
    pub fn with_pixels(&self, pixels: Vec<f64>) -> Result<Self> {
        Image::new(self.width, self.height, pixels)
    }

    /// `self + σ·η` with `η` standard normal from `rng`.
    pub fn add_gaussian_noise(&self, sigma: f64, rng: &mut Rng) -> Image {
        let noise = rng.normals(self.pixels.len());
        let pixels = self.pixels.iter().zip(noise).map(|(p, n)| p + sigma * n).collect();
        Image {
            pixels,
            ..self.clone()
        }
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| ExperimentError::io(path, e))?;
        parse_pgm(&bytes)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pgm()).map_err(|e| ExperimentError::io(path, e))
    }

    /// Binary (`P5`) encoding with maxval 255, clamped and rounded half up.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&p| quantize(p)));
        out
    }
}

fn quantize(p: f64) -> u8 {
    let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
    (p * 255.0 + 0.5).floor() as u8
}

/// Header tokens, skipping `#` comments.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn token(&mut self) -> Result<&str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ExperimentError::BadImage("truncated header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| ExperimentError::BadImage("non-ascii header".into()))
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| ExperimentError::BadImage(format!("expected a number, found {tok:?}")))
    }
}

/// Parses plain (`P2`) or binary (`P5`) PGM with maxval 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let mut h = Header { bytes, pos: 0 };
    let magic = h.token()?.to_string();
    if magic != "P2" && magic != "P5" {
        return Err(ExperimentError::BadImage(format!("unsupported magic {magic:?}")));
    }
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if maxval != 255 {
        return Err(ExperimentError::BadImage(format!("maxval {maxval}, expected 255")));
    }
    let count = width * height;
    let values: Vec<u8> = if magic == "P5" {
        // exactly one whitespace byte separates the header from the raster
        let start = h.pos + 1;
        let raster = bytes
            .get(start..start + count)
            .ok_or_else(|| ExperimentError::BadImage("truncated raster".into()))?;
        raster.to_vec()
    } else {
        (0..count)
            .map(|_| {
                let v = h.number()?;
                u8::try_from(v).map_err(|_| ExperimentError::BadImage(format!("sample {v} exceeds 255")))
            })
            .collect::<Result<_>>()?
    };
    Image::new(width, height, values.iter().map(|&b| b as f64 / 255.0).collect())
}

/// `20·log10(1/RMSE)` with peak 1; infinite for identical images.
pub fn psnr(x: &Image, reference: &Image) -> Result<f64> {
    if x.width != reference.width || x.height != reference.height {
        return Err(ExperimentError::Core(ce_core::Error::DimensionMismatch {
            expected: reference.pixels.len(),
            actual: x.pixels.len(),
        }));
    }
    let mse = x
        .pixels
        .iter()
        .zip(&reference.pixels)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.pixels.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

pub const PHANTOM_BACKGROUND: f64 = 0.2;
pub const PHANTOM_DISK: f64 = 0.8;
pub const PHANTOM_SQUARE: f64 = 0.5;
pub const PHANTOM_LINE: f64 = 0.95;

/// Piecewise-constant test image: background, a centered disk, a square in
/// the upper-left and a 2-pixel horizontal line near the bottom.
pub fn phantom(width: usize, height: usize) -> Result<Image> {
    if width < 16 || height < 16 {
        return Err(ExperimentError::InvalidArgument("phantom needs at least 16x16".into()));
    }
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let radius = 0.3 * width.min(height) as f64;
    let (sq0, sq_side) = (width / 16, width.max(height) / 6);
    let line_y = (0.85 * height as f64) as usize;
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let v = if y == line_y || y == line_y + 1 {
                PHANTOM_LINE
            } else if (sq0..sq0 + sq_side).contains(&x) && (sq0..sq0 + sq_side).contains(&y) {
                PHANTOM_SQUARE
            } else if dx * dx + dy * dy <= radius * radius {
                PHANTOM_DISK
            } else {
                PHANTOM_BACKGROUND
            };
            pixels.push(v);
        }
    }
    Image::new(width, height, pixels)
}
