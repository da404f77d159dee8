//! Image container, degradation pipeline, reference metrics, and the exact
//! linear-Gaussian posterior oracle.

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linops::SpectralOperator;
use crate::priors::GaussianPrior;

/// Dimensions of an image tensor, channels first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        ImageShape { channels, height, width }
    }

    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }
}

impl std::fmt::Display for ImageShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.channels, self.height, self.width)
    }
}

/// Real-valued image tensor with shape (channels, height, width).
///
/// Values are nominally in [0, 1] but are never clamped inside the sampling
/// dynamics; clamping happens only at metric and export time.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array3<f64>,
}

impl Image {
    pub fn zeros(shape: ImageShape) -> Self {
        Image { data: Array3::zeros((shape.channels, shape.height, shape.width)) }
    }

    pub fn filled(shape: ImageShape, value: f64) -> Self {
        Image { data: Array3::from_elem((shape.channels, shape.height, shape.width), value) }
    }

    /// 1x1x1 image holding a single value; handy for scalar identity tests.
    pub fn scalar(value: f64) -> Self {
        Image::filled(ImageShape::new(1, 1, 1), value)
    }

    pub fn from_array(data: Array3<f64>) -> Self {
        Image { data }
    }

    pub fn from_flat(shape: ImageShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.numel() {
            return Err(Error::shape(format!("{} values", shape.numel()), format!("{}", values.len())));
        }
        let data = Array3::from_shape_vec((shape.channels, shape.height, shape.width), values)
            .map_err(|e| Error::shape("conforming flat buffer", e.to_string()))?;
        Ok(Image { data })
    }

    /// White Gaussian image drawn from a seeded generator.
    pub fn standard_normal(shape: ImageShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array3::from_shape_simple_fn(
            (shape.channels, shape.height, shape.width),
            || StandardNormal.sample(&mut rng),
        );
        Image { data }
    }

    pub fn shape(&self) -> ImageShape {
        let d = self.data.dim();
        ImageShape::new(d.0, d.1, d.2)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    /// Flat view in (channel, row, column) order.
    pub fn as_flat(&self) -> &[f64] {
        self.data.as_slice().expect("image tensors are always standard layout")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Elementwise clamp into [0, 1]; used at metric/export time only.
    pub fn clamp01(&self) -> Image {
        Image { data: self.data.mapv(|v| v.clamp(0.0, 1.0)) }
    }

    /// True iff every element is bitwise identical to `other`'s.
    pub fn bit_identical(&self, other: &Image) -> bool {
        self.shape() == other.shape()
            && self
                .as_flat()
                .iter()
                .zip(other.as_flat())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Mean squared error between two same-shape images.
pub fn mse(a: &Image, b: &Image) -> f64 {
    assert_eq!(a.shape(), b.shape(), "mse: shape mismatch");
    let n = a.shape().numel() as f64;
    a.as_flat().iter().zip(b.as_flat()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// Maximum absolute elementwise difference.
pub fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.as_flat()
        .iter()
        .zip(b.as_flat())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Measurement synthesis `y = K x0 + sigma_y * z` with seeded Gaussian noise.
pub fn degrade(x0: &Image, op: &SpectralOperator, sigma_y: f64, seed: u64) -> Result<Image> {
    if sigma_y < 0.0 {
        return Err(Error::config("sigma_y", "must be >= 0"));
    }
    let mut y = op.apply(x0)?;
    if sigma_y > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in y.data_mut().iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma_y * z;
        }
    }
    Ok(y)
}

/// Peak signal-to-noise ratio in decibels with peak value 1.0.
///
/// Identical images give `f64::INFINITY`.
pub fn psnr(x: &Image, reference: &Image) -> f64 {
    let m = mse(x, reference);
    if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / m).log10()
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// constants C1 = 0.01^2, C2 = 0.03^2, dynamic range 1; channel-averaged over
/// all fully interior window positions.
pub fn ssim(x: &Image, reference: &Image) -> Result<f64> {
    if x.shape() != reference.shape() {
        return Err(Error::shape(format!("{}", reference.shape()), format!("{}", x.shape())));
    }
    let shape = x.shape();
    if shape.height < SSIM_WINDOW || shape.width < SSIM_WINDOW {
        return Err(Error::config(
            "image",
            format!("min side {} smaller than SSIM window {SSIM_WINDOW}", shape.height.min(shape.width)),
        ));
    }
    let window = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let (xs, ys) = (x.data(), reference.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..shape.channels {
        for top in 0..=(shape.height - SSIM_WINDOW) {
            for left in 0..=(shape.width - SSIM_WINDOW) {
                let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let w = window[dy * SSIM_WINDOW + dx];
                        let p = xs[(c, top + dy, left + dx)];
                        let q = ys[(c, top + dy, left + dx)];
                        mx += w * p;
                        my += w * q;
                        mxx += w * p * p;
                        myy += w * q * q;
                        mxy += w * p * q;
                    }
                }
                let (vx, vy, cov) = (mxx - mx * mx, myy - my * my, mxy - mx * my);
                let score = ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
                total += score;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let mut w: Vec<f64> = (0..size * size)
        .map(|i| {
            let (dy, dx) = ((i / size) as f64 - c, (i % size) as f64 - c);
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

/// Exact posterior mean for a Gaussian prior diagonal in the operator's
/// right-singular basis, observed through `y = K x + e`, `e ~ N(0, sigma_y^2 I)`.
///
/// Componentwise in spectral coordinates:
/// `m_i + c_i a_i (a_i^2 c_i + sigma_y^2)^{-1} (y_i - a_i m_i)`;
/// null-space components keep the prior mean.
pub fn exact_posterior_mean(
    prior: &GaussianPrior,
    op: &SpectralOperator,
    y: &Image,
    sigma_y: f64,
) -> Result<Image> {
    let mut mbar = op.to_spectral(prior.mean())?;
    let ybar = op.to_spectral_out(y)?;
    let spectrum = op.spectrum();
    let var = prior.spectral_var();
    let paired = ybar.len().min(mbar.len());
    for i in 0..paired {
        let a = spectrum[i];
        if a == 0.0 {
            continue;
        }
        let c = var[i];
        let denom = a * a * c + sigma_y * sigma_y;
        if denom == 0.0 {
            // c = 0 and sigma_y = 0: point-mass prior, keep the mean.
            continue;
        }
        let gain = c * a / denom;
        mbar[i] = mbar[i] + (ybar[i] - mbar[i] * a) * gain;
    }
    op.from_spectral(&mbar)
}
