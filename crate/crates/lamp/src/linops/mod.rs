//! Structured linear forward operators with full spectral (SVD) access.
//!
//! Every operator `K = U S V^T` exposes `apply`, `adjoint`, rotations into and
//! out of the spectral coordinates on both the image side (`V`) and the
//! measurement side (`U`), the singular values, and a pseudo-inverse. Circular
//! convolutions are diagonalized by the 2D DFT with the phase factors absorbed
//! into `U`; block averaging has a rank-one SVD per block; arbitrary matrices
//! are supported through a dense SVD for verification work.

// `from_spectral*` are coordinate maps on an existing operator, not
// conversion constructors.
#![allow(clippy::wrong_self_convention)]

mod fft2;
mod kernel;

pub use kernel::Kernel;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::imaging::{Image, ImageShape};
use fft2::Fft2;

/// Guard for materializing explicit matrices.
pub const DENSE_ORACLE_LIMIT: usize = 4096;

/// Relative threshold under which a singular value is treated as zero.
const A_TOL_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    GaussianBlur,
    MotionBlur,
    BlockSr,
    Dense,
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            OperatorKind::GaussianBlur => "gaussian_blur",
            OperatorKind::MotionBlur => "motion_blur",
            OperatorKind::BlockSr => "block_sr",
            OperatorKind::Dense => "dense",
        };
        f.write_str(name)
    }
}

/// Linear forward operator with spectral access.
#[derive(Debug)]
pub struct SpectralOperator {
    kind: OperatorKind,
    in_shape: ImageShape,
    out_shape: ImageShape,
    /// Singular values indexed like the image-side spectral coordinates;
    /// the first `paired_len` entries line up with measurement coordinates.
    spectrum: Vec<f64>,
    inner: Inner,
}

#[derive(Debug)]
enum Inner {
    Conv(ConvOp),
    Block(BlockOp),
    Dense(DenseOp),
}

/// Circular convolution with a normalized kernel.
///
/// `k_hat` is the unnormalized 2D DFT of the kernel padded to the image size
/// with its center tap at the origin.
#[derive(Debug)]
struct ConvOp {
    kernel: Kernel,
    k_hat: Vec<Complex64>,
    phases: Vec<Complex64>,
    fft: Fft2,
}

/// Non-overlapping r x r block averaging followed by downsampling.
#[derive(Debug)]
struct BlockOp {
    r: usize,
    /// Orthonormal within-block basis; column 0 is the constant direction.
    basis: Array2<f64>,
}

/// Arbitrary matrix with a full SVD (`u`: m x m, `v`: n x n).
#[derive(Debug)]
struct DenseOp {
    mat: DMatrix<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

/// Circular convolution operator with a Gaussian kernel.
pub fn make_gaussian_blur(shape: ImageShape, kernel_size: usize, sigma: f64) -> Result<SpectralOperator> {
    let kernel = Kernel::gaussian(kernel_size, sigma)?;
    make_conv(shape, kernel, OperatorKind::GaussianBlur)
}

/// Circular convolution operator with a procedurally generated motion kernel.
pub fn make_motion_blur(
    shape: ImageShape,
    kernel_size: usize,
    intensity: f64,
    seed: u64,
) -> Result<SpectralOperator> {
    let kernel = Kernel::motion(kernel_size, intensity, seed)?;
    make_conv(shape, kernel, OperatorKind::MotionBlur)
}

/// Identity operator (single-tap convolution).
pub fn make_identity(shape: ImageShape) -> Result<SpectralOperator> {
    make_conv(shape, Kernel::delta(), OperatorKind::GaussianBlur)
}

/// Circular convolution with an explicit kernel.
pub fn make_conv(shape: ImageShape, kernel: Kernel, kind: OperatorKind) -> Result<SpectralOperator> {
    let (h, w) = (shape.height, shape.width);
    if kernel.size() > h.min(w) {
        return Err(Error::config(
            "kernel_size",
            format!("kernel {} exceeds image min side {}", kernel.size(), h.min(w)),
        ));
    }
    let k = kernel.size();
    let c = (k / 2) as i64;
    let mut padded = vec![Complex64::default(); h * w];
    for ky in 0..k {
        for kx in 0..k {
            let py = (ky as i64 - c).rem_euclid(h as i64) as usize;
            let px = (kx as i64 - c).rem_euclid(w as i64) as usize;
            padded[py * w + px] += Complex64::new(kernel.taps()[(ky, kx)], 0.0);
        }
    }
    let fft = Fft2::new(h, w);
    fft.forward(&mut padded);
    let mags: Vec<f64> = padded.iter().map(|v| v.norm()).collect();
    let phases: Vec<Complex64> = padded
        .iter()
        .zip(&mags)
        .map(|(v, &m)| if m > 0.0 { v / m } else { Complex64::new(1.0, 0.0) })
        .collect();
    let mut spectrum = Vec::with_capacity(shape.numel());
    for _ in 0..shape.channels {
        spectrum.extend_from_slice(&mags);
    }
    Ok(SpectralOperator {
        kind,
        in_shape: shape,
        out_shape: shape,
        spectrum,
        inner: Inner::Conv(ConvOp { kernel, k_hat: padded, phases, fft }),
    })
}

/// Block super-resolution operator: averages each non-overlapping r x r block.
pub fn make_block_sr(shape: ImageShape, r: usize) -> Result<SpectralOperator> {
    if r == 0 {
        return Err(Error::config("factor", "must be positive"));
    }
    if !shape.height.is_multiple_of(r) || !shape.width.is_multiple_of(r) {
        return Err(Error::config(
            "factor",
            format!("image {}x{} not divisible by {r}", shape.height, shape.width),
        ));
    }
    let out_shape = ImageShape::new(shape.channels, shape.height / r, shape.width / r);
    let m = out_shape.numel();
    let n = shape.numel();
    let mut spectrum = vec![1.0 / r as f64; m];
    spectrum.resize(n, 0.0);
    Ok(SpectralOperator {
        kind: OperatorKind::BlockSr,
        in_shape: shape,
        out_shape,
        spectrum,
        inner: Inner::Block(BlockOp { r, basis: householder_block_basis(r) }),
    })
}

/// Dense operator from an explicit matrix (rows = measurement dim,
/// columns = image dim), with a full SVD computed at construction.
pub fn make_dense(in_shape: ImageShape, out_shape: ImageShape, matrix: Array2<f64>) -> Result<SpectralOperator> {
    let (m, n) = (out_shape.numel(), in_shape.numel());
    if matrix.dim() != (m, n) {
        return Err(Error::shape(format!("{m}x{n} matrix"), format!("{:?}", matrix.dim())));
    }
    let mat = DMatrix::from_row_iterator(m, n, matrix.iter().cloned());
    let svd = mat.clone().svd(true, true);
    let u_thin = svd.u.ok_or_else(|| Error::Singular("svd did not return u".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Singular("svd did not return v_t".into()))?;
    let k = svd.singular_values.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
    s.resize(n, 0.0);

    let u_cols: Vec<DVector<f64>> = order.iter().map(|&i| u_thin.column(i).into_owned()).collect();
    let v_cols: Vec<DVector<f64>> = order.iter().map(|&i| v_t.row(i).transpose()).collect();
    let u_full = complete_orthonormal(u_cols, m)?;
    let v_full = complete_orthonormal(v_cols, n)?;

    Ok(SpectralOperator {
        kind: OperatorKind::Dense,
        in_shape,
        out_shape,
        spectrum: s,
        inner: Inner::Dense(DenseOp {
            mat,
            u: DMatrix::from_columns(&u_full),
            v: DMatrix::from_columns(&v_full),
        }),
    })
}

fn householder_block_basis(r: usize) -> Array2<f64> {
    let d = r * r;
    let mut basis = Array2::eye(d);
    if r == 1 {
        return basis;
    }
    // Reflection sending e0 to the normalized constant vector (1/r, ..., 1/r).
    let mut v: Vec<f64> = vec![-1.0 / r as f64; d];
    v[0] += 1.0;
    let norm_sq: f64 = v.iter().map(|x| x * x).sum();
    for i in 0..d {
        for j in 0..d {
            basis[(i, j)] -= 2.0 * v[i] * v[j] / norm_sq;
        }
    }
    basis
}

fn complete_orthonormal(mut cols: Vec<DVector<f64>>, dim: usize) -> Result<Vec<DVector<f64>>> {
    let mut candidate = 0usize;
    let mut attempts = 0usize;
    while cols.len() < dim {
        if attempts > 2 * dim + 8 {
            return Err(Error::Singular("orthonormal completion did not converge".into()));
        }
        attempts += 1;
        let mut v = DVector::zeros(dim);
        v[candidate % dim] = 1.0;
        candidate += 1;
        for _ in 0..2 {
            for b in &cols {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    Ok(cols)
}

impl SpectralOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn in_shape(&self) -> ImageShape {
        self.in_shape
    }

    pub fn out_shape(&self) -> ImageShape {
        self.out_shape
    }

    /// Singular values in image-side spectral order (length = input numel).
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Number of spectral indices that have a measurement-side counterpart.
    pub fn paired_len(&self) -> usize {
        self.in_shape.numel().min(self.out_shape.numel())
    }

    /// Threshold below which singular values are treated as exactly zero.
    pub fn a_tol(&self) -> f64 {
        A_TOL_REL * self.spectrum.iter().cloned().fold(0.0, f64::max)
    }

    /// The convolution kernel, when the operator is a convolution.
    pub fn kernel(&self) -> Option<&Kernel> {
        match &self.inner {
            Inner::Conv(c) => Some(&c.kernel),
            _ => None,
        }
    }

    fn check_in(&self, x: &Image) -> Result<()> {
        if x.shape() != self.in_shape {
            return Err(Error::shape(format!("{}", self.in_shape), format!("{}", x.shape())));
        }
        Ok(())
    }

    fn check_out(&self, y: &Image) -> Result<()> {
        if y.shape() != self.out_shape {
            return Err(Error::shape(format!("{}", self.out_shape), format!("{}", y.shape())));
        }
        Ok(())
    }

    /// Forward map `y = K x`.
    pub fn apply(&self, x: &Image) -> Result<Image> {
        self.check_in(x)?;
        match &self.inner {
            Inner::Conv(c) => Ok(c.filter(x, &c.k_hat, self.in_shape)),
            Inner::Block(b) => Ok(b.apply(x, self.out_shape)),
            Inner::Dense(d) => {
                let v = DVector::from_column_slice(x.as_flat());
                let y = &d.mat * v;
                Image::from_flat(self.out_shape, y.as_slice().to_vec())
            }
        }
    }

    /// Adjoint map `x = K^T y`.
    pub fn adjoint(&self, y: &Image) -> Result<Image> {
        self.check_out(y)?;
        match &self.inner {
            Inner::Conv(c) => {
                let conj: Vec<Complex64> = c.k_hat.iter().map(|v| v.conj()).collect();
                Ok(c.filter(y, &conj, self.in_shape))
            }
            Inner::Block(b) => Ok(b.adjoint(y, self.in_shape)),
            Inner::Dense(d) => {
                let v = DVector::from_column_slice(y.as_flat());
                let x = d.mat.transpose() * v;
                Image::from_flat(self.in_shape, x.as_slice().to_vec())
            }
        }
    }

    /// Image-side rotation into spectral coordinates (`V^T x`). Unitary.
    pub fn to_spectral(&self, x: &Image) -> Result<Vec<Complex64>> {
        self.check_in(x)?;
        Ok(match &self.inner {
            Inner::Conv(c) => c.to_spectral_image(x, self.in_shape),
            Inner::Block(b) => b.to_spectral(x, self.in_shape, self.out_shape),
            Inner::Dense(d) => real_mat_vec(&d.v.transpose(), x.as_flat()),
        })
    }

    /// Inverse image-side rotation (`V xbar`).
    pub fn from_spectral(&self, xbar: &[Complex64]) -> Result<Image> {
        if xbar.len() != self.in_shape.numel() {
            return Err(Error::shape(
                format!("{} spectral coords", self.in_shape.numel()),
                format!("{}", xbar.len()),
            ));
        }
        match &self.inner {
            Inner::Conv(c) => Ok(c.from_spectral_image(xbar, self.in_shape)),
            Inner::Block(b) => Ok(b.from_spectral(xbar, self.in_shape, self.out_shape)),
            Inner::Dense(d) => {
                Image::from_flat(self.in_shape, complex_mat_vec_re(&d.v, xbar))
            }
        }
    }

    /// Measurement-side rotation into spectral coordinates (`U^T y`).
    pub fn to_spectral_out(&self, y: &Image) -> Result<Vec<Complex64>> {
        self.check_out(y)?;
        Ok(match &self.inner {
            Inner::Conv(c) => c.to_spectral_meas(y, self.out_shape),
            Inner::Block(_) => y.as_flat().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            Inner::Dense(d) => real_mat_vec(&d.u.transpose(), y.as_flat()),
        })
    }

    /// Inverse measurement-side rotation (`U ybar`).
    pub fn from_spectral_out(&self, ybar: &[Complex64]) -> Result<Image> {
        if ybar.len() != self.out_shape.numel() {
            return Err(Error::shape(
                format!("{} spectral coords", self.out_shape.numel()),
                format!("{}", ybar.len()),
            ));
        }
        match &self.inner {
            Inner::Conv(c) => Ok(c.from_spectral_meas(ybar, self.out_shape)),
            Inner::Block(_) => {
                Image::from_flat(self.out_shape, ybar.iter().map(|v| v.re).collect())
            }
            Inner::Dense(d) => Image::from_flat(self.out_shape, complex_mat_vec_re(&d.u, ybar)),
        }
    }

    /// Pseudo-inverse: data-consistent value `ybar_i / a_i` on the range,
    /// zero on the null space.
    pub fn pinv_apply(&self, y: &Image) -> Result<Image> {
        let ybar = self.to_spectral_out(y)?;
        let tol = self.a_tol();
        let n = self.in_shape.numel();
        let mut xbar = vec![Complex64::default(); n];
        for i in 0..self.paired_len() {
            let a = self.spectrum[i];
            if a > tol {
                xbar[i] = ybar[i] / a;
            }
        }
        self.from_spectral(&xbar)
    }

    /// Explicit matrix of the operator, built column-by-column through
    /// `apply`. Refuses input dimensions above [`DENSE_ORACLE_LIMIT`].
    pub fn dense_oracle(&self) -> Result<Array2<f64>> {
        let n = self.in_shape.numel();
        let m = self.out_shape.numel();
        if n > DENSE_ORACLE_LIMIT {
            return Err(Error::DenseGuard { dim: n, limit: DENSE_ORACLE_LIMIT });
        }
        let mut mat = Array2::zeros((m, n));
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.apply(&Image::from_flat(self.in_shape, e)?)?;
            for (i, v) in col.as_flat().iter().enumerate() {
                mat[(i, j)] = *v;
            }
        }
        Ok(mat)
    }
}

impl ConvOp {
    /// Per-channel Fourier filtering with the given transfer function.
    fn filter(&self, x: &Image, transfer: &[Complex64], shape: ImageShape) -> Image {
        let hw = shape.height * shape.width;
        let mut out = Vec::with_capacity(shape.numel());
        for ch in 0..shape.channels {
            let mut buf: Vec<Complex64> = x.as_flat()[ch * hw..(ch + 1) * hw]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            self.fft.forward(&mut buf);
            for (b, t) in buf.iter_mut().zip(transfer) {
                *b *= t;
            }
            self.fft.inverse(&mut buf);
            out.extend(buf.iter().map(|v| v.re / hw as f64));
        }
        Image::from_flat(shape, out).expect("conv preserves shape")
    }

    fn to_spectral_image(&self, x: &Image, shape: ImageShape) -> Vec<Complex64> {
        let hw = shape.height * shape.width;
        let scale = 1.0 / (hw as f64).sqrt();
        let mut out = Vec::with_capacity(shape.numel());
        for ch in 0..shape.channels {
            let mut buf: Vec<Complex64> = x.as_flat()[ch * hw..(ch + 1) * hw]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            self.fft.forward(&mut buf);
            out.extend(buf.iter().map(|v| v * scale));
        }
        out
    }

    fn from_spectral_image(&self, xbar: &[Complex64], shape: ImageShape) -> Image {
        let hw = shape.height * shape.width;
        let scale = 1.0 / (hw as f64).sqrt();
        let mut out = Vec::with_capacity(shape.numel());
        for ch in 0..shape.channels {
            let mut buf: Vec<Complex64> = xbar[ch * hw..(ch + 1) * hw].to_vec();
            self.fft.inverse(&mut buf);
            out.extend(buf.iter().map(|v| v.re * scale));
        }
        Image::from_flat(shape, out).expect("shape preserved")
    }

    /// `U^T y`: Fourier transform followed by conjugate-phase rotation.
    fn to_spectral_meas(&self, y: &Image, shape: ImageShape) -> Vec<Complex64> {
        let hw = shape.height * shape.width;
        let scale = 1.0 / (hw as f64).sqrt();
        let mut out = Vec::with_capacity(shape.numel());
        for ch in 0..shape.channels {
            let mut buf: Vec<Complex64> = y.as_flat()[ch * hw..(ch + 1) * hw]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            self.fft.forward(&mut buf);
            out.extend(buf.iter().zip(&self.phases).map(|(v, p)| v * p.conj() * scale));
        }
        out
    }

    fn from_spectral_meas(&self, ybar: &[Complex64], shape: ImageShape) -> Image {
        let hw = shape.height * shape.width;
        let scale = 1.0 / (hw as f64).sqrt();
        let mut out = Vec::with_capacity(shape.numel());
        for ch in 0..shape.channels {
            let mut buf: Vec<Complex64> = ybar[ch * hw..(ch + 1) * hw]
                .iter()
                .zip(&self.phases)
                .map(|(v, p)| v * p)
                .collect();
            self.fft.inverse(&mut buf);
            out.extend(buf.iter().map(|v| v.re * scale));
        }
        Image::from_flat(shape, out).expect("shape preserved")
    }
}

impl BlockOp {
    fn apply(&self, x: &Image, out_shape: ImageShape) -> Image {
        let r = self.r;
        let data = x.data();
        let mut out = Image::zeros(out_shape);
        for c in 0..out_shape.channels {
            for by in 0..out_shape.height {
                for bx in 0..out_shape.width {
                    let mut acc = 0.0;
                    for dy in 0..r {
                        for dx in 0..r {
                            acc += data[(c, by * r + dy, bx * r + dx)];
                        }
                    }
                    out.data_mut()[(c, by, bx)] = acc / (r * r) as f64;
                }
            }
        }
        out
    }

    fn adjoint(&self, y: &Image, in_shape: ImageShape) -> Image {
        let r = self.r;
        let inv = 1.0 / (r * r) as f64;
        let mut out = Image::zeros(in_shape);
        let ydata = y.data();
        let (oh, ow) = (in_shape.height / r, in_shape.width / r);
        for c in 0..in_shape.channels {
            for by in 0..oh {
                for bx in 0..ow {
                    let v = ydata[(c, by, bx)] * inv;
                    for dy in 0..r {
                        for dx in 0..r {
                            out.data_mut()[(c, by * r + dy, bx * r + dx)] = v;
                        }
                    }
                }
            }
        }
        out
    }

    /// Spectral layout: all block-average coordinates first (aligned with the
    /// flattened measurement), then the r^2 - 1 residual directions per block.
    fn to_spectral(&self, x: &Image, in_shape: ImageShape, out_shape: ImageShape) -> Vec<Complex64> {
        let r = self.r;
        let d = r * r;
        let m = out_shape.numel();
        let n = in_shape.numel();
        let nb = out_shape.height * out_shape.width;
        let data = x.data();
        let mut out = vec![Complex64::default(); n];
        let mut vals = vec![0.0; d];
        for c in 0..in_shape.channels {
            for by in 0..out_shape.height {
                for bx in 0..out_shape.width {
                    for dy in 0..r {
                        for dx in 0..r {
                            vals[dy * r + dx] = data[(c, by * r + dy, bx * r + dx)];
                        }
                    }
                    let b = c * nb + by * out_shape.width + bx;
                    for j in 0..d {
                        let coeff: f64 = (0..d).map(|i| self.basis[(i, j)] * vals[i]).sum();
                        if j == 0 {
                            out[b] = Complex64::new(coeff, 0.0);
                        } else {
                            out[m + b * (d - 1) + (j - 1)] = Complex64::new(coeff, 0.0);
                        }
                    }
                }
            }
        }
        out
    }

    fn from_spectral(&self, xbar: &[Complex64], in_shape: ImageShape, out_shape: ImageShape) -> Image {
        let r = self.r;
        let d = r * r;
        let m = out_shape.numel();
        let nb = out_shape.height * out_shape.width;
        let mut out = Image::zeros(in_shape);
        for c in 0..in_shape.channels {
            for by in 0..out_shape.height {
                for bx in 0..out_shape.width {
                    let b = c * nb + by * out_shape.width + bx;
                    for i in 0..d {
                        let mut acc = Complex64::default();
                        for j in 0..d {
                            let coeff = if j == 0 { xbar[b] } else { xbar[m + b * (d - 1) + (j - 1)] };
                            acc += coeff * self.basis[(i, j)];
                        }
                        out.data_mut()[(c, by * r + i / r, bx * r + i % r)] = acc.re;
                    }
                }
            }
        }
        out
    }
}

fn real_mat_vec(mat: &DMatrix<f64>, x: &[f64]) -> Vec<Complex64> {
    let v = DVector::from_column_slice(x);
    (mat * v).iter().map(|&r| Complex64::new(r, 0.0)).collect()
}

/// Real basis times complex coordinates, keeping the real part
/// (`Re(M x) = M Re(x)` for real `M`).
fn complex_mat_vec_re(mat: &DMatrix<f64>, x: &[Complex64]) -> Vec<f64> {
    let re = DVector::from_iterator(x.len(), x.iter().map(|v| v.re));
    (mat * re).as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{max_abs_diff, Image, ImageShape};
    use approx::assert_abs_diff_eq;

    fn rand_image(shape: ImageShape, seed: u64) -> Image {
        Image::standard_normal(shape, seed)
    }

    /// Direct spatial-domain circular convolution, independent of the FFT path.
    fn conv_reference(x: &Image, kernel: &Kernel) -> Image {
        let shape = x.shape();
        let k = kernel.size();
        let c = (k / 2) as i64;
        let mut out = Image::zeros(shape);
        for ch in 0..shape.channels {
            for y in 0..shape.height as i64 {
                for xx in 0..shape.width as i64 {
                    let mut acc = 0.0;
                    for ky in 0..k as i64 {
                        for kx in 0..k as i64 {
                            let sy = (y - (ky - c)).rem_euclid(shape.height as i64) as usize;
                            let sx = (xx - (kx - c)).rem_euclid(shape.width as i64) as usize;
                            acc += kernel.taps()[(ky as usize, kx as usize)]
                                * x.data()[(ch, sy, sx)];
                        }
                    }
                    out.data_mut()[(ch, y as usize, xx as usize)] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_spatial_reference() {
        let shape = ImageShape::new(2, 6, 5);
        let op = make_gaussian_blur(shape, 3, 1.0).unwrap();
        let x = rand_image(shape, 10);
        let fast = op.apply(&x).unwrap();
        let slow = conv_reference(&x, op.kernel().unwrap());
        assert!(max_abs_diff(&fast, &slow) <= 1e-12);
    }

    #[test]
    fn delta_kernel_is_identity_with_unit_spectrum() {
        let shape = ImageShape::new(1, 8, 8);
        let op = make_identity(shape).unwrap();
        for &a in op.spectrum() {
            assert_abs_diff_eq!(a, 1.0, epsilon = 1e-14);
        }
        let x = rand_image(shape, 1);
        assert!(max_abs_diff(&op.apply(&x).unwrap(), &x) <= 1e-12);
        assert!(max_abs_diff(&op.pinv_apply(&x).unwrap(), &x) <= 1e-12);
    }

    #[test]
    fn kernel_larger_than_image_is_rejected() {
        let shape = ImageShape::new(1, 8, 8);
        assert!(matches!(
            make_gaussian_blur(shape, 9, 1.0),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn dc_singular_value_is_one_for_normalized_kernels() {
        let shape = ImageShape::new(1, 8, 8);
        for op in [
            make_gaussian_blur(shape, 3, 1.0).unwrap(),
            make_motion_blur(shape, 5, 0.5, 7).unwrap(),
        ] {
            assert_abs_diff_eq!(op.spectrum()[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity() {
        let shape = ImageShape::new(1, 8, 8);
        let ops = [
            make_gaussian_blur(shape, 3, 1.0).unwrap(),
            make_motion_blur(shape, 5, 0.5, 3).unwrap(),
            make_block_sr(shape, 4).unwrap(),
        ];
        for op in &ops {
            let x = rand_image(op.in_shape(), 21);
            let y = rand_image(op.out_shape(), 22);
            let kx = op.apply(&x).unwrap();
            let kty = op.adjoint(&y).unwrap();
            let lhs: f64 = kx.as_flat().iter().zip(y.as_flat()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.as_flat().iter().zip(kty.as_flat()).map(|(a, b)| a * b).sum();
            let scale = x.l2_norm() * y.l2_norm();
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "kind {}", op.kind());
        }
    }

    #[test]
    fn spectral_rotations_are_isometric_inverses() {
        let shape = ImageShape::new(1, 8, 8);
        let ops = [
            make_gaussian_blur(shape, 3, 1.0).unwrap(),
            make_motion_blur(shape, 5, 0.5, 3).unwrap(),
            make_block_sr(shape, 2).unwrap(),
        ];
        for op in &ops {
            let x = rand_image(op.in_shape(), 33);
            let xbar = op.to_spectral(&x).unwrap();
            let norm: f64 = xbar.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - x.l2_norm()).abs() <= 1e-10);
            let back = op.from_spectral(&xbar).unwrap();
            assert!(max_abs_diff(&back, &x) <= 1e-10, "kind {}", op.kind());

            let y = rand_image(op.out_shape(), 34);
            let ybar = op.to_spectral_out(&y).unwrap();
            let back_y = op.from_spectral_out(&ybar).unwrap();
            assert!(max_abs_diff(&back_y, &y) <= 1e-10);
        }
    }

    #[test]
    fn apply_factors_through_spectral_coordinates() {
        let shape = ImageShape::new(1, 8, 8);
        let ops = [
            make_gaussian_blur(shape, 3, 1.0).unwrap(),
            make_motion_blur(shape, 7, 0.5, 5).unwrap(),
            make_block_sr(shape, 4).unwrap(),
        ];
        for op in &ops {
            let x = rand_image(op.in_shape(), 44);
            let mut xbar = op.to_spectral(&x).unwrap();
            for (i, v) in xbar.iter_mut().enumerate() {
                *v *= op.spectrum()[i];
            }
            let via_spectral = op.from_spectral_out(&xbar[..op.out_shape().numel()]).unwrap();
            let direct = op.apply(&x).unwrap();
            assert!(max_abs_diff(&via_spectral, &direct) <= 1e-10, "kind {}", op.kind());
        }
    }

    #[test]
    fn circular_shift_equivariance() {
        let shape = ImageShape::new(1, 8, 8);
        let op = make_gaussian_blur(shape, 3, 1.0).unwrap();
        let x = rand_image(shape, 55);
        let shift = |im: &Image| {
            let mut out = Image::zeros(shape);
            for y in 0..8 {
                for xx in 0..8 {
                    out.data_mut()[(0, (y + 3) % 8, (xx + 5) % 8)] = im.data()[(0, y, xx)];
                }
            }
            out
        };
        let a = op.apply(&shift(&x)).unwrap();
        let b = shift(&op.apply(&x).unwrap());
        assert!(max_abs_diff(&a, &b) <= 1e-10);
    }

    #[test]
    fn block_sr_structure() {
        let shape = ImageShape::new(1, 8, 8);
        let r1 = make_block_sr(shape, 1).unwrap();
        let x = rand_image(shape, 66);
        assert!(max_abs_diff(&r1.apply(&x).unwrap(), &x) <= 1e-12);

        let r4 = make_block_sr(shape, 4).unwrap();
        for i in 0..r4.paired_len() {
            assert_eq!(r4.spectrum()[i], 0.25);
        }
        for i in r4.paired_len()..shape.numel() {
            assert_eq!(r4.spectrum()[i], 0.0);
        }
        // constant image maps to the same constant
        let c = Image::filled(shape, 0.7);
        let y = r4.apply(&c).unwrap();
        for v in y.as_flat() {
            assert_abs_diff_eq!(*v, 0.7, epsilon = 1e-12);
        }
        // apply o adjoint = I / r^2 on measurement space
        let ym = rand_image(r4.out_shape(), 67);
        let back = r4.apply(&r4.adjoint(&ym).unwrap()).unwrap();
        for (a, b) in back.as_flat().iter().zip(ym.as_flat()) {
            assert!((a - b / 16.0).abs() <= 1e-12);
        }
        assert!(make_block_sr(ImageShape::new(1, 9, 8), 4).is_err());
    }

    #[test]
    fn block_sr_pinv_reproduces_means() {
        let shape = ImageShape::new(1, 8, 8);
        let op = make_block_sr(shape, 4).unwrap();
        let x = rand_image(shape, 68);
        let y = op.apply(&x).unwrap();
        let pinv = op.pinv_apply(&y).unwrap();
        let means = op.apply(&pinv).unwrap();
        assert!(max_abs_diff(&means, &y) <= 1e-10);
    }

    #[test]
    fn pinv_is_range_projection_for_all_kinds() {
        let shape = ImageShape::new(1, 8, 8);
        let ops = [
            make_gaussian_blur(shape, 3, 1.0).unwrap(),
            make_motion_blur(shape, 5, 0.5, 11).unwrap(),
            make_block_sr(shape, 2).unwrap(),
        ];
        for op in &ops {
            let x = rand_image(op.in_shape(), 77);
            let kx = op.apply(&x).unwrap();
            let kpk = op.apply(&op.pinv_apply(&kx).unwrap()).unwrap();
            assert!(max_abs_diff(&kpk, &kx) <= 1e-8, "kind {}", op.kind());
        }
    }

    #[test]
    fn dense_operator_svd_structure() {
        let in_shape = ImageShape::new(1, 4, 4);
        let out_shape = ImageShape::new(1, 4, 4);
        let m = Array2::from_shape_fn((16, 16), |(i, j)| {
            ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5
        });
        let op = make_dense(in_shape, out_shape, m.clone()).unwrap();
        let x = rand_image(in_shape, 88);
        // apply match against explicit matrix product
        let direct = op.apply(&x).unwrap();
        let mut expect = vec![0.0; 16];
        for i in 0..16 {
            for j in 0..16 {
                expect[i] += m[(i, j)] * x.as_flat()[j];
            }
        }
        for (a, b) in direct.as_flat().iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-12);
        }
        // right-singular directions scale into left ones
        for i in 0..4 {
            let a = op.spectrum()[i];
            let mut e = vec![Complex64::default(); 16];
            e[i] = Complex64::new(1.0, 0.0);
            let v_i = op.from_spectral(&e).unwrap();
            let kv = op.apply(&v_i).unwrap();
            let mut u_e = vec![Complex64::default(); 16];
            u_e[i] = Complex64::new(a, 0.0);
            let au = op.from_spectral_out(&u_e).unwrap();
            assert!(max_abs_diff(&kv, &au) <= 1e-8);
        }
    }

    #[test]
    fn dense_oracle_guard() {
        let shape = ImageShape::new(3, 64, 64);
        let op = make_gaussian_blur(shape, 3, 1.0).unwrap();
        assert!(matches!(op.dense_oracle(), Err(Error::DenseGuard { .. })));
    }

    #[test]
    fn blur_oracle_is_circulant_block_circulant() {
        // the explicit matrix of a circular convolution depends only on the
        // wrapped pixel offset: M[(y,x),(y',x')] = f((y-y') mod h, (x-x') mod w)
        let shape = ImageShape::new(1, 8, 8);
        let op = make_gaussian_blur(shape, 3, 1.0).unwrap();
        let m = op.dense_oracle().unwrap();
        for row in 0..64 {
            let (y, x) = (row / 8, row % 8);
            for col in 0..64 {
                let (yy, xx) = (col / 8, col % 8);
                let canon = m[((y + 8 - yy) % 8 * 8 + (x + 8 - xx) % 8, 0)];
                assert!((m[(row, col)] - canon).abs() <= 1e-12);
            }
        }
        // identity operator's oracle is the identity matrix
        let eye = make_identity(shape).unwrap().dense_oracle().unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((eye[(i, j)] - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_oracle_is_transpose_of_apply_oracle() {
        let shape = ImageShape::new(1, 4, 4);
        let op = make_gaussian_blur(shape, 3, 0.8).unwrap();
        let fwd = op.dense_oracle().unwrap();
        // adjoint matrix column by column
        let mut adj = Array2::zeros((16, 16));
        for j in 0..16 {
            let mut e = vec![0.0; 16];
            e[j] = 1.0;
            let col = op.adjoint(&Image::from_flat(op.out_shape(), e).unwrap()).unwrap();
            for (i, v) in col.as_flat().iter().enumerate() {
                adj[(i, j)] = *v;
            }
        }
        for i in 0..16 {
            for j in 0..16 {
                assert!((adj[(i, j)] - fwd[(j, i)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn motion_blur_spectrum_is_deterministic() {
        let shape = ImageShape::new(1, 8, 8);
        let a = make_motion_blur(shape, 5, 0.5, 9).unwrap();
        let b = make_motion_blur(shape, 5, 0.5, 9).unwrap();
        assert!(a.spectrum().iter().zip(b.spectrum()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
