//! Circulant 2D convolution: the blur operator stored by its Fourier-domain
//! eigenvalues, so forward/adjoint applications are pointwise products.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft2::Fft2;
use crate::image::Image;

/// Block-circulant-with-circulant-blocks convolution operator.
#[derive(Debug)]
pub struct ConvolutionOperator {
    rows: usize,
    cols: usize,
    eigenvalues: Vec<Complex64>,
    fft: Fft2,
}

/// Builds the circulant convolution operator for `psf` embedded on a
/// `rows x cols` grid. The kernel center pixel (floor of half extents) is
/// circularly shifted to index (0,0) so symmetric kernels stay phase-free.
pub fn build_convolution(psf: &Image, rows: usize, cols: usize) -> Result<ConvolutionOperator> {
    if psf.rows() > rows || psf.cols() > cols {
        return Err(Error::dims(
            format!("psf within {}x{}", rows, cols),
            format!("{}x{}", psf.rows(), psf.cols()),
        ));
    }
    if psf.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter("psf must be nonzero".into()));
    }
    let (cr, cc) = (psf.rows() / 2, psf.cols() / 2);
    let mut padded = vec![0.0; rows * cols];
    for i in 0..psf.rows() {
        for j in 0..psf.cols() {
            let r = (i + rows - cr) % rows;
            let c = (j + cols - cc) % cols;
            padded[r * cols + c] += psf.get(i, j);
        }
    }
    let fft = Fft2::new(rows, cols);
    let eigenvalues = fft.forward_real(&padded);
    Ok(ConvolutionOperator { rows, cols, eigenvalues, fft })
}

impl ConvolutionOperator {
    /// Identity operator (unit impulse kernel) on the given grid.
    pub fn identity(rows: usize, cols: usize) -> Self {
        let fft = Fft2::new(rows, cols);
        ConvolutionOperator {
            rows,
            cols,
            eigenvalues: vec![Complex64::new(1.0, 0.0); rows * cols],
            fft,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    fn check_shape(&self, x: &Image) -> Result<()> {
        if x.rows() != self.rows || x.cols() != self.cols {
            return Err(Error::dims(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
        Ok(())
    }

    fn apply_spectral(&self, x: &Image, conjugate: bool) -> Result<Image> {
        self.check_shape(x)?;
        let mut spec = self.fft.forward_real(x.as_slice());
        for (s, &lambda) in spec.iter_mut().zip(&self.eigenvalues) {
            *s *= if conjugate { lambda.conj() } else { lambda };
        }
        Image::new(self.rows, self.cols, self.fft.inverse_real(spec))
    }

    /// Hx by frequency-domain pointwise multiplication.
    pub fn apply(&self, x: &Image) -> Result<Image> {
        self.apply_spectral(x, false)
    }

    /// H^T x, using conjugated eigenvalues.
    pub fn apply_adjoint(&self, x: &Image) -> Result<Image> {
        self.apply_spectral(x, true)
    }

    /// Solves (I + 2 H^T H) out = rhs by pointwise Fourier division.
    /// This is the normal-equations system of the stacked splitting
    /// constraints with an orthonormal sparsifying transform.
    pub fn solve_identity_plus_2hth(&self, rhs: &Image) -> Result<Image> {
        self.check_shape(rhs)?;
        let mut spec = self.fft.forward_real(rhs.as_slice());
        for (s, &lambda) in spec.iter_mut().zip(&self.eigenvalues) {
            *s /= 1.0 + 2.0 * lambda.norm_sqr();
        }
        Image::new(self.rows, self.cols, self.fft.inverse_real(spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(rows: usize, cols: usize, r: usize, c: usize) -> Image {
        let mut img = Image::zeros(rows, cols);
        img.set(r, c, 1.0);
        img
    }

    /// Dense circulant matrix built directly from index arithmetic;
    /// independent of the FFT path.
    fn dense_bccb(psf: &Image, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        let n = rows * cols;
        let (cr, cc) = (psf.rows() / 2, psf.cols() / 2);
        let mut m = vec![vec![0.0; n]; n];
        for or in 0..rows {
            for oc in 0..cols {
                for i in 0..psf.rows() {
                    for j in 0..psf.cols() {
                        let ir = (or + rows + cr - i) % rows;
                        let ic = (oc + cols + cc - j) % cols;
                        m[or * cols + oc][ir * cols + ic] += psf.get(i, j);
                    }
                }
            }
        }
        m
    }

    fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn rand_image(rows: usize, cols: usize, seed: u64) -> Image {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Image::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn impulse_kernel_is_identity() {
        let psf = impulse(3, 3, 1, 1);
        let op = build_convolution(&psf, 8, 8).unwrap();
        for lambda in op.eigenvalues() {
            assert!((lambda - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let x = rand_image(8, 8, 1);
        let y = op.apply(&x).unwrap();
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ones_1x2_kernel_circular_output() {
        // kernel center at floor(2/2)=1: an impulse at 0 picks up the tap left
        // of center, which wraps around to the last sample
        let psf = Image::new(1, 2, vec![1.0, 1.0]).unwrap();
        let op = build_convolution(&psf, 1, 4).unwrap();
        let y = op.apply(&impulse(1, 4, 0, 0)).unwrap();
        let expect = [1.0, 0.0, 0.0, 1.0];
        for (a, b) in y.as_slice().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "got {:?}", y.as_slice());
        }
    }

    #[test]
    fn impulse_response_reproduces_wrapped_kernel() {
        let psf = rand_image(5, 5, 7);
        let op = build_convolution(&psf, 16, 16).unwrap();
        let dense = dense_bccb(&psf, 16, 16);
        let x = impulse(16, 16, 0, 0);
        let y = op.apply(&x).unwrap();
        let expect = matvec(&dense, x.as_slice());
        let scale = psf.max_abs();
        for (a, b) in y.as_slice().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn matches_dense_bccb_product() {
        let psf = rand_image(3, 3, 11);
        let op = build_convolution(&psf, 8, 8).unwrap();
        let dense = dense_bccb(&psf, 8, 8);
        let x = rand_image(8, 8, 12);
        let y = op.apply(&x).unwrap();
        let expect = matvec(&dense, x.as_slice());
        let norm: f64 = expect.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = y
            .as_slice()
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err / norm < 1e-10);
    }

    #[test]
    fn linearity() {
        let psf = rand_image(3, 3, 21);
        let op = build_convolution(&psf, 8, 8).unwrap();
        let x = rand_image(8, 8, 22);
        let y = rand_image(8, 8, 23);
        let (a, b) = (0.7, -1.3);
        let mut comb = Image::zeros(8, 8);
        for i in 0..64 {
            comb.as_mut_slice()[i] = a * x.as_slice()[i] + b * y.as_slice()[i];
        }
        let lhs = op.apply(&comb).unwrap();
        let hx = op.apply(&x).unwrap();
        let hy = op.apply(&y).unwrap();
        for i in 0..64 {
            let rhs = a * hx.as_slice()[i] + b * hy.as_slice()[i];
            assert!((lhs.as_slice()[i] - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn adjoint_inner_product_identity() {
        let psf = rand_image(5, 5, 31);
        let op = build_convolution(&psf, 16, 16).unwrap();
        let x = rand_image(16, 16, 32);
        let y = rand_image(16, 16, 33);
        let hx = op.apply(&x).unwrap();
        let hty = op.apply_adjoint(&y).unwrap();
        let lhs = crate::image::dot(hx.as_slice(), y.as_slice());
        let rhs = crate::image::dot(x.as_slice(), hty.as_slice());
        assert!((lhs - rhs).abs() / lhs.abs().max(1.0) < 1e-10);
    }

    #[test]
    fn symmetric_kernel_is_self_adjoint() {
        let psf = Image::new(
            3,
            3,
            vec![0.5, 1.0, 0.5, 1.0, 2.0, 1.0, 0.5, 1.0, 0.5],
        )
        .unwrap();
        let op = build_convolution(&psf, 8, 8).unwrap();
        let x = rand_image(8, 8, 41);
        let fwd = op.apply(&x).unwrap();
        let adj = op.apply_adjoint(&x).unwrap();
        for (a, b) in fwd.as_slice().iter().zip(adj.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn oversize_psf_rejected() {
        let psf = Image::zeros(9, 9);
        assert!(build_convolution(&psf, 8, 8).is_err());
    }
}
