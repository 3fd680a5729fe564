//! Orthonormal separable 2D discrete wavelet transform with periodic
//! boundaries. Analysis plays the role of the inverse sparsifying transform,
//! synthesis its adjoint; orthonormality makes the pair exact inverses.

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    Daubechies4,
}

impl WaveletFamily {
    fn lowpass(self) -> Vec<f64> {
        match self {
            WaveletFamily::Haar => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                vec![s, s]
            }
            WaveletFamily::Daubechies4 => {
                let s3 = 3.0_f64.sqrt();
                let d = 4.0 * 2.0_f64.sqrt();
                vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
            }
        }
    }
}

impl std::str::FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" => Ok(WaveletFamily::Haar),
            "db4" | "daubechies4" => Ok(WaveletFamily::Daubechies4),
            other => Err(Error::InvalidParameter(format!("unknown wavelet family '{other}'"))),
        }
    }
}

/// Orthonormal analysis/synthesis pair on a fixed grid.
#[derive(Debug, Clone)]
pub struct SparsifyingTransform {
    rows: usize,
    cols: usize,
    levels: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SparsifyingTransform {
    pub fn new(family: WaveletFamily, levels: usize, rows: usize, cols: usize) -> Result<Self> {
        let div = 1usize << levels;
        if rows % div != 0 || cols % div != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid {rows}x{cols} not divisible by 2^{levels}"
            )));
        }
        let lo = family.lowpass();
        // quadrature mirror: g[k] = (-1)^k h[L-1-k]
        let hi: Vec<f64> = lo
            .iter()
            .rev()
            .enumerate()
            .map(|(k, &h)| if k % 2 == 0 { h } else { -h })
            .collect();
        Ok(SparsifyingTransform { rows, cols, levels, lo, hi })
    }

    /// Identity transform (zero decomposition levels).
    pub fn identity(rows: usize, cols: usize) -> Self {
        SparsifyingTransform::new(WaveletFamily::Haar, 0, rows, cols).unwrap()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    fn step_1d(&self, signal: &[f64], approx: &mut [f64], detail: &mut [f64]) {
        let len = signal.len();
        let half = len / 2;
        for k in 0..half {
            let mut a = 0.0;
            let mut d = 0.0;
            for (t, (&h, &g)) in self.lo.iter().zip(&self.hi).enumerate() {
                let s = signal[(2 * k + t) % len];
                a += h * s;
                d += g * s;
            }
            approx[k] = a;
            detail[k] = d;
        }
    }

    fn inverse_step_1d(&self, approx: &[f64], detail: &[f64], signal: &mut [f64]) {
        let half = approx.len();
        let len = 2 * half;
        signal[..len].fill(0.0);
        for k in 0..half {
            for (t, (&h, &g)) in self.lo.iter().zip(&self.hi).enumerate() {
                signal[(2 * k + t) % len] += h * approx[k] + g * detail[k];
            }
        }
    }

    fn check_image(&self, x: &Image) -> Result<()> {
        if x.rows() != self.rows || x.cols() != self.cols {
            return Err(Error::dims(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
        Ok(())
    }

    /// Wavelet analysis coefficients of `x` (length N, quadrant layout).
    pub fn analyze(&self, x: &Image) -> Result<Vec<f64>> {
        self.check_image(x)?;
        let mut data = x.as_slice().to_vec();
        let mut scratch_a = vec![0.0; self.rows.max(self.cols)];
        let mut scratch_d = vec![0.0; self.rows.max(self.cols)];
        let mut line = vec![0.0; self.rows.max(self.cols)];
        let (mut r, mut c) = (self.rows, self.cols);
        for _ in 0..self.levels {
            // rows of the active low-frequency block
            for i in 0..r {
                line[..c].copy_from_slice(&data[i * self.cols..i * self.cols + c]);
                self.step_1d(&line[..c], &mut scratch_a[..c / 2], &mut scratch_d[..c / 2]);
                data[i * self.cols..i * self.cols + c / 2].copy_from_slice(&scratch_a[..c / 2]);
                data[i * self.cols + c / 2..i * self.cols + c]
                    .copy_from_slice(&scratch_d[..c / 2]);
            }
            // columns
            for j in 0..c {
                for i in 0..r {
                    line[i] = data[i * self.cols + j];
                }
                self.step_1d(&line[..r], &mut scratch_a[..r / 2], &mut scratch_d[..r / 2]);
                for i in 0..r / 2 {
                    data[i * self.cols + j] = scratch_a[i];
                    data[(i + r / 2) * self.cols + j] = scratch_d[i];
                }
            }
            r /= 2;
            c /= 2;
        }
        Ok(data)
    }

    /// Inverse of `analyze`; reconstructs the image from coefficients.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Image> {
        if coeffs.len() != self.rows * self.cols {
            return Err(Error::dims(
                format!("{} coefficients", self.rows * self.cols),
                format!("{}", coeffs.len()),
            ));
        }
        let mut data = coeffs.to_vec();
        let mut scratch_a = vec![0.0; self.rows.max(self.cols)];
        let mut scratch_d = vec![0.0; self.rows.max(self.cols)];
        let mut line = vec![0.0; self.rows.max(self.cols)];
        for level in (0..self.levels).rev() {
            let r = self.rows >> level;
            let c = self.cols >> level;
            // columns first (reverse of analysis order)
            for j in 0..c {
                for i in 0..r / 2 {
                    scratch_a[i] = data[i * self.cols + j];
                    scratch_d[i] = data[(i + r / 2) * self.cols + j];
                }
                self.inverse_step_1d(&scratch_a[..r / 2], &scratch_d[..r / 2], &mut line);
                for i in 0..r {
                    data[i * self.cols + j] = line[i];
                }
            }
            for i in 0..r {
                scratch_a[..c / 2].copy_from_slice(&data[i * self.cols..i * self.cols + c / 2]);
                scratch_d[..c / 2]
                    .copy_from_slice(&data[i * self.cols + c / 2..i * self.cols + c]);
                self.inverse_step_1d(&scratch_a[..c / 2], &scratch_d[..c / 2], &mut line);
                data[i * self.cols..i * self.cols + c].copy_from_slice(&line[..c]);
            }
        }
        Image::new(self.rows, self.cols, data)
    }
}
