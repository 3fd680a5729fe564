//! Compressive measurement operators: a structurally random matrix built from
//! a sign-flip diagonal, a fast orthonormal transform and uniform row
//! subsampling (rows exactly orthonormal), or an explicit dense Gaussian
//! matrix for the non-orthogonal acquisition model.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrmBase {
    WalshHadamard,
    Dct,
    /// No mixing transform; with unit signs and full sampling this gives
    /// Phi = I, the degenerate acquisition used by end-to-end checks.
    Identity,
}

impl std::str::FromStr for SrmBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wht" | "walsh-hadamard" | "hadamard" => Ok(SrmBase::WalshHadamard),
            "dct" => Ok(SrmBase::Dct),
            "identity" => Ok(SrmBase::Identity),
            other => Err(Error::InvalidParameter(format!("unknown SRM base '{other}'"))),
        }
    }
}

impl std::fmt::Display for SrmBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SrmBase::WalshHadamard => write!(f, "wht"),
            SrmBase::Dct => write!(f, "dct"),
            SrmBase::Identity => write!(f, "identity"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Srm,
    Gaussian,
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srm" => Ok(MatrixKind::Srm),
            "gaussian" => Ok(MatrixKind::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown matrix kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatrixKind::Srm => write!(f, "srm"),
            MatrixKind::Gaussian => write!(f, "gaussian"),
        }
    }
}

struct DctPlan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

enum Inner {
    Srm {
        base: SrmBase,
        signs: Vec<f64>,
        selected: Vec<usize>,
        dct: Option<DctPlan>,
    },
    Gaussian {
        // single-precision storage keeps the dense matrix within memory at
        // full image scale; accumulation stays in f64
        entries: Vec<f32>,
    },
}

/// The compressive sampling operator Phi mapping R^n to R^m.
pub struct MeasurementOperator {
    n: usize,
    m: usize,
    seed: u64,
    inner: Inner,
}

impl std::fmt::Debug for MeasurementOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasurementOperator")
            .field("kind", &self.kind())
            .field("n", &self.n)
            .field("m", &self.m)
            .field("seed", &self.seed)
            .finish()
    }
}

/// Mixed-precision dot product in independent lanes; the split accumulators
/// break the serial dependency so the loop vectorizes.
fn dot_f32_f64(row: &[f32], v: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let (row_main, row_tail) = row.split_at(row.len() - row.len() % LANES);
    let (v_main, v_tail) = v.split_at(row_main.len());
    for (r, x) in row_main.chunks_exact(LANES).zip(v_main.chunks_exact(LANES)) {
        for k in 0..LANES {
            acc[k] += r[k] as f64 * x[k];
        }
    }
    let mut total: f64 = acc.iter().sum();
    for (&a, &b) in row_tail.iter().zip(v_tail) {
        total += a as f64 * b;
    }
    total
}

/// Phi = R_Omega * F * D with D a random +-1 diagonal, F the chosen
/// orthonormal fast transform and R_Omega a restriction to m uniformly
/// sampled distinct rows.
pub fn build_srm(seed: u64, n: usize, m: usize, base: SrmBase) -> Result<MeasurementOperator> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 0 < m <= n, got m={m}, n={n}")));
    }
    if base == SrmBase::WalshHadamard && !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "Walsh-Hadamard base requires n to be a power of two, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs: Vec<f64> =
        (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    let selected: Vec<usize> = sample(&mut rng, n, m).into_vec();
    let dct = match base {
        SrmBase::WalshHadamard | SrmBase::Identity => None,
        SrmBase::Dct => {
            let mut planner = FftPlanner::new();
            Some(DctPlan {
                fwd: planner.plan_fft_forward(n),
                inv: planner.plan_fft_inverse(n),
            })
        }
    };
    Ok(MeasurementOperator { n, m, seed, inner: Inner::Srm { base, signs, selected, dct } })
}

/// Dense i.i.d. N(0, 1/m) matrix; not orthogonal in general.
pub fn build_gaussian(seed: u64, n: usize, m: usize) -> Result<MeasurementOperator> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 0 < m <= n, got m={m}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let entries: Vec<f32> = (0..n * m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (z * scale) as f32
        })
        .collect();
    Ok(MeasurementOperator { n, m, seed, inner: Inner::Gaussian { entries } })
}

impl MeasurementOperator {
    /// The identity acquisition Phi = I_n (orthogonal, no compression).
    pub fn identity(n: usize) -> MeasurementOperator {
        MeasurementOperator {
            n,
            m: n,
            seed: 0,
            inner: Inner::Srm {
                base: SrmBase::Identity,
                signs: vec![1.0; n],
                selected: (0..n).collect(),
                dct: None,
            },
        }
    }
}

/// In-place fast Walsh-Hadamard transform, normalized so the matrix is
/// orthogonal (and self-inverse).
fn fwht_normalized(buf: &mut [f64]) {
    let n = buf.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (buf[i], buf[i + h]);
                buf[i] = a + b;
                buf[i + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    for v in buf {
        *v *= scale;
    }
}

/// Orthonormal DCT-II computed through a length-n complex FFT.
fn dct2_ortho(plan: &DctPlan, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut v = vec![Complex64::default(); n];
    // even samples ascending, odd samples descending
    for j in 0..n {
        let idx = if j % 2 == 0 { j / 2 } else { n - 1 - (j / 2) };
        v[idx] = Complex64::new(x[j], 0.0);
    }
    plan.fwd.process(&mut v);
    let mut out = vec![0.0; n];
    for k in 0..n {
        let phase = Complex64::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2.0 * n as f64));
        let s = (phase * v[k]).re; // = sum_j x[j] cos(pi k (2j+1) / 2n)
        let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        out[k] = c * s;
    }
    out
}

/// Orthonormal DCT-III, the transpose (and inverse) of `dct2_ortho`.
fn dct3_ortho(plan: &DctPlan, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    // fold the orthonormal row weights of the forward transform into the
    // coefficients, leaving plain cosine half-sums to invert
    let s: Vec<f64> = (0..n)
        .map(|k| {
            let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            x[k] * c * n as f64 / if k == 0 { 1.0 } else { 2.0 }
        })
        .collect();
    let mut w = vec![Complex64::default(); n];
    w[0] = Complex64::new(s[0], 0.0);
    for k in 1..n {
        let phase = Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / (2.0 * n as f64));
        w[k] = phase * Complex64::new(s[k], -s[n - k]);
    }
    plan.inv.process(&mut w);
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let idx = if j % 2 == 0 { j / 2 } else { n - 1 - (j / 2) };
        *o = w[idx].re / n as f64;
    }
    // recombine with the forward's per-row weights: transpose of C has the
    // column scaling folded into s already, but the DC row used sqrt(1/n)
    // while others used sqrt(2/n); the fold above accounted for it exactly.
    out
}

impl MeasurementOperator {
    pub fn kind(&self) -> MatrixKind {
        match self.inner {
            Inner::Srm { .. } => MatrixKind::Srm,
            Inner::Gaussian { .. } => MatrixKind::Gaussian,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn srm_base(&self) -> Option<SrmBase> {
        match &self.inner {
            Inner::Srm { base, .. } => Some(*base),
            Inner::Gaussian { .. } => None,
        }
    }

    /// True when Phi Phi^T = I_m holds by construction.
    pub fn is_orthogonal(&self) -> bool {
        matches!(self.inner, Inner::Srm { .. })
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::dims(format!("vector of length {expected}"), format!("{got}")));
        }
        Ok(())
    }

    /// Phi v, length m. The SRM path never materializes a dense matrix.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len(), self.n)?;
        match &self.inner {
            Inner::Srm { base, signs, selected, dct } => {
                let mut t: Vec<f64> = v.iter().zip(signs).map(|(x, s)| x * s).collect();
                let u = match base {
                    SrmBase::WalshHadamard => {
                        fwht_normalized(&mut t);
                        t
                    }
                    SrmBase::Dct => dct2_ortho(dct.as_ref().unwrap(), &t),
                    SrmBase::Identity => t,
                };
                Ok(selected.iter().map(|&i| u[i]).collect())
            }
            Inner::Gaussian { entries } => {
                let mut out = vec![0.0; self.m];
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &entries[i * self.n..(i + 1) * self.n];
                    *o = dot_f32_f64(row, v);
                }
                Ok(out)
            }
        }
    }

    /// Phi^T y, length n.
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y.len(), self.m)?;
        match &self.inner {
            Inner::Srm { base, signs, selected, dct } => {
                let mut u = vec![0.0; self.n];
                for (&i, &yi) in selected.iter().zip(y) {
                    u[i] = yi;
                }
                let t = match base {
                    SrmBase::WalshHadamard => {
                        fwht_normalized(&mut u);
                        u
                    }
                    SrmBase::Dct => dct3_ortho(dct.as_ref().unwrap(), &u),
                    SrmBase::Identity => u,
                };
                Ok(t.iter().zip(signs).map(|(x, s)| x * s).collect())
            }
            Inner::Gaussian { entries } => {
                let mut out = vec![0.0; self.n];
                for (i, &yi) in y.iter().enumerate() {
                    let row = &entries[i * self.n..(i + 1) * self.n];
                    for (o, &a) in out.iter_mut().zip(row) {
                        *o += a as f64 * yi;
                    }
                }
                Ok(out)
            }
        }
    }
}
