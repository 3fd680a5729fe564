//! Reconstruction quality metrics and the envelope / B-mode display path.

use crate::error::{Error, Result};
use crate::image::Image;

/// Rectangular region used for contrast measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl RegionBox {
    pub fn validate(&self, img: &Image) -> Result<()> {
        if self.height * self.width < 4 {
            return Err(Error::InvalidParameter("region area must be at least 4 pixels".into()));
        }
        if self.top + self.height > img.rows() || self.left + self.width > img.cols() {
            return Err(Error::InvalidParameter(format!(
                "region {:?} exceeds {}x{} image",
                self,
                img.rows(),
                img.cols()
            )));
        }
        Ok(())
    }

    fn overlaps(&self, other: &RegionBox) -> bool {
        self.top < other.top + other.height
            && other.top < self.top + self.height
            && self.left < other.left + other.width
            && other.left < self.left + self.width
    }

    fn mean_var(&self, img: &Image) -> (f64, f64) {
        let n = (self.height * self.width) as f64;
        let mut sum = 0.0;
        for r in self.top..self.top + self.height {
            for c in self.left..self.left + self.width {
                sum += img.get(r, c);
            }
        }
        let mean = sum / n;
        let mut var = 0.0;
        for r in self.top..self.top + self.height {
            for c in self.left..self.left + self.width {
                var += (img.get(r, c) - mean).powi(2);
            }
        }
        (mean, var / n)
    }
}

fn check_same_shape(x: &Image, xhat: &Image) -> Result<()> {
    if !x.same_shape(xhat) {
        return Err(Error::dims(
            format!("{}x{}", x.rows(), x.cols()),
            format!("{}x{}", xhat.rows(), xhat.cols()),
        ));
    }
    Ok(())
}

/// 10 log10(N L^2 / ||x - xhat||^2) with L the maximum entry of x.
/// Identical images report +infinity.
pub fn psnr(x: &Image, xhat: &Image) -> Result<f64> {
    check_same_shape(x, xhat)?;
    let err: f64 = x
        .as_slice()
        .iter()
        .zip(xhat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = x.as_slice().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    Ok(10.0 * (x.len() as f64 * peak * peak / err).log10())
}

/// Single global structural similarity from whole-image statistics, with
/// stabilizers c1 = (0.01)^2 and c2 = (0.03)^2 for unit dynamic range.
pub fn ssim(x: &Image, xhat: &Image) -> Result<f64> {
    check_same_shape(x, xhat)?;
    let n = x.len() as f64;
    let mx = x.as_slice().iter().sum::<f64>() / n;
    let mh = xhat.as_slice().iter().sum::<f64>() / n;
    let mut vx = 0.0;
    let mut vh = 0.0;
    let mut cov = 0.0;
    for (&a, &b) in x.as_slice().iter().zip(xhat.as_slice()) {
        vx += (a - mx) * (a - mx);
        vh += (b - mh) * (b - mh);
        cov += (a - mx) * (b - mh);
    }
    vx /= n;
    vh /= n;
    cov /= n;
    let c1 = 0.01f64.powi(2);
    let c2 = 0.03f64.powi(2);
    Ok(((2.0 * mx * mh + c1) * (2.0 * cov + c2)) / ((mx * mx + mh * mh + c1) * (vx + vh + c2)))
}

/// (1/N) ||x/max|x| - xhat/max|xhat|||^2: both images are normalized by
/// their own maximum absolute value first.
pub fn nmse(x: &Image, xhat: &Image) -> Result<f64> {
    check_same_shape(x, xhat)?;
    let sx = x.max_abs();
    let sh = xhat.max_abs();
    if sx == 0.0 || sh == 0.0 {
        return Err(Error::InvalidParameter("cannot normalize a zero image".into()));
    }
    let n = x.len() as f64;
    Ok(x.as_slice()
        .iter()
        .zip(xhat.as_slice())
        .map(|(&a, &b)| (a / sx - b / sh).powi(2))
        .sum::<f64>()
        / n)
}

/// |mean1 - mean2| / sqrt(var1 + var2) between two disjoint boxes; computed
/// on whatever image the caller passes (conventionally the pre-log envelope).
pub fn cnr(img: &Image, region1: &RegionBox, region2: &RegionBox) -> Result<f64> {
    region1.validate(img)?;
    region2.validate(img)?;
    if region1.overlaps(region2) {
        return Err(Error::InvalidParameter("CNR regions must be disjoint".into()));
    }
    let (m1, v1) = region1.mean_var(img);
    let (m2, v2) = region2.mean_var(img);
    let pooled = v1 + v2;
    if pooled == 0.0 {
        return Err(Error::InvalidParameter("zero pooled variance in CNR regions".into()));
    }
    Ok((m1 - m2).abs() / pooled.sqrt())
}

/// Monotone cubic (Fritsch-Carlson) interpolation through the knots,
/// evaluated at integer positions 0..len.
fn pchip_fill(xs: &[f64], ys: &[f64], len: usize) -> Vec<f64> {
    let k = xs.len();
    if k == 1 {
        return vec![ys[0]; len];
    }
    let h: Vec<f64> = (0..k - 1).map(|i| xs[i + 1] - xs[i]).collect();
    let delta: Vec<f64> = (0..k - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let mut d = vec![0.0; k];
    if k == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
    } else {
        for i in 1..k - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        let end_slope = |d0: f64, delta0: f64, delta1: f64| -> f64 {
            let mut s = d0;
            if s.signum() != delta0.signum() || delta0 == 0.0 {
                if delta0 == 0.0 {
                    return 0.0;
                }
                s = 0.0;
            } else if delta0.signum() != delta1.signum() && s.abs() > 3.0 * delta0.abs() {
                s = 3.0 * delta0;
            }
            s
        };
        let d0 = ((2.0 * h[0] + h[1]) * delta[0] - h[0] * delta[1]) / (h[0] + h[1]);
        d[0] = end_slope(d0, delta[0], delta[1]);
        let dn = ((2.0 * h[k - 2] + h[k - 3]) * delta[k - 2] - h[k - 2] * delta[k - 3])
            / (h[k - 2] + h[k - 3]);
        d[k - 1] = end_slope(dn, delta[k - 2], delta[k - 3]);
    }
    let mut out = vec![0.0; len];
    let mut seg = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64;
        if t <= xs[0] {
            *o = ys[0];
            continue;
        }
        if t >= xs[k - 1] {
            *o = ys[k - 1];
            continue;
        }
        while xs[seg + 1] < t {
            seg += 1;
        }
        let s = (t - xs[seg]) / h[seg];
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        *o = h00 * ys[seg] + h10 * h[seg] * d[seg] + h01 * ys[seg + 1] + h11 * h[seg] * d[seg + 1];
    }
    out
}

/// Per axial line (image column): detect local maxima of |signal| and pass a
/// monotone cubic through them. All-zero lines stay zero.
pub fn envelope(img: &Image) -> Result<Image> {
    let (rows, cols) = (img.rows(), img.cols());
    let mut out = Image::zeros(rows, cols);
    let mut line = vec![0.0; rows];
    for j in 0..cols {
        for i in 0..rows {
            line[i] = img.get(i, j).abs();
        }
        if line.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        // endpoints anchor the interpolation
        xs.push(0.0);
        ys.push(line[0]);
        for i in 1..rows - 1 {
            if line[i] >= line[i - 1] && line[i] >= line[i + 1] {
                xs.push(i as f64);
                ys.push(line[i]);
            }
        }
        if rows > 1 {
            xs.push((rows - 1) as f64);
            ys.push(line[rows - 1]);
        }
        let env = pchip_fill(&xs, &ys, rows);
        for i in 0..rows {
            out.set(i, j, env[i].max(0.0));
        }
    }
    Ok(out)
}

/// Envelope detection followed by log compression to [0,1]:
/// 20 log10(env / max env), clipped at -dynamic_range_db.
pub fn envelope_bmode(img: &Image, dynamic_range_db: f64) -> Result<Image> {
    if !(dynamic_range_db > 0.0) {
        return Err(Error::InvalidParameter("dynamic range must be positive".into()));
    }
    let env = envelope(img)?;
    let peak = env.max_abs();
    if peak == 0.0 {
        return Err(Error::InvalidParameter("cannot display an all-zero image".into()));
    }
    let mut out = Image::zeros(img.rows(), img.cols());
    for i in 0..img.len() {
        let v = env.as_slice()[i];
        let db = if v > 0.0 { 20.0 * (v / peak).log10() } else { -dynamic_range_db };
        let clipped = db.clamp(-dynamic_range_db, 0.0);
        out.as_mut_slice()[i] = (clipped + dynamic_range_db) / dynamic_range_db;
    }
    Ok(out)
}

/// One evaluated run: quality numbers plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub nmse: f64,
    pub cnr: Option<f64>,
    pub cs_ratio: f64,
    pub p: f64,
    pub alpha: f64,
    pub mu: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seconds: f64,
}

pub const METRICS_CSV_HEADER: &str =
    "psnr_db,ssim,nmse,cnr,cs_ratio,p,alpha,mu,beta,iterations,seconds";

impl MetricReport {
    pub fn csv_row(&self) -> String {
        let cnr = self.cnr.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{:.6},{:.6},{:.6e},{},{},{},{},{},{},{},{:.3}",
            self.psnr_db,
            self.ssim,
            self.nmse,
            cnr,
            self.cs_ratio,
            self.p,
            self.alpha,
            self.mu,
            self.beta,
            self.iterations,
            self.seconds
        )
    }
}
