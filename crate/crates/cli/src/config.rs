//! Plain `key = value` run configuration with strict key checking.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use compdec::measure::{MatrixKind, SrmBase};
use compdec::phantom::{PhantomSpec, PsfSpec, Region, RegionShape};
use compdec::solver::V3Strategy;
use compdec::wavelet::WaveletFamily;
use compdec::{Error, Result};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub rows: usize,
    pub cols: usize,
    pub regions: Vec<Region>,
    pub amplitude_shape: f64,
    pub psf_f0: f64,
    pub psf_fs: f64,
    pub psf_bandwidth: f64,
    pub psf_lateral_sigma: f64,
    pub psf_rows: usize,
    pub psf_cols: usize,
    pub matrix: MatrixKind,
    pub srm_base: SrmBase,
    pub cs_ratio: f64,
    pub snr_db: f64,
    pub wavelet: WaveletFamily,
    pub levels: usize,
    pub alpha: f64,
    pub mu: f64,
    pub beta: f64,
    pub p: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub v3: V3Strategy,
    pub newton_inner_tol: f64,
    pub newton_max_inner: usize,
    pub dynamic_range_db: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub sweep_ratios: Vec<f64>,
    pub sweep_ps: Vec<f64>,
    pub cnr_regions: Option<[usize; 8]>,
    pub prox_k: f64,
    pub prox_ps: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rows: 128,
            cols: 128,
            regions: PhantomSpec::default_regions(),
            amplitude_shape: 1.0,
            psf_f0: 3.5e6,
            psf_fs: 20e6,
            psf_bandwidth: 0.6,
            psf_lateral_sigma: 1.5,
            psf_rows: 25,
            psf_cols: 11,
            matrix: MatrixKind::Srm,
            srm_base: SrmBase::WalshHadamard,
            cs_ratio: 0.6,
            snr_db: 40.0,
            wavelet: WaveletFamily::Daubechies4,
            levels: 3,
            alpha: 0.08,
            mu: 0.1,
            beta: 1.0,
            p: 1.0,
            tol: 5e-4,
            max_iters: 1000,
            v3: V3Strategy::Auto,
            newton_inner_tol: 1e-8,
            newton_max_inner: 50,
            dynamic_range_db: 40.0,
            seed: 0,
            out: PathBuf::from("."),
            sweep_ratios: vec![0.2, 0.4, 0.6, 0.8],
            sweep_ps: vec![1.0],
            cnr_regions: None,
            prox_k: 1.0,
            prox_ps: vec![1.0, 1.1, 1.5, 1.9, 2.0],
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::InvalidParameter(format!("config key '{key}': cannot parse '{value}'"))
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

/// Accepts "inf" for unbounded values such as a noiseless SNR.
fn parse_f64(key: &str, value: &str) -> Result<f64> {
    match value {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => parse_num(key, value),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let items: Result<Vec<f64>> = value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::InvalidParameter(format!("config key '{key}': empty list")));
    }
    Ok(items)
}

/// Region list syntax: entries separated by `|`, each entry is a shape name
/// followed by its fractional parameters and a final weight, e.g.
/// `full 0.35 | disc 0.30 0.32 0.15 1.0 | rect 0.55 0.12 0.28 0.22 0.7`.
fn parse_regions(value: &str) -> Result<Vec<Region>> {
    let mut regions = Vec::new();
    for entry in value.split('|') {
        let tokens: Vec<&str> = entry.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let nums: Result<Vec<f64>> =
            tokens[1..].iter().map(|s| parse_f64("regions", s)).collect();
        let nums = nums?;
        let (shape, weight) = match (tokens[0], nums.as_slice()) {
            ("full", [w]) => (RegionShape::Full, *w),
            ("disc", [r, c, rad, w]) => {
                (RegionShape::Disc { row: *r, col: *c, radius: *rad }, *w)
            }
            ("rect", [t, l, h, wd, w]) => (
                RegionShape::Rect { top: *t, left: *l, height: *h, width: *wd },
                *w,
            ),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "config key 'regions': bad entry '{}'",
                    entry.trim()
                )))
            }
        };
        regions.push(Region { shape, weight });
    }
    if regions.is_empty() {
        return Err(Error::InvalidParameter("config key 'regions': no regions given".into()));
    }
    Ok(regions)
}

fn parse_cnr(value: &str) -> Result<[usize; 8]> {
    let nums: Result<Vec<usize>> = value
        .split_whitespace()
        .map(|s| parse_num("cnr_regions", s))
        .collect();
    let nums = nums?;
    nums.try_into().map_err(|_| {
        Error::InvalidParameter(
            "config key 'cnr_regions': expected 8 integers (top left height width, twice)".into(),
        )
    })
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("config line {}: expected 'key = value'", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), lineno + 1) {
                return Err(Error::InvalidParameter(format!(
                    "config key '{key}' given twice (lines {prev} and {})",
                    lineno + 1
                )));
            }
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "rows" => self.rows = parse_num(key, value)?,
            "cols" => self.cols = parse_num(key, value)?,
            "regions" => self.regions = parse_regions(value)?,
            "amplitude_shape" => self.amplitude_shape = parse_f64(key, value)?,
            "psf_f0" => self.psf_f0 = parse_f64(key, value)?,
            "psf_fs" => self.psf_fs = parse_f64(key, value)?,
            "psf_bandwidth" => self.psf_bandwidth = parse_f64(key, value)?,
            "psf_lateral_sigma" => self.psf_lateral_sigma = parse_f64(key, value)?,
            "psf_rows" => self.psf_rows = parse_num(key, value)?,
            "psf_cols" => self.psf_cols = parse_num(key, value)?,
            "matrix" => self.matrix = value.parse().map_err(|_| bad(key, value))?,
            "srm_base" => self.srm_base = value.parse().map_err(|_| bad(key, value))?,
            "cs_ratio" => self.cs_ratio = parse_f64(key, value)?,
            "snr_db" => self.snr_db = parse_f64(key, value)?,
            "wavelet" => self.wavelet = value.parse().map_err(|_| bad(key, value))?,
            "levels" => self.levels = parse_num(key, value)?,
            "alpha" => self.alpha = parse_f64(key, value)?,
            "mu" => self.mu = parse_f64(key, value)?,
            "beta" => self.beta = parse_f64(key, value)?,
            "p" => self.p = parse_f64(key, value)?,
            "tol" => self.tol = parse_f64(key, value)?,
            "max_iters" => self.max_iters = parse_num(key, value)?,
            "v3" => {
                self.v3 = match value {
                    "auto" => V3Strategy::Auto,
                    "orthogonal" => V3Strategy::Orthogonal,
                    "newton" => V3Strategy::Newton,
                    _ => return Err(bad(key, value)),
                }
            }
            "newton_inner_tol" => self.newton_inner_tol = parse_f64(key, value)?,
            "newton_max_inner" => self.newton_max_inner = parse_num(key, value)?,
            "dynamic_range_db" => self.dynamic_range_db = parse_f64(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "sweep_ratios" => self.sweep_ratios = parse_list(key, value)?,
            "sweep_ps" => self.sweep_ps = parse_list(key, value)?,
            "cnr_regions" => self.cnr_regions = Some(parse_cnr(value)?),
            "prox_k" => self.prox_k = parse_f64(key, value)?,
            "prox_ps" => self.prox_ps = parse_list(key, value)?,
            _ => return Err(Error::InvalidParameter(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom_spec().validate()?;
        if !(self.cs_ratio > 0.0 && self.cs_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cs_ratio must be in (0,1], got {}",
                self.cs_ratio
            )));
        }
        for &r in &self.sweep_ratios {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidParameter(format!("sweep ratio {r} not in (0,1]")));
            }
        }
        for &p in self.sweep_ps.iter().chain(&[self.p]) {
            if !(1.0..=2.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("p must be in [1,2], got {p}")));
            }
        }
        if !(self.alpha >= 0.0) || !(self.mu > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(
                "need alpha >= 0, mu > 0 and beta > 0".into(),
            ));
        }
        if !(self.tol >= 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidParameter("need tol >= 0 and max_iters >= 1".into()));
        }
        if !(self.dynamic_range_db > 0.0) {
            return Err(Error::InvalidParameter("dynamic_range_db must be positive".into()));
        }
        if !(self.prox_k >= 0.0) {
            return Err(Error::InvalidParameter("prox_k must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        PhantomSpec {
            rows: self.rows,
            cols: self.cols,
            regions: self.regions.clone(),
            amplitude_shape: self.amplitude_shape,
            seed: self.seed,
        }
    }

    pub fn psf_spec(&self) -> PsfSpec {
        PsfSpec {
            center_frequency: self.psf_f0,
            sampling_frequency_axial: self.psf_fs,
            fractional_bandwidth: self.psf_bandwidth,
            lateral_sigma: self.psf_lateral_sigma,
            kernel_rows: self.psf_rows,
            kernel_cols: self.psf_cols,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_key() {
        let err = RunConfig::from_text("rows = 64\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn rejects_duplicate_key() {
        assert!(RunConfig::from_text("rows = 64\nrows = 32\n").is_err());
    }

    #[test]
    fn parses_defaults_and_overrides() {
        let cfg = RunConfig::from_text("rows = 64\ncols = 32\nsnr_db = inf\np = 1.5\n").unwrap();
        assert_eq!(cfg.rows, 64);
        assert_eq!(cfg.cols, 32);
        assert!(cfg.snr_db.is_infinite());
        assert_eq!(cfg.p, 1.5);
        assert_eq!(cfg.matrix, MatrixKind::Srm);
    }

    #[test]
    fn parses_region_list() {
        let cfg =
            RunConfig::from_text("regions = full 0.2 | disc 0.5 0.5 0.1 1.0\n").unwrap();
        assert_eq!(cfg.regions.len(), 2);
        assert_eq!(cfg.regions[0].weight, 0.2);
        assert!(matches!(cfg.regions[1].shape, RegionShape::Disc { .. }));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = RunConfig::from_text("# header\n\nrows = 16 # trailing\n").unwrap();
        assert_eq!(cfg.rows, 16);
    }
}
