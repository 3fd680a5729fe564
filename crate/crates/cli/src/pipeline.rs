//! Subcommand bodies: each one reads/writes files under the configured
//! output directory so runs can be chained or replayed piecemeal.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use compdec::conv::build_convolution;
use compdec::image::Image;
use compdec::io::{
    read_cdm1, read_cdm1_vector, write_cdm1, write_cdm1_vector, write_pgm, write_trace_csv,
};
use compdec::measure::{build_gaussian, build_srm, MatrixKind, MeasurementOperator, SrmBase};
use compdec::metrics::{
    cnr, envelope, envelope_bmode, nmse, psnr, ssim, MetricReport, RegionBox, METRICS_CSV_HEADER,
};
use compdec::phantom::{
    add_noise_snr, generate_mask, sample_ggd, simulate_rf, subseed, synthesize_psf,
    synthesize_trf, SeedStream,
};
use compdec::prox::{prox_lp_scalar, ProxParams};
use compdec::solver::{solve, Problem, SolveResult, SolverConfig};
use compdec::wavelet::SparsifyingTransform;
use compdec::{Error, Result};

use crate::config::RunConfig;

pub fn cmd_phantom(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let mask = generate_mask(&cfg.phantom_spec())?;
    let amplitudes = sample_ggd(
        mask.len(),
        cfg.amplitude_shape,
        1.0,
        subseed(cfg.seed, SeedStream::Amplitudes),
    )?;
    let trf = synthesize_trf(&mask, &amplitudes)?;
    let psf = synthesize_psf(&cfg.psf_spec())?;
    let rf = simulate_rf(&trf, &psf)?;
    write_cdm1(&cfg.out.join("mask.cdm"), &mask)?;
    write_cdm1(&cfg.out.join("trf.cdm"), &trf)?;
    write_cdm1(&cfg.out.join("psf.cdm"), &psf)?;
    write_cdm1(&cfg.out.join("rf.cdm"), &rf)?;
    Ok(())
}

fn build_operator(cfg: &RunConfig, n: usize, m: usize) -> Result<MeasurementOperator> {
    let seed = subseed(cfg.seed, SeedStream::Matrix);
    match cfg.matrix {
        MatrixKind::Srm => build_srm(seed, n, m, cfg.srm_base),
        MatrixKind::Gaussian => build_gaussian(seed, n, m),
    }
}

/// Everything needed to rebuild Phi exactly, written next to y.cdm so
/// reconstruction never guesses at the acquisition.
fn write_operator_record(path: &Path, op: &MeasurementOperator, rows: usize, cols: usize) -> Result<()> {
    let mut text = format!(
        "kind = {}\nseed = {}\nn = {}\nm = {}\nrows = {}\ncols = {}\n",
        op.kind(),
        op.seed(),
        op.n(),
        op.m(),
        rows,
        cols
    );
    if let Some(base) = op.srm_base() {
        text.push_str(&format!("base = {base}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

pub struct OperatorRecord {
    pub op: MeasurementOperator,
    pub rows: usize,
    pub cols: usize,
}

pub fn read_operator_record(path: &Path) -> Result<OperatorRecord> {
    let text = fs::read_to_string(path)?;
    let mut kind = None;
    let mut seed = None;
    let mut n = None;
    let mut m = None;
    let mut rows = None;
    let mut cols = None;
    let mut base = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("operator record: bad line '{line}'")))?;
        let value = value.trim();
        let parse_usize = || -> Result<usize> {
            value.parse().map_err(|_| Error::Format(format!("operator record: bad value '{value}'")))
        };
        match key.trim() {
            "kind" => kind = Some(value.parse::<MatrixKind>()?),
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::Format(format!("operator record: bad seed '{value}'"))
                })?)
            }
            "n" => n = Some(parse_usize()?),
            "m" => m = Some(parse_usize()?),
            "rows" => rows = Some(parse_usize()?),
            "cols" => cols = Some(parse_usize()?),
            "base" => base = Some(value.parse::<SrmBase>()?),
            other => return Err(Error::Format(format!("operator record: unknown key '{other}'"))),
        }
    }
    let missing = |what: &str| Error::Format(format!("operator record: missing '{what}'"));
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let seed = seed.ok_or_else(|| missing("seed"))?;
    let n = n.ok_or_else(|| missing("n"))?;
    let m = m.ok_or_else(|| missing("m"))?;
    let rows = rows.ok_or_else(|| missing("rows"))?;
    let cols = cols.ok_or_else(|| missing("cols"))?;
    let op = match kind {
        MatrixKind::Srm => build_srm(seed, n, m, base.ok_or_else(|| missing("base"))?)?,
        MatrixKind::Gaussian => build_gaussian(seed, n, m)?,
    };
    Ok(OperatorRecord { op, rows, cols })
}

pub fn cmd_compress(cfg: &RunConfig) -> Result<()> {
    let rf = read_cdm1(&cfg.out.join("rf.cdm"))?;
    let n = rf.len();
    let m = ((cfg.cs_ratio * n as f64).round() as usize).clamp(1, n);
    let op = build_operator(cfg, n, m)?;
    let clean = op.apply(rf.as_slice())?;
    let y = add_noise_snr(&clean, cfg.snr_db, subseed(cfg.seed, SeedStream::Noise))?;
    write_cdm1_vector(&cfg.out.join("y.cdm"), &y)?;
    write_operator_record(&cfg.out.join("operator.txt"), &op, rf.rows(), rf.cols())?;
    Ok(())
}

fn build_problem(cfg: &RunConfig, record: OperatorRecord, y: Vec<f64>, psf: &Image) -> Result<Problem> {
    let conv = build_convolution(psf, record.rows, record.cols)?;
    let transform = if cfg.levels == 0 {
        SparsifyingTransform::identity(record.rows, record.cols)
    } else {
        SparsifyingTransform::new(cfg.wavelet, cfg.levels, record.rows, record.cols)?
    };
    Problem::new(conv, transform, record.op, y, cfg.alpha, cfg.mu, cfg.p)
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        beta: cfg.beta,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        v3_strategy: cfg.v3,
        newton_inner_tol: cfg.newton_inner_tol,
        newton_max_inner: cfg.newton_max_inner,
    }
}

fn run_solver(cfg: &RunConfig) -> Result<SolveResult> {
    let y = read_cdm1_vector(&cfg.out.join("y.cdm"))?;
    let record = read_operator_record(&cfg.out.join("operator.txt"))?;
    let psf = read_cdm1(&cfg.out.join("psf.cdm"))?;
    let problem = build_problem(cfg, record, y, &psf)?;
    solve(&problem, &solver_config(cfg), None, None)
}

/// `write_trace` is off for sweep cells: the timing column would make
/// otherwise byte-identical outputs differ between runs.
pub fn cmd_reconstruct(cfg: &RunConfig, write_trace: bool) -> Result<SolveResult> {
    let result = run_solver(cfg)?;
    write_cdm1(&cfg.out.join("xhat.cdm"), &result.image)?;
    if write_trace {
        write_trace_csv(&cfg.out.join("trace.csv"), &result.trace)?;
    }
    write_pgm(
        &cfg.out.join("bmode.pgm"),
        &envelope_bmode(&result.image, cfg.dynamic_range_db)?,
    )?;
    Ok(result)
}

pub fn evaluate_images(
    cfg: &RunConfig,
    trf: &Image,
    xhat: &Image,
    iterations: usize,
    seconds: f64,
) -> Result<MetricReport> {
    let cnr_value = match cfg.cnr_regions {
        Some([t1, l1, h1, w1, t2, l2, h2, w2]) => {
            let env = envelope(xhat)?;
            let r1 = RegionBox { top: t1, left: l1, height: h1, width: w1 };
            let r2 = RegionBox { top: t2, left: l2, height: h2, width: w2 };
            Some(cnr(&env, &r1, &r2)?)
        }
        None => None,
    };
    Ok(MetricReport {
        psnr_db: psnr(trf, xhat)?,
        ssim: ssim(trf, xhat)?,
        nmse: nmse(trf, xhat)?,
        cnr: cnr_value,
        cs_ratio: cfg.cs_ratio,
        p: cfg.p,
        alpha: cfg.alpha,
        mu: cfg.mu,
        beta: cfg.beta,
        iterations,
        seconds,
    })
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<MetricReport> {
    let trf = read_cdm1(&cfg.out.join("trf.cdm"))?;
    let xhat = read_cdm1(&cfg.out.join("xhat.cdm"))?;
    // pick up run stats when a reconstruction trace sits alongside
    let (iterations, seconds) = match fs::read_to_string(cfg.out.join("trace.csv")) {
        Ok(text) => {
            let last = text.lines().last().unwrap_or("");
            let fields: Vec<&str> = last.split(',').collect();
            let iters = fields.first().and_then(|s| s.parse().ok()).unwrap_or(0);
            let secs = fields.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.0);
            (iters, secs)
        }
        Err(_) => (0, 0.0),
    };
    let report = evaluate_images(cfg, &trf, &xhat, iterations, seconds)?;
    let path = cfg.out.join("metrics.csv");
    let mut file = fs::OpenOptions::new().create(true).append(true).open(&path)?;
    if file.metadata()?.len() == 0 {
        writeln!(file, "{METRICS_CSV_HEADER}")?;
    }
    writeln!(file, "{}", report.csv_row())?;
    Ok(report)
}

pub const SWEEP_CSV_HEADER: &str = "cs_ratio,p,psnr_db,ssim,nmse,cnr,iterations,status";

fn sweep_cell_dir(out: &Path, ratio: f64, p: f64) -> PathBuf {
    out.join(format!("cell_r{ratio}_p{p}"))
}

fn run_sweep_cell(cfg: &RunConfig, trf: &Image) -> Result<(MetricReport, SolveResult)> {
    fs::create_dir_all(&cfg.out)?;
    cmd_compress(cfg)?;
    let result = cmd_reconstruct(cfg, false)?;
    let report = evaluate_images(cfg, trf, &result.image, result.iterations, 0.0)?;
    Ok((report, result))
}

/// Full grid over (cs_ratio, p) sharing one phantom; each cell is an
/// independent compress/reconstruct/evaluate run in its own directory, and
/// a failed cell becomes an error row instead of aborting the sweep.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<PathBuf> {
    cmd_phantom(cfg)?;
    let trf = read_cdm1(&cfg.out.join("trf.cdm"))?;
    let mut rows = Vec::new();
    for &ratio in &cfg.sweep_ratios {
        for &p in &cfg.sweep_ps {
            let mut cell = cfg.clone();
            cell.cs_ratio = ratio;
            cell.p = p;
            cell.out = sweep_cell_dir(&cfg.out, ratio, p);
            // share the phantom files rather than regenerating them per cell
            fs::create_dir_all(&cell.out)?;
            for name in ["rf.cdm", "psf.cdm"] {
                fs::copy(cfg.out.join(name), cell.out.join(name))?;
            }
            let row = match run_sweep_cell(&cell, &trf) {
                Ok((report, result)) => format!(
                    "{},{},{:.6},{:.6},{:.6e},{},{},ok",
                    ratio,
                    p,
                    report.psnr_db,
                    report.ssim,
                    report.nmse,
                    report.cnr.map(|v| format!("{v:.6}")).unwrap_or_default(),
                    result.iterations
                ),
                Err(err) => {
                    let msg: String = err
                        .to_string()
                        .chars()
                        .map(|c| if c == ',' || c == '\n' { ';' } else { c })
                        .collect();
                    format!("{ratio},{p},,,,,,error: {msg}")
                }
            };
            rows.push(row);
        }
    }
    let path = cfg.out.join("sweep.csv");
    let mut text = String::from(SWEEP_CSV_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(&path, text)?;
    Ok(path)
}

/// Samples the scalar shrinkage rule on a symmetric grid, one row per
/// (input, exponent) pair.
pub fn cmd_prox_curve(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("prox_curve.csv");
    let mut text = String::from("x,p,prox\n");
    let half_width = 5.0;
    let steps = 1000;
    for &p in &cfg.prox_ps {
        let params = ProxParams::new(cfg.prox_k, p)?;
        for i in 0..=steps {
            let x = -half_width + 2.0 * half_width * i as f64 / steps as f64;
            text.push_str(&format!("{x:.6},{p},{:.12e}\n", prox_lp_scalar(x, params)));
        }
    }
    fs::write(&path, text)?;
    Ok(path)
}
