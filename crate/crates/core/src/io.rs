//! File formats: CDM1 for images and vectors, binary PGM for B-mode
//! display, CSV for solver traces.
//!
//! CDM1 is an ASCII header line `CDM1 <rows> <cols>\n` followed by
//! row-major little-endian 64-bit IEEE floats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::solver::TraceEntry;

pub fn write_cdm1(path: &Path, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "CDM1 {} {}\n", img.rows(), img.cols())?;
    for &v in img.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a plain vector as an n x 1 CDM1 file.
pub fn write_cdm1_vector(path: &Path, v: &[f64]) -> Result<()> {
    let img = Image::new(v.len(), 1, v.to_vec())?;
    write_cdm1(path, &img)
}

pub fn read_cdm1(path: &Path) -> Result<Image> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)
            .map_err(|_| Error::Format("truncated CDM1 header".into()))?;
        if byte[0] == b'\n' {
            break;
        }
        if header.len() > 64 {
            return Err(Error::Format("CDM1 header too long".into()));
        }
        header.push(byte[0]);
    }
    let header = String::from_utf8(header).map_err(|_| Error::Format("non-ASCII CDM1 header".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("CDM1") {
        return Err(Error::Format(format!("expected CDM1 magic, got '{header}'")));
    }
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("bad CDM1 rows field".into()))?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("bad CDM1 cols field".into()))?;
    if parts.next().is_some() {
        return Err(Error::Format("trailing fields in CDM1 header".into()));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 8];
    for _ in 0..rows * cols {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated CDM1 payload".into()))?;
        data.push(f64::from_le_bytes(buf));
    }
    Image::new(rows, cols, data)
}

/// Reads an n x 1 CDM1 file as a vector.
pub fn read_cdm1_vector(path: &Path) -> Result<Vec<f64>> {
    let img = read_cdm1(path)?;
    if img.cols() != 1 {
        return Err(Error::Format(format!("expected a column vector, got {}x{}", img.rows(), img.cols())));
    }
    Ok(img.into_vec())
}

/// 8-bit binary PGM (P5) with maxval 255; input values are clamped to [0,1].
pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", img.cols(), img.rows())?;
    let bytes: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub const TRACE_CSV_HEADER: &str = "iter,objective,rel_change,nmse,seconds";

pub fn write_trace_csv(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for e in trace {
        let nmse = e.nmse.map(|v| format!("{v:.12e}")).unwrap_or_default();
        writeln!(w, "{},{:.12e},{:.12e},{},{:.6}", e.iter, e.objective, e.rel_change, nmse, e.seconds)?;
    }
    w.flush()?;
    Ok(())
}
