//! CSV results, per-run traces and the binary dump of `A`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use gfra_core::em::EmTraceRow;
use gfra_core::linalg::CMatrix;
use gfra_core::mvsp::MvspTraceRow;

use crate::experiment::MetricsRecord;
use crate::SimError;

pub const HEADER: [&str; 14] = [
    "algorithm",
    "snr_db",
    "mode",
    "N",
    "K",
    "rho",
    "L",
    "J",
    "M",
    "U",
    "nmse_db",
    "pe",
    "trials",
    "wall_seconds",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |e| SimError::Io(path.display().to_string(), e)
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> SimError + '_ {
    move |e| SimError::Io(path.display().to_string(), e.into())
}

/// `-inf` for an exact estimate, `nan` when undefined.
fn fmt_db(v: Option<f64>) -> String {
    match v {
        Some(x) if x == f64::NEG_INFINITY => "-inf".into(),
        Some(x) => format!("{x:.6}"),
        None => "nan".into(),
    }
}

pub fn write_metrics<W: Write>(out: W, records: &[MetricsRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.algorithm.name().to_string(),
            format!("{}", r.snr_db),
            r.mode.name().to_string(),
            r.n.to_string(),
            r.k.to_string(),
            format!("{}", r.rho),
            r.l.to_string(),
            r.j.to_string(),
            r.m.to_string(),
            r.u.to_string(),
            fmt_db(r.nmse_db),
            format!("{:.6}", r.pe),
            r.trials.to_string(),
            format!("{:.3}", r.wall_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_file(path: &Path, records: &[MetricsRecord]) -> Result<(), SimError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_metrics(BufWriter::new(file), records).map_err(csv_err(path))
}

pub fn write_mvsp_trace(path: &Path, rows: &[MvspTraceRow]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let run = |w: &mut csv::Writer<File>| -> Result<(), csv::Error> {
        w.write_record(["iteration", "residual", "active_devices", "min_variance", "max_variance"])?;
        for r in rows {
            w.write_record([
                r.iteration.to_string(),
                format!("{:e}", r.residual),
                r.active_devices.to_string(),
                format!("{:e}", r.min_variance),
                format!("{:e}", r.max_variance),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    run(&mut w).map_err(csv_err(path))
}

/// Row `i` describes M-step `i` and the MVSP run after it; `nmse_db` is the
/// estimate's NMSE at that point. Row `0` with empty step columns is plain
/// MVSP on the initial grid.
pub fn write_em_trace(path: &Path, rows: &[EmTraceRow], nmse_db: &[Option<f64>]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let run = |w: &mut csv::Writer<File>| -> Result<(), csv::Error> {
        w.write_record(["i", "g_start", "g_end", "delta_omega_sqr", "accepted_steps", "failed_searches", "nmse_db"])?;
        if let Some(first) = nmse_db.first() {
            w.write_record(["0", "", "", "", "", "", &fmt_db(*first)])?;
        }
        for (r, nmse) in rows.iter().zip(nmse_db.iter().skip(1)) {
            w.write_record([
                (r.iteration + 1).to_string(),
                format!("{:e}", r.step.g_start),
                format!("{:e}", r.step.g_end),
                format!("{:e}", r.delta_omega_sqr),
                r.step.accepted_steps.to_string(),
                r.step.failed_searches.to_string(),
                fmt_db(*nmse),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    run(&mut w).map_err(csv_err(path))
}

/// Row-major `(re, im)` pairs as little-endian `f32`.
pub fn write_matrix_dump(path: &Path, a: &CMatrix) -> Result<(), SimError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for v in a.as_slice() {
        w.write_all(&(v.re as f32).to_le_bytes()).map_err(io_err(path))?;
        w.write_all(&(v.im as f32).to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_matrix_dump(path: &Path, rows: usize, cols: usize) -> Result<Vec<(f32, f32)>, SimError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if bytes.len() != rows * cols * 8 {
        return Err(SimError::Config(format!(
            "{}: expected {} bytes for a {rows} x {cols} matrix, found {}",
            path.display(),
            rows * cols * 8,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            (re, im)
        })
        .collect())
}
