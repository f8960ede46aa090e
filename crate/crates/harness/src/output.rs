//! CSV and JSON artifacts.
//!
//! Floats are written as `{:.16e}` (17 significant digits, so values round
//! trip exactly); absent values are empty fields.

use std::io::Write;
use std::path::Path;

use noisy_slp::solver::{IterateRecord, Termination};

use crate::error::{io_error, Result};

pub const RECORD_HEADER: [&str; 13] = [
    "k",
    "accepted",
    "rho_hat",
    "alpha",
    "step_norm_2",
    "step_norm_lp",
    "delta",
    "delta_lp",
    "phi_hat",
    "phi_true",
    "psi_hat_1",
    "psi_true_1",
    "termination",
];

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Critical => "Critical",
        Termination::Stalled => "Stalled",
        Termination::IterLimit => "IterLimit",
    }
}

pub fn record_fields(r: &IterateRecord) -> Vec<String> {
    vec![
        r.k.to_string(),
        r.accepted.to_string(),
        opt_float(r.rho_hat),
        opt_float(r.alpha),
        opt_float(r.step_norm_2),
        opt_float(r.step_norm_lp),
        float(r.delta),
        float(r.delta_lp),
        float(r.phi_hat),
        opt_float(r.phi_true),
        float(r.psi_hat_1),
        opt_float(r.psi_true_1),
        r.termination.map(termination_name).unwrap_or_default().to_string(),
    ]
}

/// The iteration log of one run.
pub fn write_records<W: Write>(out: W, records: &[IterateRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(RECORD_HEADER)?;
    for r in records {
        writer.write_record(record_fields(r))?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_records_file(path: &Path, records: &[IterateRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_error(path))?;
    write_records(std::io::BufWriter::new(file), records)
}

pub fn write_json_file<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_error(path))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_error(path))
}
