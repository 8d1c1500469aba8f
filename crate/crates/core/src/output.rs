//! Plain-text artifacts for a finished run: per-sample CSV, JSON summary and
//! an optional eigenvalue dump.

use std::io::Write;

use crate::error::Result;
use crate::harness::{RunRecord, MAX_RECORDED_MOMENT};

/// Header and rows `sample_id,value,moment_2,…,moment_8`; the moment columns
/// are empty when the run did not record them.
pub fn write_samples_csv<W: Write>(rec: &RunRecord, mut out: W) -> Result<()> {
    write!(out, "sample_id,value")?;
    for k in 2..=MAX_RECORDED_MOMENT {
        write!(out, ",moment_{k}")?;
    }
    writeln!(out)?;
    for row in &rec.rows {
        write!(out, "{},{:.16e}", row.sample_id, row.value)?;
        match &row.moments {
            Some(m) => m.iter().try_for_each(|v| write!(out, ",{v:.16e}"))?,
            None => (2..=MAX_RECORDED_MOMENT).try_for_each(|_| write!(out, ","))?,
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_summary_json<W: Write>(rec: &RunRecord, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &serde_json::json!({
        "config": rec.config,
        "summary": rec.summary,
    }))?;
    Ok(())
}

/// `sample_id,rank,lambda` with ranks counted from 0 in ascending order.
/// Writes only the header when the run kept no spectra.
pub fn write_eigenvalues_csv<W: Write>(rec: &RunRecord, mut out: W) -> Result<()> {
    writeln!(out, "sample_id,rank,lambda")?;
    let Some(spectra) = &rec.eigenvalues else {
        return Ok(());
    };
    for (row, spectrum) in rec.rows.iter().zip(spectra) {
        for (rank, lambda) in spectrum.iter().enumerate() {
            writeln!(out, "{},{rank},{lambda:.16e}", row.sample_id)?;
        }
    }
    Ok(())
}
