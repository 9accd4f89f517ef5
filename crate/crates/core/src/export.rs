//! Number formatting and small CSV helpers shared by the table writers.

use std::io::Write;

use crate::error::Result;

/// Formats a value for CSV: exponent notation when `0 < |v| < 1e-4`,
/// shortest round-trip decimal otherwise.
pub fn fmt_num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes a header row followed by numeric rows.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt_num(*v)))?;
    }
    w.flush()?;
    Ok(())
}
