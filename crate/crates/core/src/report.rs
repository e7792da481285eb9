//! Error-table persistence: five-significant-digit scientific notation
//! (`1.0819e-01`) and the CSV layout used by the convergence sweeps.

use std::path::Path;

use crate::error::{Error, Result};
use crate::study::ErrorRecord;

/// Five significant digits, two-digit signed exponent.
pub fn sci5(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{:.4e}", v);
    let (mantissa, exp) = s.split_once('e').expect("std scientific format");
    let e: i32 = exp.parse().expect("std scientific exponent");
    format!(
        "{mantissa}e{}{:02}",
        if e < 0 { '-' } else { '+' },
        e.abs()
    )
}

pub const CSV_HEADER: &str = "method,alpha,c0,param,e_inf,e2_gamma,e2_omega,ref";

fn csv_field(s: &str) -> String {
    // naive CSV: commas inside values would corrupt the table
    s.replace(',', ";")
}

pub fn csv_line(r: &ErrorRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        csv_field(&r.method),
        r.alpha,
        r.c0,
        r.param,
        sci5(r.errors.e_inf),
        sci5(r.errors.e2_gamma),
        sci5(r.errors.e2_omega),
        csv_field(&r.reference)
    )
}

pub fn csv_string(records: &[ErrorRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidParameter(
            "no records to write".into(),
        ));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(records: &[ErrorRecord], path: &Path) -> Result<()> {
    let text = csv_string(records)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
