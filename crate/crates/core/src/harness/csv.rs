//! Result files.
//!
//! ```text
//! snr_db,detector,params_digest,num_symbols,num_errors,ser,wall_time_seconds
//! ```
//!
//! Floats carry 17 significant digits, lines end in `\n`, rows follow the
//! sweep order (SNR point, then detector).

use std::fmt::Write as _;
use std::path::Path;

use super::{SweepResult, SweepRow};
use crate::error::{Error, Result};

pub const HEADER: &str = "snr_db,detector,params_digest,num_symbols,num_errors,ser,wall_time_seconds";

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv_string(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            float(r.snr_db),
            r.detector,
            r.params_digest,
            r.num_symbols,
            r.num_errors,
            float(r.ser),
            float(r.wall_time_seconds)
        );
    }
    out
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(result)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a result file back into rows (per-group counts are not stored).
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(bad(1, "missing or unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(i + 2, format!("expected 7 columns, found {}", f.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse().map_err(|_| bad(i + 2, format!("bad number `{}`", f[k])))
        };
        let int = |k: usize| -> Result<u64> {
            f[k].parse().map_err(|_| bad(i + 2, format!("bad integer `{}`", f[k])))
        };
        rows.push(SweepRow {
            snr_db: num(0)?,
            detector: f[1].to_string(),
            params_digest: f[2].to_string(),
            num_symbols: int(3)?,
            num_errors: int(4)?,
            ser: num(5)?,
            wall_time_seconds: num(6)?,
            groups: Vec::new(),
        });
    }
    Ok(rows)
}
