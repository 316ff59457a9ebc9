//! Plain-text complex matrices and vectors.
//!
//! Entries are written as `a+bi` / `a-bi` with 17 significant digits, comma
//! separated, one matrix row (receive antenna) per line. Vectors are one
//! entry per line. Values round-trip exactly.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ComplexChannel;
use crate::error::{Error, Result};

/// `a+bi` with both parts at 17 significant digits.
pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{}{:.16e}i", z.re, sign, z.im.abs())
}

/// Parses `a+bi`, `a-bi`, a bare real `a`, or a bare imaginary `bi`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    // The split point is the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re: f64 = body[..k].parse().ok()?;
            let im: f64 = body[k..].parse().ok()?;
            Some(Complex64::new(re, im))
        }
        None => body.parse().ok().map(|im| Complex64::new(0.0, im)),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, reason: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    }
}

pub fn channel_to_string(channel: &ComplexChannel) -> String {
    let h = channel.entries();
    let mut out = String::new();
    for r in 0..h.nrows() {
        let row: Vec<String> = (0..h.ncols()).map(|c| format_complex(h[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_channel(path: &Path, channel: &ComplexChannel) -> Result<()> {
    write(path, channel_to_string(channel))
}

pub fn read_channel(path: &Path) -> Result<ComplexChannel> {
    let text = read(path)?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_complex(f).ok_or_else(|| parse_error(path, i + 1, format!("bad entry `{}`", f.trim()))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_error(
                    path,
                    i + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "no rows"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    ComplexChannel::new(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn vector_to_string(v: &[Complex64]) -> String {
    v.iter().map(|z| format_complex(*z) + "\n").collect()
}

pub fn write_vector(path: &Path, v: &[Complex64]) -> Result<()> {
    write(path, vector_to_string(v))
}

pub fn read_vector(path: &Path) -> Result<Vec<Complex64>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_complex(l).ok_or_else(|| parse_error(path, i + 1, format!("bad entry `{}`", l.trim()))))
        .collect()
}
