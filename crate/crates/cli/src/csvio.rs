//! Trace and table CSV: `name[unit]` headers, time first, 9 significant
//! digits, '.' decimal separator, LF line endings.

use std::fmt::Write as _;

use vfd_core::plant::{Channel, Trace};

use crate::error::{CliError, Result};

/// Shortest rendering of `v` rounded to 9 significant digits, in plain
/// notation for exponents in [-5, 9) and scientific otherwise.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("`e` formatting has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.into()
        }
    } else {
        s
    }
}

pub fn write_trace(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.len() * (trace.channels.len() + 1) * 12);
    out.push_str("t[s]");
    for c in &trace.channels {
        write!(out, ",{}[{}]", c.name, c.unit).unwrap();
    }
    out.push('\n');
    for k in 0..trace.len() {
        out.push_str(&fmt_sig9(k as f64 * trace.sample_period));
        for c in &trace.channels {
            out.push(',');
            out.push_str(&fmt_sig9(c.data[k]));
        }
        out.push('\n');
    }
    out
}

/// Reads a trace CSV. The first column must be time; the sample period is
/// taken from the first two rows and checked against the rest.
pub fn read_trace(text: &str) -> Result<Trace> {
    let bad = |msg: String| CliError::Config(format!("trace csv: {msg}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty".into()))?;
    let cols: Vec<(String, String)> = header
        .split(',')
        .map(|h| match h.split_once('[') {
            Some((name, unit)) => (
                name.trim().to_string(),
                unit.trim_end_matches(']').to_string(),
            ),
            None => (h.trim().to_string(), String::new()),
        })
        .collect();
    if cols.len() < 2 {
        return Err(bad("need a time column and at least one channel".into()));
    }
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(bad(format!("row {} has {} fields", n + 2, fields.len())));
        }
        for (col, f) in data.iter_mut().zip(fields) {
            col.push(
                f.trim()
                    .parse()
                    .map_err(|e| bad(format!("row {}: `{f}`: {e}", n + 2)))?,
            );
        }
    }
    let time = &data[0];
    if time.len() < 2 {
        return Err(bad("need at least two samples".into()));
    }
    let period = time[1] - time[0];
    let last = *time.last().unwrap();
    let expected = period * (time.len() - 1) as f64;
    if period.is_nan()
        || period <= 0.0
        || (last - expected).abs() > 1e-6 * expected.max(period) + 1e-8 * last
    {
        return Err(bad("time column is not uniformly sampled".into()));
    }
    // Refine the period from the full span; row 1 is only 9 digits.
    let period = last / (time.len() - 1) as f64;
    let channels = cols
        .into_iter()
        .zip(data)
        .skip(1)
        .map(|((name, unit), data)| Channel { name, unit, data })
        .collect();
    Ok(Trace::new(period, channels)?)
}

/// Comma-separated table with a header row.
pub fn write_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Right-aligned fixed-width rendering of the same table.
pub fn align_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain(std::iter::once(header[c].len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(
        widths
            .iter()
            .map(|w| &"----------------------------------------"[..*w])
            .collect(),
    ));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}
