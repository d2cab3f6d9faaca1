//! CSV layouts shared by the library and the command-line tool.
//!
//! | file            | header                                                        |
//! |-----------------|---------------------------------------------------------------|
//! | features        | `frame_index,e_y,l_y,e_u,l_u,e_v,l_v`                          |
//! | training data   | `frame_index,e_y,l_y,e_u,l_u,e_v,l_v,q,bits`                   |
//! | rate trace      | `frame_index,q_p,b_hat,b_prime,q_bar,q_prime,actual_bits,deficit` |
//! | RD curve        | `bitrate,psnr_yuv`                                             |
//! | encoder log     | `frame_index,q,bits`                                           |
//!
//! Real values are written with nine significant digits.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::analyzer::FrameFeatures;
use crate::error::{Error, Result};
use crate::forest::TrainingSample;
use crate::metrics::RdPoint;
use crate::rate_control::{FrameDecision, LogEntry};

pub const FEATURES_HEADER: [&str; 7] = ["frame_index", "e_y", "l_y", "e_u", "l_u", "e_v", "l_v"];
pub const TRAINING_HEADER: [&str; 9] = ["frame_index", "e_y", "l_y", "e_u", "l_u", "e_v", "l_v", "q", "bits"];
pub const TRACE_HEADER: [&str; 8] =
    ["frame_index", "q_p", "b_hat", "b_prime", "q_bar", "q_prime", "actual_bits", "deficit"];
pub const RD_HEADER: [&str; 2] = ["bitrate", "psnr_yuv"];
pub const ENCODER_LOG_HEADER: [&str; 3] = ["frame_index", "q", "bits"];

/// Formats `x` with `digits` significant digits, avoiding exponents for
/// ordinary magnitudes.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - exponent;
    if (-6..=15).contains(&exponent) {
        let s = format!("{:.*}", decimals.max(0) as usize, x);
        // Rounding can carry into a new digit (9.9999999996 -> 10.00000000).
        let sig = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
        if sig > digits && decimals > 0 {
            return format!("{:.*}", (decimals - 1) as usize, x);
        }
        s
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

fn sig9(x: f64) -> String {
    format_sig(x, 9)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn read_rows<R: Read, T: DeserializeOwned>(r: R, required: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = reader.headers()?.clone();
    for col in required {
        if !headers.iter().any(|h| h == *col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize().enumerate() {
        rows.push(rec.map_err(|e: csv::Error| Error::InvalidInput(format!("row {}: {e}", i + 1)))?);
    }
    Ok(rows)
}

pub fn write_features<W: Write>(w: W, features: &[FrameFeatures]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(FEATURES_HEADER)?;
    for f in features {
        let mut row = vec![f.frame_index.to_string()];
        row.extend(f.values().iter().map(|&v| sig9(v)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(r: R) -> Result<Vec<FrameFeatures>> {
    let rows: Vec<FrameFeatures> = read_rows(r, &FEATURES_HEADER)?;
    for f in &rows {
        f.validate()?;
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct TrainingRow {
    frame_index: usize,
    e_y: f64,
    l_y: f64,
    e_u: f64,
    l_u: f64,
    e_v: f64,
    l_v: f64,
    q: i32,
    bits: f64,
}

pub fn write_training<W: Write>(w: W, samples: &[TrainingSample]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRAINING_HEADER)?;
    for s in samples {
        let mut row = vec![s.features.frame_index.to_string()];
        row.extend(s.features.values().iter().map(|&v| sig9(v)));
        row.push(s.q.to_string());
        row.push(sig9(s.bits));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_training<R: Read>(r: R) -> Result<Vec<TrainingSample>> {
    let rows: Vec<TrainingRow> = read_rows(r, &TRAINING_HEADER)?;
    rows.into_iter()
        .map(|row| {
            let s = TrainingSample {
                features: FrameFeatures::new(row.frame_index, [row.e_y, row.l_y, row.e_u, row.l_u, row.e_v, row.l_v]),
                q: row.q,
                bits: row.bits,
            };
            s.validate()?;
            Ok(s)
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_default()
}

pub fn write_trace<W: Write>(w: W, decisions: &[FrameDecision]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRACE_HEADER)?;
    for d in decisions {
        out.write_record([
            d.frame_index.to_string(),
            d.q_p.to_string(),
            sig9(d.b_hat_p),
            sig9(d.b_prime_p),
            sig9(d.q_bar_p),
            d.q_prime_p.to_string(),
            opt(d.actual_bits),
            opt(d.deficit),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct TraceRow {
    frame_index: usize,
    q_p: i32,
    b_hat: f64,
    b_prime: f64,
    q_bar: f64,
    q_prime: i32,
    actual_bits: Option<f64>,
    deficit: Option<f64>,
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<FrameDecision>> {
    let rows: Vec<TraceRow> = read_rows(r, &TRACE_HEADER)?;
    Ok(rows
        .into_iter()
        .map(|t| FrameDecision {
            frame_index: t.frame_index,
            q_p: t.q_p,
            b_hat_p: t.b_hat,
            b_prime_p: t.b_prime,
            q_bar_p: t.q_bar,
            q_prime_p: t.q_prime,
            actual_bits: t.actual_bits,
            deficit: t.deficit,
        })
        .collect())
}

pub fn write_rd<W: Write>(w: W, points: &[RdPoint]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(RD_HEADER)?;
    for p in points {
        out.write_record([sig9(p.bitrate), sig9(p.psnr_yuv)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rd<R: Read>(r: R) -> Result<Vec<RdPoint>> {
    read_rows(r, &RD_HEADER)
}

pub fn write_encoder_log<W: Write>(w: W, entries: &[LogEntry]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(ENCODER_LOG_HEADER)?;
    for e in entries {
        out.write_record([e.frame_index.to_string(), e.q.to_string(), sig9(e.bits)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_encoder_log<R: Read>(r: R) -> Result<Vec<LogEntry>> {
    read_rows(r, &ENCODER_LOG_HEADER)
}
