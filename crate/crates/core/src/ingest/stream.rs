//! Canonical JSONL observable stream.
//!
//! One JSON object per line:
//!
//! ```text
//! {"t": 1700000000.0, "kind": "spectrum", "f0_hz": 1573000000.0, "df_hz": 500000.0,
//!  "bins": [-120.5, ...], "pga": 4, "temp_k": 301.2}
//! {"t": 1700000000.0, "kind": "epoch", "sat": "S131", "cn0": 45.0, "elev": 46.0}
//! ```
//!
//! A missing `cn0` key encodes loss of lock. A `null` bin encodes zero linear
//! power. Blank lines are ignored.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ReceiverEpoch, SpectrumRecord};

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Spectrum(SpectrumRecord),
    Epoch(ReceiverEpoch),
}

impl Record {
    pub fn timestamp(&self) -> f64 {
        match self {
            Record::Spectrum(s) => s.timestamp,
            Record::Epoch(e) => e.timestamp,
        }
    }
}

/// A rejected line. The stream keeps going after one of these.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaViolation {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochStream {
    pub records: Vec<Record>,
    pub violations: Vec<SchemaViolation>,
    /// Non-fatal issues such as timestamps going backwards.
    pub warnings: Vec<String>,
}

impl EpochStream {
    pub fn spectra(&self) -> impl Iterator<Item = &SpectrumRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Spectrum(s) => Some(s),
            _ => None,
        })
    }

    pub fn epochs(&self) -> impl Iterator<Item = &ReceiverEpoch> {
        self.records.iter().filter_map(|r| match r {
            Record::Epoch(e) => Some(e),
            _ => None,
        })
    }

    /// Concatenate another stream (e.g. a second month of logs).
    pub fn extend(&mut self, other: EpochStream) {
        self.records.extend(other.records);
        self.violations.extend(other.violations);
        self.warnings.extend(other.warnings);
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Spectrum {
        t: f64,
        f0_hz: f64,
        df_hz: f64,
        bins: Vec<Option<f64>>,
        pga: f64,
        temp_k: f64,
    },
    Epoch {
        t: f64,
        sat: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cn0: Option<f64>,
        elev: f64,
    },
}

fn decode_line(text: &str) -> Result<Record, String> {
    let line: Line = serde_json::from_str(text).map_err(|e| e.to_string())?;
    match line {
        Line::Spectrum {
            t,
            f0_hz,
            df_hz,
            bins,
            pga,
            temp_k,
        } => {
            let bins = bins
                .into_iter()
                .map(|b| b.unwrap_or(f64::NEG_INFINITY))
                .collect();
            SpectrumRecord::new(t, f0_hz, df_hz, bins, pga, temp_k)
                .map(Record::Spectrum)
                .map_err(|e| e.to_string())
        }
        Line::Epoch { t, sat, cn0, elev } => ReceiverEpoch::new(t, sat, cn0, elev)
            .map(Record::Epoch)
            .map_err(|e| e.to_string()),
    }
}

/// Read a whole stream. Only I/O failures are fatal; bad lines are collected.
pub fn read_epoch_stream<R: BufRead>(source: R) -> io::Result<EpochStream> {
    let mut out = EpochStream::default();
    let mut last_t = f64::NEG_INFINITY;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        match decode_line(text) {
            Ok(rec) => {
                let t = rec.timestamp();
                if t < last_t {
                    out.warnings.push(format!(
                        "line {}: timestamp {t} precedes previous {last_t}",
                        idx + 1
                    ));
                }
                last_t = last_t.max(t);
                out.records.push(rec);
            }
            Err(message) => out.violations.push(SchemaViolation {
                line: idx + 1,
                message,
            }),
        }
    }
    Ok(out)
}

pub fn read_epoch_file(path: &Path) -> io::Result<EpochStream> {
    read_epoch_stream(BufReader::new(File::open(path)?))
}

fn to_line(rec: &Record) -> Line {
    match rec {
        Record::Spectrum(s) => Line::Spectrum {
            t: s.timestamp,
            f0_hz: s.first_bin_hz,
            df_hz: super::BIN_SPACING_HZ,
            bins: s
                .bin_powers
                .iter()
                .map(|&p| p.is_finite().then_some(p))
                .collect(),
            pga: s.pga_level,
            temp_k: s.temperature,
        },
        Record::Epoch(e) => Line::Epoch {
            t: e.timestamp,
            sat: e.sat_id.clone(),
            cn0: e.cn0,
            elev: e.elevation_deg,
        },
    }
}

pub fn write_epoch_stream<'a, W: Write>(
    mut sink: W,
    records: impl IntoIterator<Item = &'a Record>,
) -> io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut sink, &to_line(rec))?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}
