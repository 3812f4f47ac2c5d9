//! Newline-delimited JSON spike records, one self-contained object per line:
//!
//! ```text
//! {"example_id":"test-17","trial":0,"duration_ms":350.0,"label":4,"trains":[[1.5,20.0],[]]}
//! ```
//!
//! Spike times are written in shortest round-trip form, so reading a written
//! file reproduces every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::{ensure_valid, SpikeRecord, SpikeTrain};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    example_id: String,
    trial: u32,
    duration_ms: f64,
    label: Option<usize>,
    trains: Vec<Vec<f64>>,
}

impl From<&SpikeRecord> for Line {
    fn from(r: &SpikeRecord) -> Self {
        Self {
            example_id: r.example_id.clone(),
            trial: r.trial_index,
            duration_ms: r.duration_ms,
            label: r.label,
            trains: r.trains.iter().map(|t| t.times.clone()).collect(),
        }
    }
}

impl From<Line> for SpikeRecord {
    fn from(l: Line) -> Self {
        SpikeRecord {
            example_id: l.example_id,
            trial_index: l.trial,
            duration_ms: l.duration_ms,
            label: l.label,
            trains: l
                .trains
                .into_iter()
                .enumerate()
                .map(|(j, t)| SpikeTrain::new(j, t))
                .collect(),
        }
    }
}

/// Serializes one record as a single line without the trailing newline.
pub fn to_line(record: &SpikeRecord) -> Result<String> {
    ensure_valid(record)?;
    serde_json::to_string(&Line::from(record))
        .map_err(|e| Error::InvalidRecord(format!("{}: {e}", record.example_id)))
}

/// Writes records to any sink; every record is validated first.
pub fn write_to<W: Write>(mut sink: W, records: &[SpikeRecord]) -> Result<()> {
    let mut buf = String::new();
    for r in records {
        buf.clear();
        buf.push_str(&to_line(r)?);
        buf.push('\n');
        sink.write_all(buf.as_bytes())
            .map_err(|e| Error::io("<sink>", e))?;
    }
    sink.flush().map_err(|e| Error::io("<sink>", e))
}

pub fn write_records(path: &Path, records: &[SpikeRecord]) -> Result<()> {
    // Validate everything before touching the file.
    for r in records {
        ensure_valid(r)?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_to(BufWriter::new(file), records).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses records from a reader; blank lines are skipped. `origin` names the
/// source in error messages.
pub fn read_from<R: BufRead>(source: R, origin: &Path) -> Result<Vec<SpikeRecord>> {
    parse(source, origin, true)
}

fn parse<R: BufRead>(source: R, origin: &Path, check: bool) -> Result<Vec<SpikeRecord>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |detail: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            detail,
        };
        let parsed: Line = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let record = SpikeRecord::from(parsed);
        if check {
            ensure_valid(&record).map_err(|e| parse_err(e.to_string()))?;
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<SpikeRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(BufReader::new(file), path)
}

/// Parses without validating, for linting files that may be malformed.
pub fn read_records_unchecked(path: &Path) -> Result<Vec<SpikeRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse(BufReader::new(file), path, false)
}
