//! File IO for the newline-delimited JSON formats: event logs, external
//! pairing maps, findings, and ground-truth files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use bridgetally_core::audit::Finding;
use bridgetally_core::event::{format_event_line, parse_event_log, ChainEvent, ParseError};
use bridgetally_core::model::ChainId;
use bridgetally_core::pairing::ExternalEntry;

use crate::sim::GroundTruthEntry;

/// Reads one chain's event log. Malformed records come back as errors
/// alongside the events that did parse.
pub fn read_event_log(
    path: &Path,
    expected_chain: Option<&ChainId>,
) -> io::Result<(Vec<ChainEvent>, Vec<ParseError>)> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_event_log(&text, expected_chain))
}

/// Writes events in canonical line format, one per line.
pub fn write_event_log(path: &Path, events: &[ChainEvent]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for ev in events {
        out.write_all(format_event_line(ev).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Generic NDJSON reader for serde types; blank lines are skipped.
pub fn read_ndjson<T: serde::de::DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), i + 1),
            )
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_ndjson<T: serde::Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_external_map(path: &Path) -> io::Result<Vec<ExternalEntry>> {
    read_ndjson(path)
}

pub fn read_findings(path: &Path) -> io::Result<Vec<Finding>> {
    read_ndjson(path)
}

pub fn write_findings(path: &Path, findings: &[Finding]) -> io::Result<()> {
    write_ndjson(path, findings)
}

pub fn read_ground_truth(path: &Path) -> io::Result<Vec<GroundTruthEntry>> {
    read_ndjson(path)
}
