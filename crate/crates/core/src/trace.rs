//! JSONL trace records: one header line, then one event per line.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::{BufRead, LineWriter, Write};

pub const SCHEMA_VERSION: u32 = 1;

/// Default line-writer capacity when `IVR_TRACE_BUFFER` is unset.
pub const DEFAULT_TRACE_BUFFER: usize = 8 * 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub engine: String,
    pub budget: u64,
    pub config: Value,
}

impl TraceHeader {
    pub fn new(engine: &str, budget: u64, config: Value) -> Self {
        Self { schema_version: SCHEMA_VERSION, engine: engine.to_string(), budget, config }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub stage: u64,
    pub event: String,
    pub req: Option<String>,
    pub payload: Value,
}

impl TraceEvent {
    pub fn new(stage: u64, event: &str, req: Option<String>, payload: Value) -> Self {
        Self { stage, event: event.to_string(), req, payload }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace events serialize")
    }
}

/// Buffer size for trace output, from `IVR_TRACE_BUFFER` (bytes).
pub fn trace_buffer_capacity() -> usize {
    std::env::var("IVR_TRACE_BUFFER")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(DEFAULT_TRACE_BUFFER)
}

/// Line-buffered JSONL writer: every complete line is flushed, so a killed
/// run leaves a prefix-valid trace.
pub struct TraceWriter<W: Write> {
    out: LineWriter<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { out: LineWriter::with_capacity(trace_buffer_capacity(), inner) }
    }

    pub fn header(&mut self, header: &TraceHeader) -> Result<()> {
        writeln!(self.out, "{}", serde_json::to_string(header)?)?;
        Ok(())
    }

    pub fn event(&mut self, event: &TraceEvent) -> Result<()> {
        writeln!(self.out, "{}", event.to_line())?;
        Ok(())
    }

    pub fn events<'a>(&mut self, events: impl IntoIterator<Item = &'a TraceEvent>) -> Result<()> {
        for e in events {
            self.event(e)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Splits a trace into its header and raw event lines.
pub fn read_trace<R: BufRead>(input: R) -> Result<(TraceHeader, String, Vec<String>)> {
    let mut lines = input.lines();
    let header_line = lines.next().ok_or_else(|| Error::Trace("empty trace".into()))??;
    let header: TraceHeader = serde_json::from_str(&header_line)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::TraceVersion { found: header.schema_version, expected: SCHEMA_VERSION });
    }
    let events = lines.collect::<std::io::Result<Vec<_>>>()?;
    Ok((header, header_line, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip() {
        let mut w = TraceWriter::new(Vec::new());
        w.header(&TraceHeader::new("fi", 10, json!({"q_max": 3}))).unwrap();
        w.event(&TraceEvent::new(1, "case1a", Some("R_0".into()), json!({"h": 4}))).unwrap();
        let bytes = w.finish().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with(r#"{"stage":1,"event":"case1a","req":"R_0""#));
        let (h, _, events) = read_trace(&bytes[..]).unwrap();
        assert_eq!(h.engine, "fi");
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn version_mismatch() {
        let text = r#"{"schema_version":9,"engine":"fi","budget":1,"config":{}}"#;
        assert!(matches!(read_trace(text.as_bytes()), Err(Error::TraceVersion { found: 9, .. })));
    }
}
