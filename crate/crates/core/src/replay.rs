//! Driving an engine into a trace, and replaying a trace against a fresh
//! engine built from its header.

use crate::anc::{AncConfig, AncEngine};
use crate::error::{Error, Result};
use crate::fi::{FiConfig, FiEngine};
use crate::lv::{LvConfig, LvEngine};
use crate::strings::BinaryString;
use crate::trace::{read_trace, TraceEvent, TraceHeader};
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeSet;
use std::io::BufRead;

pub const ENGINES: [&str; 3] = ["fi", "lv", "anc"];

/// Uniform stepping over the three engines.
pub trait Driver {
    fn step(&mut self) -> Result<()>;
    fn stage(&self) -> u64;
    fn take_events(&mut self) -> Vec<TraceEvent>;
    fn violations(&self) -> usize;
    fn report_json(&self) -> Result<Value>;
}

impl Driver for FiEngine {
    fn step(&mut self) -> Result<()> {
        FiEngine::step(self).map(drop)
    }
    fn stage(&self) -> u64 {
        FiEngine::stage(self)
    }
    fn take_events(&mut self) -> Vec<TraceEvent> {
        FiEngine::take_events(self)
    }
    fn violations(&self) -> usize {
        self.audit().violations.len()
    }
    fn report_json(&self) -> Result<Value> {
        Ok(serde_json::to_value(self.report()?)?)
    }
}

impl Driver for LvEngine {
    fn step(&mut self) -> Result<()> {
        LvEngine::step(self).map(drop)
    }
    fn stage(&self) -> u64 {
        LvEngine::stage(self)
    }
    fn take_events(&mut self) -> Vec<TraceEvent> {
        LvEngine::take_events(self)
    }
    fn violations(&self) -> usize {
        self.audit().violations.len()
    }
    fn report_json(&self) -> Result<Value> {
        Ok(serde_json::to_value(self.report())?)
    }
}

impl Driver for AncEngine {
    fn step(&mut self) -> Result<()> {
        AncEngine::step(self).map(drop)
    }
    fn stage(&self) -> u64 {
        AncEngine::stage(self)
    }
    fn take_events(&mut self) -> Vec<TraceEvent> {
        AncEngine::take_events(self)
    }
    fn violations(&self) -> usize {
        self.audit().violations.len()
    }
    fn report_json(&self) -> Result<Value> {
        Ok(serde_json::to_value(self.report())?)
    }
}

/// Builds the named engine from its JSON config.
pub fn build_driver(engine: &str, config: &Value) -> Result<Box<dyn Driver>> {
    Ok(match engine {
        "fi" => Box::new(FiEngine::new(serde_json::from_value::<FiConfig>(config.clone())?)?),
        "lv" => Box::new(LvEngine::new(serde_json::from_value::<LvConfig>(config.clone())?)?),
        "anc" => Box::new(AncEngine::new(serde_json::from_value::<AncConfig>(config.clone())?)?),
        other => return Err(Error::BadSpec(format!("unknown engine {other:?}; expected one of {ENGINES:?}"))),
    })
}

#[derive(Debug)]
pub struct DriveOutcome {
    pub stages: u64,
    pub violations: usize,
    pub report: Option<Value>,
    /// An engine fault; events up to the fault were still delivered.
    pub error: Option<Error>,
}

/// Runs up to `budget` stages, handing each event to `sink` as soon as its
/// stage completes. With `stop_on_violation`, stops after the first stage
/// that records an audit violation.
pub fn drive(
    driver: &mut dyn Driver,
    budget: u64,
    stop_on_violation: bool,
    sink: &mut dyn FnMut(&TraceEvent) -> Result<()>,
) -> Result<DriveOutcome> {
    for e in driver.take_events() {
        sink(&e)?;
    }
    let mut error = None;
    while driver.stage() < budget {
        let res = driver.step();
        for e in driver.take_events() {
            sink(&e)?;
        }
        if let Err(err) = res {
            error = Some(err);
            break;
        }
        if stop_on_violation && driver.violations() > 0 {
            break;
        }
    }
    let report = match &error {
        None => Some(driver.report_json()?),
        Some(_) => None,
    };
    Ok(DriveOutcome { stages: driver.stage(), violations: driver.violations(), report, error })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    /// 1-based line number in the trace file.
    pub line: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ReplayOutcome {
    pub engine: String,
    pub events: usize,
    pub divergence: Option<Divergence>,
    pub violations: usize,
    /// `A_move` stems that extend a string from an earlier `forbid` event.
    pub forbidden_hits: Vec<String>,
    pub engine_error: Option<String>,
}

impl ReplayOutcome {
    pub fn ok(&self) -> bool {
        self.divergence.is_none() && self.violations == 0 && self.forbidden_hits.is_empty() && self.engine_error.is_none()
    }
}

/// Re-runs the trace's engine and compares every line byte for byte.
///
/// A recorded trace that ends in an `audit_violation` was cut short, so the
/// replay stops at that stage as well.
pub fn replay<R: BufRead>(input: R) -> Result<ReplayOutcome> {
    let (header, header_line, recorded) = read_trace(input)?;
    let regenerated = serde_json::to_string(&TraceHeader::new(&header.engine, header.budget, header.config.clone()))?;
    if regenerated != header_line {
        return Ok(ReplayOutcome {
            engine: header.engine,
            events: 0,
            divergence: Some(Divergence { line: 1, expected: Some(header_line), actual: Some(regenerated) }),
            violations: 0,
            forbidden_hits: Vec::new(),
            engine_error: None,
        });
    }
    let last: Option<TraceEvent> = recorded.last().map(|l| serde_json::from_str(l)).transpose()?;
    let cut = last.filter(|e| e.event == "audit_violation").map(|e| e.stage);
    let mut driver = build_driver(&header.engine, &header.config)?;
    let mut actual = Vec::new();
    let budget = cut.unwrap_or(header.budget).min(header.budget);
    let outcome = drive(driver.as_mut(), budget, false, &mut |e| {
        actual.push(e.to_line());
        Ok(())
    })?;
    let divergence = (0..recorded.len().max(actual.len()))
        .find(|&i| recorded.get(i) != actual.get(i))
        .map(|i| Divergence { line: i + 2, expected: recorded.get(i).cloned(), actual: actual.get(i).cloned() });
    let forbidden_hits = if header.engine == "lv" { forbidden_hits(&recorded)? } else { Vec::new() };
    Ok(ReplayOutcome {
        engine: header.engine,
        events: recorded.len(),
        divergence,
        violations: outcome.violations,
        forbidden_hits,
        engine_error: outcome.error.map(|e| e.to_string()),
    })
}

/// Checks, from the trace alone, that no `A_move` lands above a string some
/// earlier `forbid` event registered.
pub fn forbidden_hits(lines: &[String]) -> Result<Vec<String>> {
    let mut forbidden: BTreeSet<BinaryString> = BTreeSet::new();
    let mut lengths: BTreeSet<usize> = BTreeSet::new();
    let mut hits = Vec::new();
    for line in lines {
        let ev: TraceEvent = serde_json::from_str(line)?;
        let text = |key: &str| -> Result<BinaryString> {
            ev.payload
                .get(key)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Trace(format!("stage {}: {} without {key}", ev.stage, ev.event)))?
                .parse()
        };
        match ev.event.as_str() {
            "forbid" => {
                let s = text("string")?;
                lengths.insert(s.len());
                forbidden.insert(s);
            }
            "A_move" => {
                let stem = text("stem")?;
                if lengths.iter().take_while(|&&n| n <= stem.len()).any(|&n| forbidden.contains(&stem.prefix(n))) {
                    hits.push(format!("stage {}: {stem}", ev.stage));
                }
            }
            _ => {}
        }
    }
    Ok(hits)
}
