//! `ivr`: validate adversaries, run the constructions, and replay traces.
//!
//! Exit codes: 0 success with every audit passing, 1 audit failure or
//! engine fault, 2 usage, config or JSON error.

use clap::{Parser, Subcommand, ValueEnum};
use ivr_core::forcing::{greedy_force, hat_operator};
use ivr_core::levels::{build_levels, Variant};
use ivr_core::martingale::{snapshot, validate, AdversarySpec, Limit, StagedMartingale, ValueConstraint};
use ivr_core::replay::{build_driver, drive, replay};
use ivr_core::trace::{TraceEvent, TraceHeader, TraceWriter};
use ivr_core::{BinaryString, Error};
use serde_json::Value;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ivr", version, about = "Integer-valued martingale constructions at finite budgets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AuditMode {
    /// Stop at the first violation.
    Strict,
    /// Finish the run, then report every violation.
    Report,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    roster: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    stages: u64,
    /// Trace file; without it the trace goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "report")]
    audit: AuditMode,
}

#[derive(Subcommand)]
enum Command {
    /// Check a martingale file for non-negativity, closure and its value constraint.
    Validate {
        #[arg(long)]
        martingale: PathBuf,
        #[arg(long)]
        depth: usize,
    },
    /// Greedily steer an adversary's capital down from `sigma`.
    Force {
        #[arg(long)]
        adversary: PathBuf,
        #[arg(long, default_value = "")]
        sigma: String,
        #[arg(long)]
        depth: usize,
    },
    /// Trajectory of the staged least-improvement operator at `sigma`.
    Hat {
        #[arg(long)]
        adversary: PathBuf,
        #[arg(long, default_value = "")]
        sigma: String,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        stages: u64,
    },
    /// Print the level table.
    Levels {
        #[arg(long, default_value = "plain")]
        variant: String,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        capitals: Vec<u64>,
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
    /// Finite-injury construction against a roster of adversaries.
    RunFi(RunArgs),
    /// Level construction building `A` and `B` together.
    RunLv(RunArgs),
    /// Array noncomputable construction against functional pairs.
    RunAnc(RunArgs),
    /// Re-run a trace and compare it line by line.
    Replay { trace: PathBuf },
}

/// `println!` that ends the process quietly once stdout's reader has gone.
macro_rules! out {
    ($($arg:tt)*) => {
        if let Err(e) = writeln!(io::stdout(), $($arg)*) {
            if e.kind() == io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            panic!("writing to stdout: {e}");
        }
    };
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn audit(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

/// A trace write error; a closed stdout ends the process quietly.
fn write_error(err: Error) -> Failure {
    if matches!(&err, Error::Io(e) if e.kind() == io::ErrorKind::BrokenPipe) {
        std::process::exit(0);
    }
    Failure::audit(err.to_string())
}

fn config_error(path: &Path, err: Error) -> Failure {
    Failure::usage(format!("{}: {err}", path.display()))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let file = File::open(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Failure::usage(format!("{}: malformed JSON: {e}", path.display())))
}

fn read_adversary(path: &Path) -> Result<AdversarySpec, Failure> {
    serde_json::from_value(read_json(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn parse_sigma(text: &str) -> Result<BinaryString, Failure> {
    text.parse().map_err(|e: Error| Failure::usage(format!("--sigma: {e}")))
}

fn print_json(value: Value) {
    out!("{}", serde_json::to_string_pretty(&value).expect("reports serialize"));
}

fn cmd_validate(path: &Path, depth: usize) -> Result<(), Failure> {
    let spec = read_adversary(path)?;
    let adv = spec.build().map_err(|e| config_error(path, e))?;
    let table = snapshot(&adv, u64::MAX, depth).map_err(|e| config_error(path, e))?;
    let constraint = spec.constraint.clone().unwrap_or(ValueConstraint::Integer);
    let report = validate(&table, &constraint, depth);
    if report.is_valid() {
        out!("valid to depth {depth}");
        return Ok(());
    }
    let lines: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
    Err(Failure::audit(format!("invalid martingale:\n  {}", lines.join("\n  "))))
}

fn cmd_force(path: &Path, sigma: &str, depth: usize) -> Result<(), Failure> {
    let adv = read_adversary(path)?.build().map_err(|e| config_error(path, e))?;
    let result = greedy_force(&Limit(&adv), &parse_sigma(sigma)?, depth).map_err(|e| Failure::audit(e.to_string()))?;
    print_json(serde_json::to_value(&result).expect("reports serialize"));
    Ok(())
}

fn cmd_hat(path: &Path, sigma: &str, stages: u64) -> Result<(), Failure> {
    let adv = read_adversary(path)?.build().map_err(|e| config_error(path, e))?;
    let sigma = parse_sigma(sigma)?;
    let traj = hat_operator(&adv, &sigma, stages);
    let limit = adv.limit_wager(&BinaryString::new()).map(|_| Limit(&adv));
    print_json(serde_json::json!({
        "final": traj.last().to_text(),
        "change_count": traj.change_count,
        "search_limited": traj.search_limited,
        "limit_value": limit.and_then(|m| ivr_core::martingale::evaluate(&m, &sigma).ok()),
    }));
    Ok(())
}

fn cmd_levels(variant: &str, capitals: &[u64], count: usize) -> Result<(), Failure> {
    let variant: Variant = variant.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let table = build_levels(variant, capitals, count).map_err(|e| Failure::usage(e.to_string()))?;
    out!("l = [{}]", join(&table.l));
    out!("d = [{}]", join(&table.d));
    let f: Vec<String> = table.f.iter().map(|f| f.as_ref().map_or("-".to_string(), ToString::to_string)).collect();
    out!("f = [{}]", f.join(", "));
    for (i, row) in table.intermediate.iter().enumerate().filter(|(_, r)| !r.is_empty()) {
        out!("l_{i},* = [{}]", join(row));
    }
    Ok(())
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Normalizes a roster file: a bare array becomes `{"roster": [...]}`.
fn load_config(path: &Path) -> Result<Value, Failure> {
    match read_json(path)? {
        Value::Array(items) => Ok(serde_json::json!({ "roster": items })),
        obj @ Value::Object(_) => Ok(obj),
        _ => Err(Failure::usage(format!("{}: expected a roster array or an object with \"roster\"", path.display()))),
    }
}

fn cmd_run(engine: &str, args: &RunArgs) -> Result<(), Failure> {
    let raw = load_config(&args.roster)?;
    let mut driver = build_driver(engine, &raw).map_err(|e| config_error(&args.roster, e))?;
    // The header carries the normalized config so a replay rebuilds the same engine.
    let config = normalize(engine, &raw).map_err(|e| config_error(&args.roster, e))?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = TraceWriter::new(sink);
    writer.header(&TraceHeader::new(engine, args.stages, config)).map_err(write_error)?;
    let mut first_violation: Option<TraceEvent> = None;
    let mut last_event: Option<TraceEvent> = None;
    let outcome = drive(driver.as_mut(), args.stages, args.audit == AuditMode::Strict, &mut |e| {
        if e.event == "audit_violation" && first_violation.is_none() {
            first_violation = Some(e.clone());
        }
        last_event = Some(e.clone());
        writer.event(e)
    })
    .map_err(write_error)?;
    writer.finish().map_err(write_error)?;
    if let Some(err) = outcome.error {
        let context = last_event.map_or_else(|| "no events".to_string(), |e| e.to_line());
        return Err(Failure::audit(format!("engine fault at stage {}: {err}\nlast event: {context}", outcome.stages)));
    }
    if let Some(v) = first_violation {
        return Err(Failure::audit(format!("{} audit violation(s); first: {}", outcome.violations, v.to_line())));
    }
    let summary = serde_json::json!({"engine": engine, "stages": outcome.stages, "report": outcome.report});
    let text = serde_json::to_string_pretty(&summary).expect("reports serialize");
    if args.out.is_some() {
        out!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

/// The engine's config as it serializes after parsing.
fn normalize(engine: &str, raw: &Value) -> ivr_core::Result<Value> {
    Ok(match engine {
        "fi" => serde_json::to_value(serde_json::from_value::<ivr_core::fi::FiConfig>(raw.clone())?)?,
        "lv" => serde_json::to_value(serde_json::from_value::<ivr_core::lv::LvConfig>(raw.clone())?)?,
        _ => serde_json::to_value(serde_json::from_value::<ivr_core::anc::AncConfig>(raw.clone())?)?,
    })
}

fn cmd_replay(path: &Path) -> Result<(), Failure> {
    let file = File::open(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let outcome = replay(BufReader::new(file)).map_err(|e| match e {
        Error::Io(_) | Error::Json(_) | Error::TraceVersion { .. } | Error::Trace(_) | Error::BadSpec(_) => {
            Failure::usage(format!("{}: {e}", path.display()))
        }
        other => Failure::audit(other.to_string()),
    })?;
    if outcome.ok() {
        out!("identical, audits pass ({} events)", outcome.events);
        return Ok(());
    }
    let mut msg = Vec::new();
    if let Some(d) = &outcome.divergence {
        msg.push(format!(
            "divergence at line {}\n  recorded: {}\n  replayed: {}",
            d.line,
            d.expected.as_deref().unwrap_or("<end of trace>"),
            d.actual.as_deref().unwrap_or("<end of replay>")
        ));
    }
    if outcome.violations > 0 {
        msg.push(format!("{} audit violation(s) on replay", outcome.violations));
    }
    for hit in &outcome.forbidden_hits {
        msg.push(format!("A moved above a forbidden string at {hit}"));
    }
    if let Some(e) = &outcome.engine_error {
        msg.push(format!("engine fault on replay: {e}"));
    }
    Err(Failure::audit(msg.join("\n")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { martingale, depth } => cmd_validate(martingale, *depth),
        Command::Force { adversary, sigma, depth } => cmd_force(adversary, sigma, *depth),
        Command::Hat { adversary, sigma, stages } => cmd_hat(adversary, sigma, *stages),
        Command::Levels { variant, capitals, count } => cmd_levels(variant, capitals, *count),
        Command::RunFi(args) => cmd_run("fi", args),
        Command::RunLv(args) => cmd_run("lv", args),
        Command::RunAnc(args) => cmd_run("anc", args),
        Command::Replay { trace } => cmd_replay(trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
