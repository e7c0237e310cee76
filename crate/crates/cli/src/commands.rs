//! Command implementations behind the CLI. Exit codes: 0 = clean audit,
//! 2 = at least one violation found, 1 = operational error, so shell
//! pipelines can branch on "attack found" separately from "tool broke".

use std::io::Write;
use std::path::{Path, PathBuf};

use bridgetally_core::ate::{run_correctness_experiment, ExperimentKind};
use bridgetally_core::audit::{aggregate_flow, audit_trace, AuditOptions, AuditReport};
use bridgetally_core::config::{AuditConfig, SinkConfig};
use bridgetally_core::event::ChainEvent;
use bridgetally_core::model::ChainId;
use bridgetally_core::pairing::ExternalEntry;

use crate::logio;
use crate::monitor::{
    AlertSink, ChainSource, Clock, FileTailSource, Monitor, NdjsonSink, OutboxSink, SimClock,
    WallClock,
};
use crate::report::{build_table, render_text, LabelRules};
use crate::sim::{generate, ScenarioConfig};
use crate::store::LogStore;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATIONS: i32 = 2;

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_ERROR
}

fn load_config(path: &Path) -> Result<AuditConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    AuditConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_external(path: Option<&PathBuf>) -> Result<Vec<ExternalEntry>, String> {
    match path {
        Some(p) => logio::read_external_map(p).map_err(|e| e.to_string()),
        None => Ok(Vec::new()),
    }
}

pub struct AuditArgs {
    pub config: PathBuf,
    pub logs: Vec<PathBuf>,
    pub external: Option<PathBuf>,
    pub out: PathBuf,
    pub flow_out: Option<PathBuf>,
    pub flow_bucket: i64,
    pub strict_fees: bool,
}

/// Batch audit: pair deposits and withdrawals across the given logs and
/// apply the balance invariant to every withdrawal.
pub fn cmd_audit(args: &AuditArgs) -> i32 {
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let external = match load_external(args.external.as_ref()) {
        Ok(x) => x,
        Err(e) => return fail(e),
    };
    let mut events: Vec<ChainEvent> = Vec::new();
    let mut parse_errors = 0usize;
    for path in &args.logs {
        match logio::read_event_log(path, None) {
            Ok((evs, errs)) => {
                for err in &errs {
                    eprintln!("{}: {err}", path.display());
                }
                parse_errors += errs.len();
                events.extend(evs);
            }
            Err(e) => return fail(format!("{}: {e}", path.display())),
        }
    }
    let options = AuditOptions {
        strict_fees: args.strict_fees,
        alert_on_unknown_token: cfg.monitor.alert_on_unknown_token,
        ..AuditOptions::default()
    };
    let report = audit_trace(&events, &external, &cfg, &options);
    if let Err(e) = logio::write_findings(&args.out, &report.findings) {
        return fail(e);
    }
    if let Some(flow_out) = &args.flow_out {
        let series = aggregate_flow(&events, &cfg, args.flow_bucket.max(1));
        if let Err(e) = logio::write_ndjson(flow_out, &series) {
            return fail(e);
        }
    }
    print_audit_summary(&report, parse_errors);
    for skipped in &report.skipped {
        eprintln!("bridge {} skipped: {}", skipped.bridge, skipped.error);
    }
    if report.summary.violations > 0 {
        EXIT_VIOLATIONS
    } else {
        EXIT_CLEAN
    }
}

fn print_audit_summary(report: &AuditReport, parse_errors: usize) {
    let s = &report.summary;
    println!(
        "{:<24}  {:>10}",
        "category", "count"
    );
    for (category, count) in &s.categories {
        println!("{:<24}  {:>10}", category.as_str(), count);
    }
    println!(
        "analyzed {} withdrawals against {} deposits: {} violations ({} parse errors)",
        s.withdrawals, s.deposits, s.violations, parse_errors
    );
    println!(
        "{}",
        serde_json::to_string(&s).expect("summary serializes")
    );
}

pub struct WatchArgs {
    pub config: PathBuf,
    pub store_dir: PathBuf,
    /// `chain=path` pairs naming the event-log file each chain source tails.
    pub feeds: Vec<String>,
    pub external: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub interval: Option<i64>,
    pub polls: u64,
    /// Simulated-clock start; wall clock when absent.
    pub sim_start: Option<i64>,
    pub threaded: bool,
    pub strict_fees: bool,
}

/// Live monitor over file-tailed chain feeds.
pub fn cmd_watch(args: &WatchArgs) -> i32 {
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let external = match load_external(args.external.as_ref()) {
        Ok(x) => x,
        Err(e) => return fail(e),
    };
    let mut sources: Vec<Box<dyn ChainSource>> = Vec::new();
    for feed in &args.feeds {
        let Some((chain, path)) = feed.split_once('=') else {
            return fail(format!("feed {feed:?} is not chain=path"));
        };
        let chain = ChainId::new(chain);
        let Some(lag) = cfg.finality_lag(&chain) else {
            return fail(format!("chain {chain} is not in the configuration"));
        };
        sources.push(Box::new(FileTailSource::new(
            chain,
            lag,
            Path::new(path),
        )));
    }
    if sources.is_empty() {
        return fail("no feeds given (expected chain=path arguments)");
    }
    let sink: Box<dyn AlertSink> = match (&args.out, &cfg.monitor.sink) {
        (Some(path), _) => match NdjsonSink::open(path) {
            Ok(s) => Box::new(s),
            Err(e) => return fail(e),
        },
        (None, SinkConfig::Ndjson { path }) => match NdjsonSink::open(Path::new(path)) {
            Ok(s) => Box::new(s),
            Err(e) => return fail(e),
        },
        (None, SinkConfig::Outbox { dir }) => match OutboxSink::open(Path::new(dir)) {
            Ok(s) => Box::new(s),
            Err(e) => return fail(e),
        },
    };
    let store = match LogStore::open(&args.store_dir) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let options = AuditOptions {
        strict_fees: args.strict_fees,
        alert_on_unknown_token: cfg.monitor.alert_on_unknown_token,
        ..AuditOptions::default()
    };
    let interval = args.interval.unwrap_or(cfg.monitor.poll_interval).max(1);
    let mut monitor = match Monitor::open(cfg, options, store, sources, sink, external) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    monitor.threaded = args.threaded;
    let mut sim_clock;
    let mut wall_clock;
    let clock: &mut dyn Clock = match args.sim_start {
        Some(start) => {
            sim_clock = SimClock::new(start);
            &mut sim_clock
        }
        None => {
            wall_clock = WallClock::default();
            &mut wall_clock
        }
    };
    let reports = monitor.run(clock, interval, args.polls, None);
    for report in &reports {
        println!(
            "poll t={} horizon={} events={} audited={} alerts={} deferred={}",
            report.now,
            report.horizon,
            report.events_seen,
            report.withdrawals_audited,
            report.alerts_emitted,
            report.deferred
        );
    }
    let total_alerts: u64 = reports.iter().map(|r| r.alerts_emitted).sum();
    println!(
        "{} polls, {} alerts, batch counter {}",
        reports.len(),
        total_alerts,
        monitor.batch_counter()
    );
    EXIT_CLEAN
}

pub struct SimulateArgs {
    pub scenario: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
}

/// Generates a synthetic multi-chain trace with ground-truth labels.
pub fn cmd_simulate(args: &SimulateArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", args.scenario.display())),
    };
    let mut scenario: ScenarioConfig = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", args.scenario.display())),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let trace = match generate(&scenario) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    match trace.write_to_dir(&args.out_dir) {
        Ok(files) => {
            for f in &files {
                println!("{}", f.display());
            }
            println!(
                "{} events, {} ground-truth entries",
                trace.logs.values().map(Vec::len).sum::<usize>(),
                trace.ground_truth.len()
            );
            EXIT_CLEAN
        }
        Err(e) => fail(e),
    }
}

pub struct ReportArgs {
    pub findings: PathBuf,
    pub rules: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Renders per-bridge label counts from a findings file.
pub fn cmd_report(args: &ReportArgs) -> i32 {
    // Unknown categories in the input fail deserialization, exit 1.
    let findings = match logio::read_findings(&args.findings) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let rules = match &args.rules {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", path.display())),
            };
            match LabelRules::from_json(&text) {
                Ok(r) => r,
                Err(e) => return fail(format!("{}: {e}", path.display())),
            }
        }
        None => LabelRules::default(),
    };
    let table = build_table(&findings, &rules);
    print!("{}", render_text(&table));
    let json = serde_json::to_string(&table).expect("table serializes");
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json + "\n") {
                return fail(e);
            }
        }
        None => println!("{json}"),
    }
    EXIT_CLEAN
}

pub struct AteDemoArgs {
    pub seed: u64,
    pub benign_only: bool,
    pub transcript: Option<PathBuf>,
}

/// Runs the announce-then-execute correctness experiment: 100 paired
/// transactions with three malicious ones at seed-derived positions.
pub fn cmd_ate_demo(args: &AteDemoArgs) -> i32 {
    let malicious: &[ExperimentKind] = if args.benign_only {
        &[]
    } else {
        &[
            ExperimentKind::OverWithdraw,
            ExperimentKind::Unbacked,
            ExperimentKind::DoubleSpend,
        ]
    };
    let report = run_correctness_experiment(args.seed, 100, malicious);
    if let Some(path) = &args.transcript {
        if let Err(e) = logio::write_ndjson(path, &report.outcomes) {
            return fail(e);
        }
    }
    let mut stdout = std::io::stdout().lock();
    let summary = serde_json::json!({
        "seed": report.seed,
        "total": report.total,
        "executed": report.executed,
        "rejected": report.rejected,
        "rejected_categories": report.rejected_categories,
        "total_steps": report.total_steps,
    });
    let _ = writeln!(
        stdout,
        "{}",
        serde_json::to_string_pretty(&summary).expect("report serializes")
    );
    EXIT_CLEAN
}
