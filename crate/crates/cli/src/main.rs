use std::path::PathBuf;

use clap::{Parser, Subcommand};

use bridgetally::commands::{
    cmd_ate_demo, cmd_audit, cmd_report, cmd_simulate, cmd_watch, AteDemoArgs, AuditArgs,
    ReportArgs, SimulateArgs, WatchArgs,
};

#[derive(Parser)]
#[command(
    name = "bridgetally",
    about = "Cross-chain bridge balance auditor",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch-audit event logs: pair deposits with withdrawals and apply the
    /// balance invariant. Exit code 2 signals violations.
    Audit {
        /// Deployment configuration (chains, bridges, fees).
        #[arg(long)]
        config: PathBuf,
        /// Event-log files, one or more chains.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// External pairing map for bridges without in-band handles.
        #[arg(long)]
        external: Option<PathBuf>,
        /// Findings output (newline-delimited JSON).
        #[arg(long, default_value = "findings.ndjson")]
        out: PathBuf,
        /// Also write the aggregate inflow-outflow series here.
        #[arg(long)]
        flow_out: Option<PathBuf>,
        /// Bucket width in seconds for the flow series.
        #[arg(long, default_value_t = 3600)]
        flow_bucket: i64,
        /// Determinate fees must match exactly; flag shortfalls too.
        #[arg(long)]
        strict_fees: bool,
    },
    /// Monitor chain feeds live: poll finalized events, audit within the
    /// finality horizon, and emit deduplicated alerts.
    Watch {
        #[arg(long)]
        config: PathBuf,
        /// Store directory (hot/cold logs and checkpoint).
        #[arg(long)]
        store: PathBuf,
        /// Feeds as chain=path pairs.
        #[arg(required = true)]
        feeds: Vec<String>,
        #[arg(long)]
        external: Option<PathBuf>,
        /// Alert sink file (overrides the configured sink).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Poll interval in seconds (default from config).
        #[arg(long)]
        interval: Option<i64>,
        /// Number of polls to run; 0 = run until killed.
        #[arg(long, default_value_t = 0)]
        polls: u64,
        /// Drive polling from a simulated clock starting here.
        #[arg(long)]
        sim_start: Option<i64>,
        /// Poll sources on separate threads.
        #[arg(long)]
        threaded: bool,
        #[arg(long)]
        strict_fees: bool,
    },
    /// Generate a synthetic multi-chain trace with ground-truth labels.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Label findings and render per-bridge category counts.
    Report {
        #[arg(long)]
        findings: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Write the table as JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Announce-then-execute correctness experiment (97 benign + 3
    /// malicious paired transactions).
    AteDemo {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Run all 100 transactions benign.
        #[arg(long)]
        benign_only: bool,
        /// Write the per-ticket transcript here (newline-delimited JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Audit {
            config,
            logs,
            external,
            out,
            flow_out,
            flow_bucket,
            strict_fees,
        } => cmd_audit(&AuditArgs {
            config,
            logs,
            external,
            out,
            flow_out,
            flow_bucket,
            strict_fees,
        }),
        Command::Watch {
            config,
            store,
            feeds,
            external,
            out,
            interval,
            polls,
            sim_start,
            threaded,
            strict_fees,
        } => cmd_watch(&WatchArgs {
            config,
            store_dir: store,
            feeds,
            external,
            out,
            interval,
            polls,
            sim_start,
            threaded,
            strict_fees,
        }),
        Command::Simulate { scenario, out, seed } => cmd_simulate(&SimulateArgs {
            scenario,
            out_dir: out,
            seed,
        }),
        Command::Report {
            findings,
            rules,
            out,
        } => cmd_report(&ReportArgs {
            findings,
            rules,
            out,
        }),
        Command::AteDemo {
            seed,
            benign_only,
            out,
        } => cmd_ate_demo(&AteDemoArgs {
            seed,
            benign_only,
            transcript: out,
        }),
    };
    std::process::exit(code);
}
