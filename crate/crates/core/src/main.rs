use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use pcfwatch::detect::DetectorConfig;
use pcfwatch::report::{self, RunConfig};

#[derive(Parser)]
#[command(
    name = "pcfwatch",
    version,
    about = "SYN-flood and port-scan detection for pcap traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both detectors over a capture file.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// JSON detector configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Alert log; printed to stdout when omitted.
        #[arg(long)]
        out_log: Option<PathBuf>,
        /// Alerts as a JSON array.
        #[arg(long)]
        out_json: Option<PathBuf>,
        /// Pass events through an on-disk spool before detection.
        #[arg(long)]
        spool: bool,
        /// Spool file location (defaults to a file in the temp directory).
        #[arg(long, requires = "spool")]
        spool_path: Option<PathBuf>,
        /// Stop after this many capture records.
        #[arg(long)]
        max_packets: Option<u64>,
        #[arg(long)]
        synflood_threshold: Option<i64>,
        #[arg(long)]
        scan_threshold: Option<u32>,
        #[arg(long)]
        interval_seconds: Option<u64>,
    },
    /// Write a synthetic capture and its ground-truth manifest.
    Generate {
        /// JSON scenario spec.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Detector configuration the manifest's expectations assume.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<DetectorConfig> {
    let Some(path) = path else {
        return Ok(DetectorConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Analyze {
            input,
            config,
            out_log,
            out_json,
            spool,
            spool_path,
            max_packets,
            synflood_threshold,
            scan_threshold,
            interval_seconds,
        } => {
            let mut detector = load_config(config.as_deref())?;
            if let Some(t) = synflood_threshold {
                detector.synflood.threshold = t;
            }
            if let Some(t) = scan_threshold {
                detector.footprint.scan_threshold = t;
            }
            if let Some(s) = interval_seconds {
                detector.interval_seconds = s;
            }
            let spool = spool.then(|| {
                spool_path.unwrap_or_else(|| {
                    std::env::temp_dir()
                        .join(format!("pcfwatch-{}.spool.jsonl", std::process::id()))
                })
            });
            let run_config = RunConfig {
                input,
                out_log: out_log.clone(),
                out_json,
                spool: spool.clone(),
                detector,
                max_packets,
                ..RunConfig::new("")
            };
            let outcome = report::run_analyze(&run_config);
            if let Some(path) = &spool {
                let _ = std::fs::remove_file(path);
            }
            let outcome = outcome?;
            if out_log.is_none() {
                print!("{}", report::format_log(&outcome.alerts));
            }
            eprintln!("{}", outcome.summary_line());
            if outcome.corrupt_spool_lines > 0 {
                eprintln!("corrupt spool lines: {}", outcome.corrupt_spool_lines);
            }
            for v in &outcome.order_violations {
                eprintln!(
                    "out-of-order event #{} at {} (behind {})",
                    v.position, v.ts, v.behind
                );
            }
            Ok(outcome.exit_code() as u8)
        }
        Command::Generate { spec, out, config } => {
            let detector = load_config(config.as_deref())?;
            let outcome = report::run_generate(&spec, &out, &detector)?;
            eprintln!(
                "wrote {} events to {}, manifest {} ({} expected alerts)",
                outcome.events,
                out.display(),
                outcome.manifest_path.display(),
                outcome.manifest.expected_alerts.len()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
