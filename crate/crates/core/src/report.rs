//! Pipeline orchestration and alert log formatting for the command line.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::batch::{self, Execution};
use crate::detect::{
    Alert, AlertKind, ConfigError, Detector, DetectorConfig, IntervalSummary, OrderViolation,
};
use crate::gen::{self, InvalidSpec, Manifest, ScenarioSpec};
use crate::pcap_io::{self, CaptureStats, PcapError, ReadOptions};
use crate::spool::{CorruptLine, Spool, SpoolError};

/// Events pushed through the spool between drains.
pub const SPOOL_BATCH: usize = 4096;

pub fn attack_name(kind: AlertKind) -> &'static str {
    match kind {
        AlertKind::Footprinting => "FOOT PRINTING ATTACK",
        AlertKind::SynFlood => "SYN FLOOD ATTACK",
    }
}

/// One alert log line, without a trailing newline.
pub fn format_alert(alert: &Alert) -> String {
    format!(
        "Spam/Worm Affected IP: {} AttckName:{} Detected No.of.Scans:{}",
        alert.affected_ip,
        attack_name(alert.kind),
        alert.count
    )
}

/// The full text log: one newline-terminated line per alert.
pub fn format_log(alerts: &[Alert]) -> String {
    alerts.iter().map(|a| format_alert(a) + "\n").collect()
}

pub fn alerts_json(alerts: &[Alert]) -> String {
    let mut out = serde_json::to_string_pretty(alerts).expect("alerts serialize");
    out.push('\n');
    out
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub out_log: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
    /// Route events through a spool file at this path.
    pub spool: Option<PathBuf>,
    pub detector: DetectorConfig,
    pub max_packets: Option<u64>,
    pub execution: Execution,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            out_log: None,
            out_json: None,
            spool: None,
            detector: DetectorConfig::default(),
            max_packets: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("reading {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: PcapError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Spool(#[from] SpoolError),
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeOutcome {
    pub capture: CaptureStats,
    pub events: u64,
    pub corrupt_spool_lines: u64,
    pub alerts: Vec<Alert>,
    pub intervals: Vec<IntervalSummary>,
    pub order_violations: Vec<OrderViolation>,
}

impl AnalyzeOutcome {
    /// 0 for a clean trace, 2 when anything was detected.
    pub fn exit_code(&self) -> i32 {
        if self.alerts.is_empty() {
            0
        } else {
            2
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "packets read: {}, skipped: {}, malformed: {}, events: {}, alerts: {}",
            self.capture.packets,
            self.capture.skipped,
            self.capture.malformed,
            self.events,
            self.alerts.len()
        )
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), AnalyzeError> {
    fs::write(path, contents).map_err(|source| AnalyzeError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Capture file -> flow events -> (optional spool) -> detectors -> logs.
pub fn run_analyze(config: &RunConfig) -> Result<AnalyzeOutcome, AnalyzeError> {
    let mut detector = Detector::new(&config.detector)?;
    let capture = pcap_io::read_pcap_with(
        &config.input,
        ReadOptions {
            max_packets: config.max_packets,
            execution: config.execution,
        },
    )
    .map_err(|source| AnalyzeError::Input {
        path: config.input.clone(),
        source,
    })?;
    detector.note_input_issues(capture.stats.skipped + capture.stats.malformed, 0);

    let events = batch::extract_all(&capture.records, config.execution);
    let mut corrupt: Vec<CorruptLine> = Vec::new();
    match &config.spool {
        Some(path) => {
            let mut spool = Spool::open(path)?;
            // Leftovers from an earlier run are not part of this capture.
            spool.drain()?;
            for chunk in events.chunks(SPOOL_BATCH) {
                for ev in chunk {
                    spool.append(ev)?;
                }
                let drained = spool.drain()?;
                detector.note_input_issues(0, drained.corrupt.len() as u64);
                corrupt.extend(drained.corrupt);
                for ev in &drained.events {
                    detector.ingest(ev);
                }
            }
        }
        None => {
            for ev in &events {
                detector.ingest(ev);
            }
        }
    }
    let report = detector.finish();

    if let Some(path) = &config.out_log {
        write_output(path, &format_log(&report.alerts))?;
    }
    if let Some(path) = &config.out_json {
        write_output(path, &alerts_json(&report.alerts))?;
    }

    Ok(AnalyzeOutcome {
        capture: capture.stats,
        events: events.len() as u64,
        corrupt_spool_lines: corrupt.len() as u64,
        alerts: report.alerts,
        intervals: report.intervals,
        order_violations: report.order_violations,
    })
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("reading spec {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parsing spec {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Invalid(#[from] InvalidSpec),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: PcapError,
    },
}

#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    pub events: usize,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

/// Manifest path written next to a generated capture.
pub fn manifest_path(pcap: &Path) -> PathBuf {
    pcap.with_extension("manifest.json")
}

pub fn parse_spec(path: &Path) -> Result<ScenarioSpec, GenerateError> {
    let text = fs::read_to_string(path).map_err(|source| GenerateError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| GenerateError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a scenario spec, writes its capture to `out` and the manifest
/// alongside.
pub fn run_generate(
    spec_path: &Path,
    out: &Path,
    detector: &DetectorConfig,
) -> Result<GenerateOutcome, GenerateError> {
    detector.validate()?;
    let spec = parse_spec(spec_path)?;
    let scenario = gen::generate(&spec, detector)?;
    let write_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GenerateError::Write { path, source }
    };
    pcap_io::write_pcap(&scenario.records(), out).map_err(write_err(out))?;
    let manifest_path = manifest_path(out);
    let json =
        serde_json::to_string_pretty(&scenario.manifest).expect("manifest serializes") + "\n";
    fs::write(&manifest_path, json).map_err(|e| GenerateError::Write {
        path: manifest_path.clone(),
        source: PcapError::Io(e),
    })?;
    Ok(GenerateOutcome {
        events: scenario.events.len(),
        manifest_path,
        manifest: scenario.manifest,
    })
}
