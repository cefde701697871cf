//! Synthetic traffic with known ground truth: benign connections, SYN floods,
//! port scans, and interleavings of them.
//!
//! Every generator is a pure function of its [`ScenarioSpec`]: the same spec
//! and seed always yield the same events. Each scenario carries a
//! [`Manifest`] computed by exact counting over the emitted events.

pub mod truth;

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::DetectorConfig;
use crate::flow::FlowEvent;
use crate::pcap_io::PacketRecord;
use crate::tcp::{TcpFlags, Timestamp};

pub use truth::{DestTally, ExpectedAlert, Manifest, PairTally, TruthParams};

/// Events emitted per benign connection.
pub const BENIGN_EVENTS_PER_CONNECTION: usize = 8;

const EPHEMERAL_LOW: u16 = 1024;
const EPHEMERAL_SPAN: usize = 65_536 - EPHEMERAL_LOW as usize;
const BENIGN_DATA_LEN: u16 = 64;

pub const DEFAULT_BENIGN_SRC: Ipv4Addr = Ipv4Addr::new(192, 168, 1, 10);
pub const DEFAULT_SCANNER_SRC: Ipv4Addr = Ipv4Addr::new(192, 168, 1, 50);
pub const DEFAULT_SERVICE_PORT: u16 = 80;
/// 2023-11-14T22:14:00Z, a whole minute.
pub const DEFAULT_START: Timestamp = Timestamp {
    sec: 1_700_000_040,
    usec: 0,
};
pub const DEFAULT_GAP_US: u64 = 1_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid scenario: {0}")]
pub struct InvalidSpec(pub String);

fn invalid(msg: impl Into<String>) -> InvalidSpec {
    InvalidSpec(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScenarioKind {
    Benign,
    SynFlood,
    PortScan,
    Mixed,
}

/// Either an explicit list (`[21, 22, 23, 80]`) or an inclusive range
/// string (`"1-100"`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PortSpec {
    List(Vec<u16>),
    Range(String),
}

impl PortSpec {
    pub fn ports(&self) -> Result<Vec<u16>, InvalidSpec> {
        match self {
            PortSpec::List(list) => Ok(list.clone()),
            PortSpec::Range(text) => {
                let (lo, hi) = text
                    .split_once('-')
                    .ok_or_else(|| invalid(format!("port range {text:?} is not \"lo-hi\"")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<u16>()
                        .map_err(|_| invalid(format!("bad port {s:?} in range {text:?}")))
                };
                let (lo, hi) = (parse(lo)?, parse(hi)?);
                if lo > hi {
                    return Err(invalid(format!("empty port range {text:?}")));
                }
                Ok((lo..=hi).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub src_ip: Option<Ipv4Addr>,
    #[serde(default)]
    pub dst_ip: Option<Ipv4Addr>,
    #[serde(default)]
    pub dst_port: Option<u16>,
    /// Ports probed by a scan.
    #[serde(default)]
    pub port_range: Option<PortSpec>,
    /// Scan ports that answer SYN-ACK; the rest answer RST.
    #[serde(default)]
    pub open_ports: Vec<u16>,
    /// Additional randomly chosen open ports.
    #[serde(default)]
    pub open_count: usize,
    /// Connections (benign) or SYNs (flood).
    #[serde(default)]
    pub count: u64,
    #[serde(default = "default_start")]
    pub start_ts: Timestamp,
    #[serde(default = "default_gap")]
    pub inter_packet_gap_us: u64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Sub-scenarios of a MIXED spec.
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
}

fn default_start() -> Timestamp {
    DEFAULT_START
}

fn default_gap() -> u64 {
    DEFAULT_GAP_US
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioSpec {
            kind,
            src_ip: None,
            dst_ip: None,
            dst_port: None,
            port_range: None,
            open_ports: Vec::new(),
            open_count: 0,
            count: 0,
            start_ts: DEFAULT_START,
            inter_packet_gap_us: DEFAULT_GAP_US,
            rng_seed: 0,
            scenarios: Vec::new(),
        }
    }

    pub fn benign(dst: Ipv4Addr, connections: u64) -> Self {
        ScenarioSpec {
            dst_ip: Some(dst),
            count: connections,
            ..Self::new(ScenarioKind::Benign)
        }
    }

    pub fn syn_flood(dst: Ipv4Addr, port: u16, syns: u64) -> Self {
        ScenarioSpec {
            dst_ip: Some(dst),
            dst_port: Some(port),
            count: syns,
            ..Self::new(ScenarioKind::SynFlood)
        }
    }

    pub fn port_scan(src: Ipv4Addr, dst: Ipv4Addr, ports: Vec<u16>) -> Self {
        ScenarioSpec {
            src_ip: Some(src),
            dst_ip: Some(dst),
            port_range: Some(PortSpec::List(ports)),
            ..Self::new(ScenarioKind::PortScan)
        }
    }

    pub fn mixed(scenarios: Vec<ScenarioSpec>) -> Self {
        ScenarioSpec {
            scenarios,
            ..Self::new(ScenarioKind::Mixed)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_start(mut self, start: Timestamp) -> Self {
        self.start_ts = start;
        self
    }

    pub fn with_gap(mut self, gap_us: u64) -> Self {
        self.inter_packet_gap_us = gap_us;
        self
    }

    fn expect_kind(&self, kind: ScenarioKind) -> Result<(), InvalidSpec> {
        if self.kind != kind {
            return Err(invalid(format!(
                "expected a {kind:?} spec, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    fn dst(&self) -> Result<Ipv4Addr, InvalidSpec> {
        self.dst_ip.ok_or_else(|| invalid("dst_ip is required"))
    }

    fn check_gap(&self) -> Result<(), InvalidSpec> {
        if self.inter_packet_gap_us == 0 {
            return Err(invalid("inter_packet_gap_us must be positive"));
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed)
    }
}

/// Generated events plus ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub events: Vec<FlowEvent>,
    /// TCP payload bytes per event, used when writing a capture.
    pub payload_lens: Vec<u16>,
    pub manifest: Manifest,
}

impl Scenario {
    pub fn records(&self) -> Vec<PacketRecord> {
        self.events
            .iter()
            .zip(&self.payload_lens)
            .map(|(ev, &len)| ev.to_record(len))
            .collect()
    }
}

/// Timestamped event sink enforcing a fixed gap between events.
struct Emitter {
    next: Timestamp,
    gap: u64,
    events: Vec<FlowEvent>,
    payload_lens: Vec<u16>,
}

impl Emitter {
    fn new(spec: &ScenarioSpec) -> Self {
        Emitter {
            next: spec.start_ts,
            gap: spec.inter_packet_gap_us,
            events: Vec::new(),
            payload_lens: Vec::new(),
        }
    }

    fn emit(&mut self, src: (Ipv4Addr, u16), dst: (Ipv4Addr, u16), flags: TcpFlags, payload: u16) {
        self.events.push(FlowEvent {
            ts: self.next,
            sip: src.0,
            sp: src.1,
            dip: dst.0,
            dp: dst.1,
            flags,
        });
        self.payload_lens.push(payload);
        self.next = self.next.add_micros(self.gap);
    }

    fn finish(self, kind: ScenarioKind, config: &DetectorConfig) -> Scenario {
        let manifest = truth::compute(kind, &self.events, config);
        Scenario {
            events: self.events,
            payload_lens: self.payload_lens,
            manifest,
        }
    }
}

/// `n` distinct ephemeral ports in random order.
fn distinct_ports(rng: &mut ChaCha8Rng, n: usize) -> Vec<u16> {
    sample(rng, EPHEMERAL_SPAN, n)
        .into_iter()
        .map(|i| EPHEMERAL_LOW + i as u16)
        .collect()
}

/// Complete connections: handshake, one data segment, and a FIN exchange
/// closed from both sides.
pub fn gen_benign(spec: &ScenarioSpec, config: &DetectorConfig) -> Result<Scenario, InvalidSpec> {
    spec.expect_kind(ScenarioKind::Benign)?;
    spec.check_gap()?;
    let server = (spec.dst()?, spec.dst_port.unwrap_or(DEFAULT_SERVICE_PORT));
    let client_ip = spec.src_ip.unwrap_or(DEFAULT_BENIGN_SRC);
    let n = spec.count as usize;
    if n > EPHEMERAL_SPAN {
        return Err(invalid(format!(
            "{n} connections exceed the {EPHEMERAL_SPAN} distinct client ports"
        )));
    }
    let mut rng = spec.rng();
    let mut out = Emitter::new(spec);
    let ack = TcpFlags::ACK;
    let fin_ack = TcpFlags::FIN | TcpFlags::ACK;
    for port in distinct_ports(&mut rng, n) {
        let client = (client_ip, port);
        out.emit(client, server, TcpFlags::SYN, 0);
        out.emit(server, client, TcpFlags::SYN | TcpFlags::ACK, 0);
        out.emit(client, server, ack, 0);
        out.emit(client, server, ack, BENIGN_DATA_LEN);
        out.emit(client, server, fin_ack, 0);
        out.emit(server, client, ack, 0);
        out.emit(server, client, fin_ack, 0);
        out.emit(client, server, ack, 0);
    }
    Ok(out.finish(ScenarioKind::Benign, config))
}

/// Pure SYNs to one service from varying source ports. Without `src_ip`,
/// each SYN also gets a random 10/8 source address.
pub fn gen_syn_flood(
    spec: &ScenarioSpec,
    config: &DetectorConfig,
) -> Result<Scenario, InvalidSpec> {
    spec.expect_kind(ScenarioKind::SynFlood)?;
    spec.check_gap()?;
    let target = (spec.dst()?, spec.dst_port.unwrap_or(DEFAULT_SERVICE_PORT));
    let n = spec.count as usize;
    if spec.src_ip.is_some() && n > EPHEMERAL_SPAN {
        return Err(invalid(format!(
            "{n} SYNs from one source exceed the {EPHEMERAL_SPAN} distinct source ports"
        )));
    }
    let mut rng = spec.rng();
    let ports = distinct_ports(&mut rng, n.min(EPHEMERAL_SPAN));
    let mut out = Emitter::new(spec);
    for i in 0..n {
        let src_ip = match spec.src_ip {
            Some(ip) => ip,
            None => Ipv4Addr::new(10, rng.gen(), rng.gen(), rng.gen_range(1..=254)),
        };
        out.emit((src_ip, ports[i % ports.len()]), target, TcpFlags::SYN, 0);
    }
    Ok(out.finish(ScenarioKind::SynFlood, config))
}

/// One SYN per listed port from a single scanner port. Open ports reply
/// SYN-ACK, the rest RST-ACK; the scanner never completes a handshake.
pub fn gen_port_scan(
    spec: &ScenarioSpec,
    config: &DetectorConfig,
) -> Result<Scenario, InvalidSpec> {
    spec.expect_kind(ScenarioKind::PortScan)?;
    spec.check_gap()?;
    let target_ip = spec.dst()?;
    let ports = spec
        .port_range
        .as_ref()
        .ok_or_else(|| invalid("port_range is required for a port scan"))?
        .ports()?;
    if ports.is_empty() {
        return Err(invalid("port_range is empty"));
    }
    let mut rng = spec.rng();
    let scanner = (
        spec.src_ip.unwrap_or(DEFAULT_SCANNER_SRC),
        rng.gen_range(32_768..=60_999),
    );

    let distinct: Vec<u16> = ports
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if spec.open_count > distinct.len() {
        return Err(invalid(format!(
            "open_count {} exceeds {} scanned ports",
            spec.open_count,
            distinct.len()
        )));
    }
    let mut open: BTreeSet<u16> = spec.open_ports.iter().copied().collect();
    for i in sample(&mut rng, distinct.len(), spec.open_count) {
        open.insert(distinct[i]);
    }

    let mut out = Emitter::new(spec);
    for port in ports {
        let target = (target_ip, port);
        out.emit(scanner, target, TcpFlags::SYN, 0);
        let reply = if open.contains(&port) {
            TcpFlags::SYN | TcpFlags::ACK
        } else {
            TcpFlags::RST | TcpFlags::ACK
        };
        out.emit(target, scanner, reply, 0);
    }
    Ok(out.finish(ScenarioKind::PortScan, config))
}

/// Interleaves sub-scenarios by timestamp. Ties keep sub-scenario order.
pub fn gen_mixed(specs: &[ScenarioSpec], config: &DetectorConfig) -> Result<Scenario, InvalidSpec> {
    let parts = specs
        .iter()
        .map(|s| generate(s, config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut merged: Vec<(FlowEvent, u16)> = parts
        .into_iter()
        .flat_map(|p| p.events.into_iter().zip(p.payload_lens))
        .collect();
    merged.sort_by_key(|(ev, _)| ev.ts);
    let (events, payload_lens): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
    let manifest = truth::compute(ScenarioKind::Mixed, &events, config);
    Ok(Scenario {
        events,
        payload_lens,
        manifest,
    })
}

pub fn generate(spec: &ScenarioSpec, config: &DetectorConfig) -> Result<Scenario, InvalidSpec> {
    match spec.kind {
        ScenarioKind::Benign => gen_benign(spec, config),
        ScenarioKind::SynFlood => gen_syn_flood(spec, config),
        ScenarioKind::PortScan => gen_port_scan(spec, config),
        ScenarioKind::Mixed => gen_mixed(&spec.scenarios, config),
    }
}
