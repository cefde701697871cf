use std::collections::{BTreeSet, HashMap, VecDeque};
use std::net::Ipv4Addr;

use serde::Serialize;

use crate::flow::{FlowClass, FlowEvent};
use crate::pcf::{Delta, Pcf, PcfError, PcfKey};
use crate::tcp::Timestamp;

use super::{Alert, AlertKind, DetectorConfig};

/// (probing source, probed target)
pub type HostPair = (Ipv4Addr, Ipv4Addr);

/// Exact per-pair accounting, kept only for pairs the filter flagged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LedgerEntry {
    pub ports: BTreeSet<u16>,
    /// SYN-ACKs seen coming back from the target (open ports).
    pub synacks: u64,
    pub first_ts: Timestamp,
    /// Time the most recent new port was probed.
    pub last_ts: Timestamp,
    pub alerted: bool,
}

#[derive(Debug, Clone, Copy)]
enum ProbeKind {
    Syn(u16),
    SynAck,
}

#[derive(Debug, Clone, Copy)]
struct Probe {
    pair: HostPair,
    ts: Timestamp,
    kind: ProbeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FootprintUpdate {
    /// First time the pair crossed the scan threshold this interval.
    Alert(Alert),
    /// An already-alerted pair probed another new port.
    Grew {
        pair: HostPair,
        count: u64,
        last_ts: Timestamp,
    },
}

/// Port-scan detector.
///
/// A filter keyed by host pair counts handshakes a source opened toward a
/// target but never completed with a bare ACK. When a pair's estimate reaches
/// the watch level the pair gets an exact ledger entry, seeded from a bounded
/// log of recent probes, and from then on every probed port is recorded.
#[derive(Debug, Clone)]
pub struct FootprintDetector {
    pcf: Pcf,
    scan_threshold: usize,
    ledger: HashMap<HostPair, LedgerEntry>,
    history: VecDeque<Probe>,
    history_capacity: usize,
}

impl FootprintDetector {
    pub fn new(config: &DetectorConfig) -> Result<Self, PcfError> {
        Ok(FootprintDetector {
            pcf: Pcf::new(config.footprint_filter())?,
            scan_threshold: config.footprint.scan_threshold as usize,
            ledger: HashMap::new(),
            history: VecDeque::new(),
            history_capacity: config.footprint.history_capacity,
        })
    }

    pub fn ledger(&self) -> &HashMap<HostPair, LedgerEntry> {
        &self.ledger
    }

    pub fn estimate(&self, sip: Ipv4Addr, dip: Ipv4Addr) -> i64 {
        self.pcf.estimate(&PcfKey::pair(sip, dip))
    }

    fn remember(&mut self, probe: Probe) {
        if self.history.len() == self.history_capacity {
            self.history.pop_front();
        }
        self.history.push_back(probe);
    }

    fn activate(&mut self, pair: HostPair, now: Timestamp) {
        let mut entry = LedgerEntry {
            first_ts: now,
            last_ts: now,
            ..LedgerEntry::default()
        };
        for p in self.history.iter().filter(|p| p.pair == pair) {
            match p.kind {
                ProbeKind::Syn(port) => {
                    entry.first_ts = entry.first_ts.min(p.ts);
                    if entry.ports.insert(port) {
                        entry.last_ts = p.ts;
                    }
                }
                ProbeKind::SynAck => entry.synacks += 1,
            }
        }
        self.history.retain(|p| p.pair != pair);
        self.ledger.insert(pair, entry);
    }

    pub fn ingest(&mut self, event: &FlowEvent) -> Option<FootprintUpdate> {
        match event.class() {
            FlowClass::PureSyn => self.on_syn(event),
            FlowClass::SynAck => {
                // response travels target -> source
                let pair = (event.dip, event.sip);
                match self.ledger.get_mut(&pair) {
                    Some(entry) => entry.synacks += 1,
                    None => self.remember(Probe {
                        pair,
                        ts: event.ts,
                        kind: ProbeKind::SynAck,
                    }),
                }
                None
            }
            FlowClass::AckOnly => {
                let key = PcfKey::pair(event.sip, event.dip);
                if self.pcf.estimate(&key) > 0 {
                    self.pcf.update(&key, Delta::Decrement);
                }
                None
            }
            _ => None,
        }
    }

    fn on_syn(&mut self, event: &FlowEvent) -> Option<FootprintUpdate> {
        let pair = (event.sip, event.dip);
        let key = PcfKey::pair(event.sip, event.dip);
        self.pcf.update(&key, Delta::Increment);

        if !self.ledger.contains_key(&pair) {
            if !self.pcf.exceeds(&key) {
                self.remember(Probe {
                    pair,
                    ts: event.ts,
                    kind: ProbeKind::Syn(event.dp),
                });
                return None;
            }
            self.activate(pair, event.ts);
        }
        let threshold = self.scan_threshold;
        let entry = self.ledger.get_mut(&pair).expect("pair is watched");

        let grew = entry.ports.insert(event.dp);
        if grew {
            entry.last_ts = event.ts;
        }
        let count = entry.ports.len() as u64;
        if !entry.alerted && entry.ports.len() >= threshold {
            entry.alerted = true;
            Some(FootprintUpdate::Alert(Alert {
                kind: AlertKind::Footprinting,
                affected_ip: event.dip,
                affected_port: None,
                source_ip: Some(event.sip),
                count,
                first_ts: entry.first_ts,
                last_ts: entry.last_ts,
            }))
        } else if entry.alerted && grew {
            Some(FootprintUpdate::Grew {
                pair,
                count,
                last_ts: event.ts,
            })
        } else {
            None
        }
    }

    pub fn reset(&mut self) {
        self.pcf.reset();
        self.ledger.clear();
        self.history.clear();
    }
}
