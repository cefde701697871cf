//! Exact, sketch-free reference accounting for generated traces.
//!
//! Mirrors the detectors' rules with plain hash maps in place of filters, so
//! its verdicts are what a collision-free detector with unlimited probe
//! history would report.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::detect::{Alert, AlertKind, DetectorConfig};
use crate::flow::{FlowClass, FlowEvent};
use crate::tcp::Timestamp;

use super::ScenarioKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthParams {
    pub synflood_threshold: i64,
    pub scan_threshold: u32,
    pub watch_level: u32,
    pub interval_seconds: u64,
    pub rst_decrements: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedAlert {
    pub kind: AlertKind,
    pub affected_ip: Ipv4Addr,
    pub affected_port: Option<u16>,
    pub source_ip: Option<Ipv4Addr>,
    pub count: u64,
    /// Position in the event sequence of the event that raised the alert.
    pub trigger_index: usize,
    pub trigger_ts: Timestamp,
    pub interval: u64,
}

impl ExpectedAlert {
    pub fn matches(&self, alert: &Alert) -> bool {
        self.kind == alert.kind
            && self.affected_ip == alert.affected_ip
            && self.affected_port == alert.affected_port
            && self.source_ip == alert.source_ip
            && self.count == alert.count
    }
}

/// Whole-trace counts for one service endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DestTally {
    pub dip: Ipv4Addr,
    pub dp: u16,
    pub syns: u64,
    pub fins: u64,
    pub net: i64,
}

/// Whole-trace counts for one (source, target) host pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTally {
    pub sip: Ipv4Addr,
    pub dip: Ipv4Addr,
    pub syns: u64,
    pub distinct_ports: u64,
    pub synacks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ScenarioKind,
    pub events: usize,
    pub params: TruthParams,
    pub expected_alerts: Vec<ExpectedAlert>,
    pub dest_tallies: Vec<DestTally>,
    pub pair_tallies: Vec<PairTally>,
}

impl Manifest {
    /// True when `alerts` are exactly the expected ones, in order.
    pub fn matches(&self, alerts: &[Alert]) -> bool {
        self.expected_alerts.len() == alerts.len()
            && self
                .expected_alerts
                .iter()
                .zip(alerts)
                .all(|(e, a)| e.matches(a))
    }
}

#[derive(Default)]
struct PairState {
    net: i64,
    watched: bool,
    ports: BTreeSet<u16>,
    alert: Option<usize>,
}

pub fn compute(kind: ScenarioKind, events: &[FlowEvent], config: &DetectorConfig) -> Manifest {
    let interval_us = config.interval_micros();
    let threshold = config.synflood.threshold;
    let scan_threshold = config.footprint.scan_threshold as usize;
    let watch = config.footprint.watch_level() as i64;

    let mut alerts: Vec<ExpectedAlert> = Vec::new();
    let mut interval: Option<u64> = None;
    let mut last: Option<Timestamp> = None;
    let mut dest: HashMap<(Ipv4Addr, u16), (i64, bool)> = HashMap::new();
    let mut pairs: HashMap<(Ipv4Addr, Ipv4Addr), PairState> = HashMap::new();

    for (i, ev) in events.iter().enumerate() {
        let eff = match last {
            Some(l) if ev.ts < l => l,
            _ => ev.ts,
        };
        last = Some(eff);
        let idx = eff.as_micros() / interval_us;
        if interval != Some(idx) {
            interval = Some(idx);
            dest.clear();
            pairs.clear();
        }

        match ev.class() {
            FlowClass::PureSyn => {
                let (count, alerted) = dest.entry((ev.dip, ev.dp)).or_default();
                *count += 1;
                if !*alerted && *count >= threshold {
                    *alerted = true;
                    alerts.push(ExpectedAlert {
                        kind: AlertKind::SynFlood,
                        affected_ip: ev.dip,
                        affected_port: Some(ev.dp),
                        source_ip: None,
                        count: *count as u64,
                        trigger_index: i,
                        trigger_ts: ev.ts,
                        interval: idx,
                    });
                }

                let pair = pairs.entry((ev.sip, ev.dip)).or_default();
                pair.net += 1;
                pair.ports.insert(ev.dp);
                if pair.net >= watch {
                    pair.watched = true;
                }
                if pair.watched {
                    match pair.alert {
                        Some(a) => alerts[a].count = pair.ports.len() as u64,
                        None if pair.ports.len() >= scan_threshold => {
                            pair.alert = Some(alerts.len());
                            alerts.push(ExpectedAlert {
                                kind: AlertKind::Footprinting,
                                affected_ip: ev.dip,
                                affected_port: None,
                                source_ip: Some(ev.sip),
                                count: pair.ports.len() as u64,
                                trigger_index: i,
                                trigger_ts: ev.ts,
                                interval: idx,
                            });
                        }
                        None => {}
                    }
                }
            }
            FlowClass::Fin => release(&mut dest, (ev.dip, ev.dp)),
            FlowClass::Rst if config.rst_decrements => release(&mut dest, (ev.dip, ev.dp)),
            FlowClass::AckOnly => {
                if let Some(p) = pairs.get_mut(&(ev.sip, ev.dip)) {
                    if p.net > 0 {
                        p.net -= 1;
                    }
                }
            }
            _ => {}
        }
    }

    Manifest {
        kind,
        events: events.len(),
        params: TruthParams {
            synflood_threshold: threshold,
            scan_threshold: config.footprint.scan_threshold,
            watch_level: config.footprint.watch_level(),
            interval_seconds: config.interval_seconds,
            rst_decrements: config.rst_decrements,
        },
        expected_alerts: alerts,
        dest_tallies: dest_tallies(events),
        pair_tallies: pair_tallies(events),
    }
}

fn release(dest: &mut HashMap<(Ipv4Addr, u16), (i64, bool)>, key: (Ipv4Addr, u16)) {
    if let Some((count, _)) = dest.get_mut(&key) {
        if *count > 0 {
            *count -= 1;
        }
    }
}

fn dest_tallies(events: &[FlowEvent]) -> Vec<DestTally> {
    let mut map: BTreeMap<(Ipv4Addr, u16), (u64, u64)> = BTreeMap::new();
    for ev in events {
        match ev.class() {
            FlowClass::PureSyn => map.entry((ev.dip, ev.dp)).or_default().0 += 1,
            FlowClass::Fin => map.entry((ev.dip, ev.dp)).or_default().1 += 1,
            _ => {}
        }
    }
    map.into_iter()
        .map(|((dip, dp), (syns, fins))| DestTally {
            dip,
            dp,
            syns,
            fins,
            net: syns as i64 - fins as i64,
        })
        .collect()
}

fn pair_tallies(events: &[FlowEvent]) -> Vec<PairTally> {
    #[derive(Default)]
    struct Acc {
        syns: u64,
        ports: BTreeSet<u16>,
        synacks: u64,
    }
    let mut map: BTreeMap<(Ipv4Addr, Ipv4Addr), Acc> = BTreeMap::new();
    for ev in events {
        match ev.class() {
            FlowClass::PureSyn => {
                let acc = map.entry((ev.sip, ev.dip)).or_default();
                acc.syns += 1;
                acc.ports.insert(ev.dp);
            }
            FlowClass::SynAck => map.entry((ev.dip, ev.sip)).or_default().synacks += 1,
            _ => {}
        }
    }
    map.into_iter()
        .map(|((sip, dip), acc)| PairTally {
            sip,
            dip,
            syns: acc.syns,
            distinct_ports: acc.ports.len() as u64,
            synacks: acc.synacks,
        })
        .collect()
}
