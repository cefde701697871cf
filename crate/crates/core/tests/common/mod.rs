#![allow(dead_code)]

//! Brute-force reference models and trace builders shared by the
//! integration tests and the acceptance suite.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::net::Ipv4Addr;

use pcfwatch::{Alert, AlertKind, DetectorConfig, FlowEvent, TcpFlags, Timestamp};

/// The comparable part of an alert.
pub type AlertTuple = (AlertKind, Ipv4Addr, Option<u16>, Option<Ipv4Addr>, u64);

pub fn tuple(a: &Alert) -> AlertTuple {
    (a.kind, a.affected_ip, a.affected_port, a.source_ip, a.count)
}

pub fn tuples(alerts: &[Alert]) -> Vec<AlertTuple> {
    alerts.iter().map(tuple).collect()
}

fn is_pure_syn(f: TcpFlags) -> bool {
    f.contains(TcpFlags::SYN) && !f.contains(TcpFlags::ACK)
}

fn is_fin(f: TcpFlags) -> bool {
    !f.contains(TcpFlags::SYN) && f.contains(TcpFlags::FIN)
}

fn is_rst(f: TcpFlags) -> bool {
    !f.contains(TcpFlags::SYN) && !f.contains(TcpFlags::FIN) && f.contains(TcpFlags::RST)
}

fn is_bare_ack(f: TcpFlags) -> bool {
    f == TcpFlags::ACK
}

/// Splits a trace into runs sharing an interval index, where time never
/// runs backwards (a late event counts as happening at the latest time seen).
pub fn split_intervals(events: &[FlowEvent], interval_us: u64) -> Vec<&[FlowEvent]> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut clock = 0u64;
    let mut current = None;
    for (i, ev) in events.iter().enumerate() {
        clock = clock.max(ev.ts.as_micros());
        let idx = clock / interval_us;
        if current.is_some_and(|c| c != idx) {
            out.push(&events[start..i]);
            start = i;
        }
        current = Some(idx);
    }
    if start < events.len() {
        out.push(&events[start..]);
    }
    out
}

/// Exact-count model of both detectors.
pub fn oracle(events: &[FlowEvent], cfg: &DetectorConfig) -> Vec<AlertTuple> {
    let watch = cfg.footprint.watch_level() as i64;
    let mut all = Vec::new();
    for run in split_intervals(events, cfg.interval_micros()) {
        let mut pending: HashMap<(Ipv4Addr, u16), i64> = HashMap::new();
        let mut flooded: HashSet<(Ipv4Addr, u16)> = HashSet::new();
        let mut net: HashMap<(Ipv4Addr, Ipv4Addr), i64> = HashMap::new();
        let mut ports: HashMap<(Ipv4Addr, Ipv4Addr), BTreeSet<u16>> = HashMap::new();
        let mut watched: HashSet<(Ipv4Addr, Ipv4Addr)> = HashSet::new();
        let mut scan_alert: HashMap<(Ipv4Addr, Ipv4Addr), usize> = HashMap::new();
        let mut found: Vec<AlertTuple> = Vec::new();

        for ev in run {
            let dest = (ev.dip, ev.dp);
            let pair = (ev.sip, ev.dip);
            if is_pure_syn(ev.flags) {
                let p = pending.entry(dest).or_insert(0);
                *p += 1;
                if *p >= cfg.synflood.threshold && flooded.insert(dest) {
                    found.push((AlertKind::SynFlood, ev.dip, Some(ev.dp), None, *p as u64));
                }
                let n = net.entry(pair).or_insert(0);
                *n += 1;
                ports.entry(pair).or_default().insert(ev.dp);
                if *n >= watch {
                    watched.insert(pair);
                }
                let seen = ports[&pair].len();
                if watched.contains(&pair)
                    && !scan_alert.contains_key(&pair)
                    && seen >= cfg.footprint.scan_threshold as usize
                {
                    scan_alert.insert(pair, found.len());
                    found.push((AlertKind::Footprinting, ev.dip, None, Some(ev.sip), 0));
                }
            } else if is_fin(ev.flags) || (cfg.rst_decrements && is_rst(ev.flags)) {
                if let Some(p) = pending.get_mut(&dest) {
                    *p = (*p - 1).max(0);
                }
            } else if is_bare_ack(ev.flags) {
                if let Some(n) = net.get_mut(&pair) {
                    *n = (*n - 1).max(0);
                }
            }
        }
        for (pair, idx) in scan_alert {
            found[idx].4 = ports[&pair].len() as u64;
        }
        all.extend(found);
    }
    all
}

pub fn ip(s: &str) -> Ipv4Addr {
    s.parse().unwrap()
}

pub const BASE_SEC: u32 = 1_700_000_040;

pub fn event(
    t_us: u64,
    sip: Ipv4Addr,
    sp: u16,
    dip: Ipv4Addr,
    dp: u16,
    flags: TcpFlags,
) -> FlowEvent {
    FlowEvent {
        ts: Timestamp::new(BASE_SEC, 0).add_micros(t_us),
        sip,
        dip,
        sp,
        dp,
        flags,
    }
}

pub const FLAG_CHOICES: [TcpFlags; 6] = [
    TcpFlags::SYN,
    TcpFlags::SYN.union(TcpFlags::ACK),
    TcpFlags::FIN.union(TcpFlags::ACK),
    TcpFlags::ACK,
    TcpFlags::RST.union(TcpFlags::ACK),
    TcpFlags::RST,
];

/// Builds a trace from compact draws: host indices, port index, flag index,
/// and the gap before the event.
pub fn build_trace(draws: &[(u8, u8, u8, u8, u64)]) -> Vec<FlowEvent> {
    let mut t = 0u64;
    draws
        .iter()
        .map(|&(s, d, p, f, gap)| {
            t += gap;
            event(
                t,
                Ipv4Addr::new(172, 16, 0, s),
                40_000 + s as u16,
                Ipv4Addr::new(10, 9, 0, d),
                1 + p as u16,
                FLAG_CHOICES[f as usize % FLAG_CHOICES.len()],
            )
        })
        .collect()
}
