//! SYN-flood and port-scan detection over an ordered stream of flow events.
//!
//! Both detectors see every event. Trace time is cut into fixed intervals
//! aligned to multiples of `interval_seconds` since the epoch; when an event
//! lands in a later interval, both filters are zeroed, the scan ledger is
//! dropped, and per-interval alert suppression starts over.

mod config;
mod footprint;
mod synflood;

use std::collections::HashMap;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowEvent;
use crate::tcp::Timestamp;

pub use config::{
    ConfigError, DetectorConfig, FootprintConfig, SynFloodConfig, DEFAULT_HISTORY_CAPACITY,
    DEFAULT_INTERVAL_SECONDS, DEFAULT_SCAN_THRESHOLD,
};
pub use footprint::{FootprintDetector, FootprintUpdate, HostPair, LedgerEntry};
pub use synflood::SynFloodDetector;

/// Events may run this far behind the newest timestamp seen without being
/// reported as out of order.
pub const ORDER_TOLERANCE_MICROS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlertKind {
    #[serde(rename = "SYN_FLOOD")]
    SynFlood,
    #[serde(rename = "FOOTPRINTING")]
    Footprinting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub kind: AlertKind,
    /// The targeted host.
    pub affected_ip: Ipv4Addr,
    /// Flooded service port (SYN flood only).
    pub affected_port: Option<u16>,
    /// Scanning host (footprinting only).
    pub source_ip: Option<Ipv4Addr>,
    /// Filter estimate at trigger for floods; distinct ports probed for scans.
    pub count: u64,
    pub first_ts: Timestamp,
    pub last_ts: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("clock regression: tick at {now} precedes last event at {last}")]
pub struct ClockRegression {
    pub now: Timestamp,
    pub last: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrderViolation {
    /// Zero-based position of the late event in the input.
    pub position: u64,
    pub ts: Timestamp,
    pub behind: Timestamp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IntervalSummary {
    pub index: u64,
    pub start: Timestamp,
    pub end: Timestamp,
    pub events: u64,
    pub alerts: u64,
    pub skipped: u64,
    pub corrupt: u64,
}

#[derive(Debug, Clone)]
struct IntervalState {
    summary: IntervalSummary,
    first_event: Timestamp,
}

#[derive(Debug, Clone, Default)]
pub struct DetectionReport {
    pub alerts: Vec<Alert>,
    pub intervals: Vec<IntervalSummary>,
    pub order_violations: Vec<OrderViolation>,
}

/// Streaming driver for both detectors.
#[derive(Debug, Clone)]
pub struct Detector {
    interval_micros: u64,
    synflood: SynFloodDetector,
    footprint: FootprintDetector,
    current: Option<IntervalState>,
    last_ts: Option<Timestamp>,
    seen: u64,
    alerts: Vec<Alert>,
    open_scans: HashMap<HostPair, usize>,
    intervals: Vec<IntervalSummary>,
    order_violations: Vec<OrderViolation>,
    // input issues reported before the first interval opened
    carry_skipped: u64,
    carry_corrupt: u64,
}

impl Detector {
    pub fn new(config: &DetectorConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Detector {
            interval_micros: config.interval_micros(),
            synflood: SynFloodDetector::new(config)?,
            footprint: FootprintDetector::new(config)?,
            current: None,
            last_ts: None,
            seen: 0,
            alerts: Vec::new(),
            open_scans: HashMap::new(),
            intervals: Vec::new(),
            order_violations: Vec::new(),
            carry_skipped: 0,
            carry_corrupt: 0,
        })
    }

    pub fn synflood(&self) -> &SynFloodDetector {
        &self.synflood
    }

    pub fn footprint(&self) -> &FootprintDetector {
        &self.footprint
    }

    /// Alerts so far, in emission order. Scan alerts of the open interval
    /// keep growing as new ports are probed.
    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    pub fn intervals(&self) -> &[IntervalSummary] {
        &self.intervals
    }

    fn interval_index(&self, ts: Timestamp) -> u64 {
        ts.as_micros() / self.interval_micros
    }

    fn open_interval(&mut self, index: u64, first_event: Timestamp) {
        let start = Timestamp::from_micros(index * self.interval_micros);
        let end = Timestamp::from_micros((index + 1) * self.interval_micros);
        self.current = Some(IntervalState {
            summary: IntervalSummary {
                index,
                start,
                end,
                skipped: std::mem::take(&mut self.carry_skipped),
                corrupt: std::mem::take(&mut self.carry_corrupt),
                ..IntervalSummary::default()
            },
            first_event,
        });
    }

    fn close_interval(&mut self) -> Option<IntervalSummary> {
        let state = self.current.take()?;
        self.synflood.reset();
        self.footprint.reset();
        self.open_scans.clear();
        self.intervals.push(state.summary);
        Some(state.summary)
    }

    /// Counts capture records that never became events (non-TCP, malformed,
    /// or corrupt spool lines) against the current interval.
    pub fn note_input_issues(&mut self, skipped: u64, corrupt: u64) {
        match &mut self.current {
            Some(state) => {
                state.summary.skipped += skipped;
                state.summary.corrupt += corrupt;
            }
            None => {
                self.carry_skipped += skipped;
                self.carry_corrupt += corrupt;
            }
        }
    }

    /// Advances trace time to `now`, closing the current interval if `now`
    /// lies past its end.
    pub fn tick(&mut self, now: Timestamp) -> Result<Vec<IntervalSummary>, ClockRegression> {
        if let Some(last) = self.last_ts {
            if now < last {
                return Err(ClockRegression { now, last });
            }
        }
        let closes = self
            .current
            .as_ref()
            .is_some_and(|s| self.interval_index(now) > s.summary.index);
        if closes {
            Ok(self.close_interval().into_iter().collect())
        } else {
            Ok(Vec::new())
        }
    }

    /// Feeds one event to both detectors and returns any alerts it raised.
    pub fn ingest(&mut self, event: &FlowEvent) -> Vec<Alert> {
        let position = self.seen;
        self.seen += 1;
        let effective = match self.last_ts {
            Some(last) if event.ts < last => {
                if last.as_micros() - event.ts.as_micros() > ORDER_TOLERANCE_MICROS {
                    self.order_violations.push(OrderViolation {
                        position,
                        ts: event.ts,
                        behind: last,
                    });
                }
                last
            }
            _ => event.ts,
        };
        self.tick(effective)
            .expect("effective time never regresses");
        self.last_ts = Some(effective);

        let index = self.interval_index(effective);
        if self.current.is_none() {
            self.open_interval(index, event.ts);
        }
        let interval_start = self.current.as_ref().expect("interval open").first_event;

        let mut raised = Vec::new();
        if let Some(alert) = self.synflood.ingest(event, interval_start) {
            raised.push(alert);
        }
        match self.footprint.ingest(event) {
            Some(FootprintUpdate::Alert(alert)) => {
                let pair = (
                    alert.source_ip.expect("scan alerts carry a source"),
                    alert.affected_ip,
                );
                self.open_scans
                    .insert(pair, self.alerts.len() + raised.len());
                raised.push(alert);
            }
            Some(FootprintUpdate::Grew {
                pair,
                count,
                last_ts,
            }) => {
                if let Some(&idx) = self.open_scans.get(&pair) {
                    self.alerts[idx].count = count;
                    self.alerts[idx].last_ts = last_ts;
                }
            }
            None => {}
        }

        let state = self.current.as_mut().expect("interval open");
        state.summary.events += 1;
        state.summary.alerts += raised.len() as u64;
        self.alerts.extend(raised.iter().cloned());
        raised
    }

    /// Closes the open interval and hands back everything collected.
    pub fn finish(mut self) -> DetectionReport {
        self.close_interval();
        DetectionReport {
            alerts: self.alerts,
            intervals: self.intervals,
            order_violations: self.order_violations,
        }
    }
}

/// Runs both detectors over `events` and returns every alert in emission order.
pub fn run_detection(
    events: &[FlowEvent],
    config: &DetectorConfig,
) -> Result<Vec<Alert>, ConfigError> {
    Ok(run_detection_report(events, config)?.alerts)
}

pub fn run_detection_report(
    events: &[FlowEvent],
    config: &DetectorConfig,
) -> Result<DetectionReport, ConfigError> {
    let mut detector = Detector::new(config)?;
    for ev in events {
        detector.ingest(ev);
    }
    Ok(detector.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcp::TcpFlags;

    const BASE: u32 = 1_700_000_040; // a multiple of 60

    fn ip(s: &str) -> Ipv4Addr {
        s.parse().unwrap()
    }

    fn ev(usec: u64, sip: &str, sp: u16, dip: &str, dp: u16, flags: TcpFlags) -> FlowEvent {
        FlowEvent {
            ts: Timestamp::new(BASE, 0).add_micros(usec),
            sip: ip(sip),
            dip: ip(dip),
            sp,
            dp,
            flags,
        }
    }

    fn syns(n: u64, offset_us: u64, dip: &str, dp: u16) -> Vec<FlowEvent> {
        (0..n)
            .map(|i| {
                ev(
                    offset_us + i * 10,
                    "10.1.0.1",
                    1024 + i as u16,
                    dip,
                    dp,
                    TcpFlags::SYN,
                )
            })
            .collect()
    }

    #[test]
    fn flood_alerts_once_at_512() {
        let events = syns(600, 0, "10.0.0.5", 80);
        let mut det = Detector::new(&DetectorConfig::default()).unwrap();
        let mut at = None;
        for (i, e) in events.iter().enumerate() {
            if !det.ingest(e).is_empty() {
                assert!(at.is_none(), "second alert at {i}");
                at = Some(i);
            }
        }
        assert_eq!(at, Some(511));
        let alerts = det.finish().alerts;
        assert_eq!(alerts.len(), 1);
        let a = &alerts[0];
        assert_eq!(a.kind, AlertKind::SynFlood);
        assert_eq!(a.affected_ip, ip("10.0.0.5"));
        assert_eq!(a.affected_port, Some(80));
        assert_eq!(a.count, 512);
        assert!(a.first_ts <= a.last_ts);
    }

    #[test]
    fn flood_below_threshold_is_quiet() {
        let alerts =
            run_detection(&syns(511, 0, "10.0.0.5", 80), &DetectorConfig::default()).unwrap();
        assert!(alerts.is_empty());
    }

    #[test]
    fn completed_connections_cancel() {
        let mut events = Vec::new();
        for i in 0..600u64 {
            let sp = 1024 + i as u16;
            events.push(ev(i * 20, "10.1.0.1", sp, "10.0.0.5", 80, TcpFlags::SYN));
            events.push(ev(
                i * 20 + 10,
                "10.1.0.1",
                sp,
                "10.0.0.5",
                80,
                TcpFlags::FIN | TcpFlags::ACK,
            ));
        }
        assert!(run_detection(&events, &DetectorConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn server_fin_does_not_double_release() {
        let cfg = DetectorConfig::default();
        let mut det = Detector::new(&cfg).unwrap();
        // one pending SYN from another client
        det.ingest(&ev(0, "10.1.0.9", 5000, "10.0.0.5", 80, TcpFlags::SYN));
        // a complete connection closed by both sides
        det.ingest(&ev(10, "10.1.0.1", 4000, "10.0.0.5", 80, TcpFlags::SYN));
        det.ingest(&ev(
            20,
            "10.1.0.1",
            4000,
            "10.0.0.5",
            80,
            TcpFlags::FIN | TcpFlags::ACK,
        ));
        det.ingest(&ev(
            30,
            "10.0.0.5",
            80,
            "10.1.0.1",
            4000,
            TcpFlags::FIN | TcpFlags::ACK,
        ));
        assert_eq!(det.synflood().estimate(ip("10.0.0.5"), 80), 1);
    }

    #[test]
    fn rst_release_is_opt_in() {
        let events = [
            ev(0, "10.1.0.1", 4000, "10.0.0.5", 80, TcpFlags::SYN),
            ev(10, "10.1.0.1", 4000, "10.0.0.5", 80, TcpFlags::RST),
        ];
        let mut det = Detector::new(&DetectorConfig::default()).unwrap();
        events.iter().for_each(|e| {
            det.ingest(e);
        });
        assert_eq!(det.synflood().estimate(ip("10.0.0.5"), 80), 1);

        let cfg = DetectorConfig {
            rst_decrements: true,
            ..DetectorConfig::default()
        };
        let mut det = Detector::new(&cfg).unwrap();
        events.iter().for_each(|e| {
            det.ingest(e);
        });
        assert_eq!(det.synflood().estimate(ip("10.0.0.5"), 80), 0);
    }

    fn scan(ports: &[u16], offset_us: u64) -> Vec<FlowEvent> {
        ports
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                ev(
                    offset_us + i as u64 * 100,
                    "192.168.1.50",
                    40000,
                    "192.168.1.100",
                    p,
                    TcpFlags::SYN,
                )
            })
            .collect()
    }

    #[test]
    fn four_port_scan_reports_four() {
        let alerts =
            run_detection(&scan(&[21, 22, 23, 80], 0), &DetectorConfig::default()).unwrap();
        assert_eq!(alerts.len(), 1);
        let a = &alerts[0];
        assert_eq!(a.kind, AlertKind::Footprinting);
        assert_eq!(a.affected_ip, ip("192.168.1.100"));
        assert_eq!(a.source_ip, Some(ip("192.168.1.50")));
        assert_eq!(a.count, 4);
    }

    #[test]
    fn three_ports_is_below_threshold() {
        assert!(
            run_detection(&scan(&[80, 81, 82], 0), &DetectorConfig::default())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn repeated_port_is_not_a_scan() {
        let events = scan(&[80; 50], 0);
        assert!(run_detection(&events, &DetectorConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn scan_count_keeps_growing_after_alert() {
        let ports: Vec<u16> = (1..=100).collect();
        let alerts = run_detection(&scan(&ports, 0), &DetectorConfig::default()).unwrap();
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].count, 100);
    }

    #[test]
    fn higher_watch_level_still_counts_earlier_ports() {
        let cfg = DetectorConfig {
            footprint: FootprintConfig {
                watch_level: Some(10),
                ..FootprintConfig::default()
            },
            ..DetectorConfig::default()
        };
        let ports: Vec<u16> = (1..=12).collect();
        let alerts = run_detection(&scan(&ports, 0), &cfg).unwrap();
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].count, 12);
    }

    #[test]
    fn completed_handshakes_do_not_activate_pair() {
        let mut events = Vec::new();
        for (i, port) in [80u16, 443, 8080, 8443, 22].into_iter().enumerate() {
            let t = i as u64 * 100;
            events.push(ev(
                t,
                "192.168.1.10",
                5000 + i as u16,
                "192.168.1.100",
                port,
                TcpFlags::SYN,
            ));
            events.push(ev(
                t + 10,
                "192.168.1.100",
                port,
                "192.168.1.10",
                5000 + i as u16,
                TcpFlags::SYN | TcpFlags::ACK,
            ));
            events.push(ev(
                t + 20,
                "192.168.1.10",
                5000 + i as u16,
                "192.168.1.100",
                port,
                TcpFlags::ACK,
            ));
        }
        assert!(run_detection(&events, &DetectorConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn synacks_are_counted_for_watched_pairs() {
        let mut events = Vec::new();
        for (i, port) in [21u16, 22, 23, 80].into_iter().enumerate() {
            let t = i as u64 * 100;
            events.push(ev(
                t,
                "192.168.1.50",
                40000,
                "192.168.1.100",
                port,
                TcpFlags::SYN,
            ));
            let reply = if port == 22 || port == 80 {
                TcpFlags::SYN | TcpFlags::ACK
            } else {
                TcpFlags::RST | TcpFlags::ACK
            };
            events.push(ev(
                t + 10,
                "192.168.1.100",
                port,
                "192.168.1.50",
                40000,
                reply,
            ));
        }
        let mut det = Detector::new(&DetectorConfig::default()).unwrap();
        events.iter().for_each(|e| {
            det.ingest(e);
        });
        let entry = &det.footprint().ledger()[&(ip("192.168.1.50"), ip("192.168.1.100"))];
        assert_eq!(entry.synacks, 2);
        assert_eq!(entry.ports.len(), 4);
    }

    #[test]
    fn intervals_reset_counters() {
        let mut events = syns(511, 0, "10.0.0.5", 80);
        events.extend(syns(511, 60_000_000, "10.0.0.5", 80));
        let report = run_detection_report(&events, &DetectorConfig::default()).unwrap();
        assert!(report.alerts.is_empty());
        assert_eq!(report.intervals.len(), 2);
        assert_eq!(report.intervals[0].events, 511);
    }

    #[test]
    fn alert_repeats_in_next_interval() {
        let mut events = syns(512, 0, "10.0.0.5", 80);
        events.extend(syns(512, 60_000_000, "10.0.0.5", 80));
        let alerts = run_detection(&events, &DetectorConfig::default()).unwrap();
        assert_eq!(alerts.len(), 2);
    }

    #[test]
    fn tick_without_events_is_empty() {
        let mut det = Detector::new(&DetectorConfig::default()).unwrap();
        assert!(det.tick(Timestamp::new(BASE, 0)).unwrap().is_empty());
    }

    #[test]
    fn tick_closes_interval_and_rejects_regression() {
        let mut det = Detector::new(&DetectorConfig::default()).unwrap();
        for e in syns(3, 0, "10.0.0.5", 80) {
            det.ingest(&e);
        }
        det.note_input_issues(2, 1);
        assert!(det.tick(Timestamp::new(BASE - 5, 0)).is_err());
        assert!(det.tick(Timestamp::new(BASE + 30, 0)).unwrap().is_empty());
        let closed = det.tick(Timestamp::new(BASE + 60, 0)).unwrap();
        assert_eq!(closed.len(), 1);
        assert_eq!(closed[0].events, 3);
        assert_eq!((closed[0].skipped, closed[0].corrupt), (2, 1));
        assert_eq!(det.synflood().estimate(ip("10.0.0.5"), 80), 0);
    }

    #[test]
    fn small_jitter_is_tolerated_large_is_reported() {
        let events = [
            ev(2_000_000, "10.1.0.1", 1, "10.0.0.5", 80, TcpFlags::SYN),
            ev(1_500_000, "10.1.0.1", 2, "10.0.0.5", 80, TcpFlags::SYN),
            ev(0, "10.1.0.1", 3, "10.0.0.5", 80, TcpFlags::SYN),
        ];
        let report = run_detection_report(&events, &DetectorConfig::default()).unwrap();
        assert_eq!(report.order_violations.len(), 1);
        assert_eq!(report.order_violations[0].position, 2);
        assert_eq!(report.intervals[0].events, 3);
    }

    #[test]
    fn empty_input_no_alerts() {
        let report = run_detection_report(&[], &DetectorConfig::default()).unwrap();
        assert!(report.alerts.is_empty());
        assert!(report.intervals.is_empty());
    }
}
