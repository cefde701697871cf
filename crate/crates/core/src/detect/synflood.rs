use std::collections::HashSet;
use std::net::Ipv4Addr;

use crate::flow::{FlowClass, FlowEvent};
use crate::pcf::{Delta, Pcf, PcfError, PcfKey};
use crate::tcp::Timestamp;

use super::{Alert, AlertKind, DetectorConfig};

/// Counts half-open connections per service endpoint.
///
/// A pure SYN to `(dip, dp)` raises that endpoint's counter; a FIN sent
/// toward the endpoint lowers it. Only the client-to-service FIN counts, so a
/// completed connection nets exactly zero whichever side closes first.
#[derive(Debug, Clone)]
pub struct SynFloodDetector {
    pcf: Pcf,
    alerted: HashSet<PcfKey>,
    rst_decrements: bool,
}

impl SynFloodDetector {
    pub fn new(config: &DetectorConfig) -> Result<Self, PcfError> {
        Ok(SynFloodDetector {
            pcf: Pcf::new(config.synflood_filter())?,
            alerted: HashSet::new(),
            rst_decrements: config.rst_decrements,
        })
    }

    pub fn estimate(&self, dip: Ipv4Addr, dp: u16) -> i64 {
        self.pcf.estimate(&PcfKey::dest(dip, dp))
    }

    pub fn filter(&self) -> &Pcf {
        &self.pcf
    }

    // Closing packets aimed at endpoints with nothing pending (the server's
    // own FIN toward a client port, stray RSTs) would only drag unrelated
    // buckets negative.
    fn release(&mut self, key: PcfKey) {
        if self.pcf.estimate(&key) > 0 {
            self.pcf.update(&key, Delta::Decrement);
        }
    }

    /// Applies one event. `interval_start` is the first event time of the
    /// current interval and serves as the alert's lower time bound.
    pub fn ingest(&mut self, event: &FlowEvent, interval_start: Timestamp) -> Option<Alert> {
        let key = PcfKey::dest(event.dip, event.dp);
        match event.class() {
            FlowClass::PureSyn => {
                self.pcf.update(&key, Delta::Increment);
                if self.alerted.contains(&key) || !self.pcf.exceeds(&key) {
                    return None;
                }
                self.alerted.insert(key);
                Some(Alert {
                    kind: AlertKind::SynFlood,
                    affected_ip: event.dip,
                    affected_port: Some(event.dp),
                    source_ip: None,
                    count: self.pcf.estimate(&key) as u64,
                    first_ts: interval_start.min(event.ts),
                    last_ts: event.ts,
                })
            }
            FlowClass::Fin => {
                self.release(key);
                None
            }
            FlowClass::Rst if self.rst_decrements => {
                self.release(key);
                None
            }
            _ => None,
        }
    }

    pub fn reset(&mut self) {
        self.pcf.reset();
        self.alerted.clear();
    }
}
