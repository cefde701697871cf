//! Flow events: the source/destination address-and-port tuple plus TCP flags,
//! which is all the detectors consume.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::pcap_io::PacketRecord;
use crate::tcp::{TcpFlags, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowEvent {
    pub ts: Timestamp,
    pub sip: Ipv4Addr,
    pub dip: Ipv4Addr,
    pub sp: u16,
    pub dp: u16,
    pub flags: TcpFlags,
}

/// How an event participates in handshake accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlowClass {
    PureSyn,
    SynAck,
    Fin,
    Rst,
    AckOnly,
    Other,
}

/// Copies the tuple and flags verbatim; direction is left as captured.
pub fn extract(record: &PacketRecord) -> FlowEvent {
    FlowEvent {
        ts: record.ts,
        sip: record.src_ip,
        dip: record.dst_ip,
        sp: record.src_port,
        dp: record.dst_port,
        flags: record.flags,
    }
}

/// Rules are checked in order: SYN without ACK, SYN with ACK, any FIN, RST,
/// bare ACK. FIN outranks RST and ACK because FIN drives the decrement.
pub fn classify(event: &FlowEvent) -> FlowClass {
    classify_flags(event.flags)
}

pub fn classify_flags(flags: TcpFlags) -> FlowClass {
    let syn = flags.contains(TcpFlags::SYN);
    let ack = flags.contains(TcpFlags::ACK);
    if syn && !ack {
        FlowClass::PureSyn
    } else if syn {
        FlowClass::SynAck
    } else if flags.contains(TcpFlags::FIN) {
        FlowClass::Fin
    } else if flags.contains(TcpFlags::RST) {
        FlowClass::Rst
    } else if flags == TcpFlags::ACK {
        FlowClass::AckOnly
    } else {
        FlowClass::Other
    }
}

impl FlowEvent {
    pub fn class(&self) -> FlowClass {
        classify(self)
    }

    /// Packet record carrying this event, for writing back to a capture.
    pub fn to_record(&self, payload_len: u16) -> PacketRecord {
        PacketRecord {
            ts: self.ts,
            src_ip: self.sip,
            dst_ip: self.dip,
            src_port: self.sp,
            dst_port: self.dp,
            flags: self.flags,
            payload_len,
        }
    }
}

// Flat on-disk shape used by the spool: one JSON object per event.
#[derive(Serialize, Deserialize)]
struct EventRepr {
    ts_sec: u32,
    ts_usec: u32,
    sip: Ipv4Addr,
    dip: Ipv4Addr,
    sp: u16,
    dp: u16,
    flags: TcpFlags,
}

impl Serialize for FlowEvent {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        EventRepr {
            ts_sec: self.ts.sec,
            ts_usec: self.ts.usec,
            sip: self.sip,
            dip: self.dip,
            sp: self.sp,
            dp: self.dp,
            flags: self.flags,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FlowEvent {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = EventRepr::deserialize(deserializer)?;
        if r.ts_usec >= 1_000_000 {
            return Err(serde::de::Error::custom(format!(
                "ts_usec {} out of range",
                r.ts_usec
            )));
        }
        Ok(FlowEvent {
            ts: Timestamp {
                sec: r.ts_sec,
                usec: r.ts_usec,
            },
            sip: r.sip,
            dip: r.dip,
            sp: r.sp,
            dp: r.dp,
            flags: r.flags,
        })
    }
}
