//! SYN-flood and port-scan (footprinting) detection over TCP packet captures.
//!
//! The pipeline reads classic pcap files ([`pcap_io`]), reduces each TCP
//! packet to a [`flow::FlowEvent`], optionally parks events in a file spool
//! ([`spool`]), and feeds them to two detectors ([`detect`]) built on partial
//! completion filters ([`pcf`]). [`gen`] fabricates labeled attack and benign
//! traffic, and [`report`] drives the whole thing and renders alert logs.

pub mod batch;
pub mod detect;
pub mod flow;
pub mod gen;
pub mod pcap_io;
pub mod pcf;
pub mod report;
pub mod spool;
pub mod tcp;

pub use detect::{run_detection, Alert, AlertKind, Detector, DetectorConfig};
pub use flow::{classify, extract, FlowClass, FlowEvent};
pub use pcap_io::{decode_frame, read_pcap, write_pcap, PacketRecord, PcapError};
pub use pcf::{Pcf, PcfConfig, PcfKey};
pub use tcp::{TcpFlags, Timestamp};
