//! Data-parallel batch helpers.
//!
//! Per-event detection is sequential by contract, so parallelism lives at
//! batch boundaries: frame decoding, event extraction, and running the
//! detector over many independent traces. With the `parallel` feature these
//! use rayon; without it, or with [`Execution::Sequential`], they run on the
//! calling thread. Output order always matches input order.

use crate::detect::{self, Alert, ConfigError, DetectorConfig};
use crate::flow::{self, FlowEvent};
use crate::pcap_io::{self, Frame, MalformedFrame, PacketRecord, RawFrame};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Order-preserving map over a slice.
pub fn map<T, U, F>(items: &[T], exec: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

pub fn decode_frames(frames: &[RawFrame], exec: Execution) -> Vec<Result<Frame, MalformedFrame>> {
    map(frames, exec, |raw| pcap_io::decode_frame(&raw.data, raw.ts))
}

pub fn extract_all(records: &[PacketRecord], exec: Execution) -> Vec<FlowEvent> {
    map(records, exec, flow::extract)
}

/// Runs detection over independent traces, one detector per trace.
pub fn run_batch(
    traces: &[Vec<FlowEvent>],
    config: &DetectorConfig,
    exec: Execution,
) -> Result<Vec<Vec<Alert>>, ConfigError> {
    config.validate()?;
    map(traces, exec, |events| detect::run_detection(events, config))
        .into_iter()
        .collect()
}
