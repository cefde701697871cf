use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowEvent;
use crate::pcf::{self, PcfConfig, PcfError, PcfKey};

pub const DEFAULT_SCAN_THRESHOLD: u32 = 4;
pub const DEFAULT_INTERVAL_SECONDS: u64 = 60;
pub const DEFAULT_HISTORY_CAPACITY: usize = 65_536;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("invalid filter configuration: {0}")]
    Filter(#[from] PcfError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynFloodConfig {
    pub threshold: i64,
    pub stages: usize,
    pub buckets: usize,
}

impl Default for SynFloodConfig {
    fn default() -> Self {
        SynFloodConfig {
            threshold: pcf::DEFAULT_THRESHOLD,
            stages: pcf::DEFAULT_STAGES,
            buckets: pcf::DEFAULT_BUCKETS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FootprintConfig {
    /// Distinct probed ports that make a (source, target) pair an alert.
    pub scan_threshold: u32,
    /// Pair estimate at which exact port tracking begins; defaults to
    /// `scan_threshold`.
    pub watch_level: Option<u32>,
    /// Recent unwatched probes kept per interval so that a pair's earlier
    /// ports are recovered when it starts being watched.
    pub history_capacity: usize,
}

impl Default for FootprintConfig {
    fn default() -> Self {
        FootprintConfig {
            scan_threshold: DEFAULT_SCAN_THRESHOLD,
            watch_level: None,
            history_capacity: DEFAULT_HISTORY_CAPACITY,
        }
    }
}

impl FootprintConfig {
    pub fn watch_level(&self) -> u32 {
        self.watch_level.unwrap_or(self.scan_threshold)
    }
}

/// Settings for both detectors. Deserializes from the CLI's JSON config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub synflood: SynFloodConfig,
    pub footprint: FootprintConfig,
    pub interval_seconds: u64,
    /// One seed per stage, shared by both filters. Defaults when absent.
    pub seeds: Option<Vec<u64>>,
    /// Let RST toward a service release a pending SYN like FIN does.
    pub rst_decrements: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            synflood: SynFloodConfig::default(),
            footprint: FootprintConfig::default(),
            interval_seconds: DEFAULT_INTERVAL_SECONDS,
            seeds: None,
            rst_decrements: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.interval_seconds == 0 {
            return Err(ConfigError::Zero("interval_seconds"));
        }
        if self.footprint.scan_threshold == 0 {
            return Err(ConfigError::Zero("footprint.scan_threshold"));
        }
        if self.footprint.watch_level() == 0 {
            return Err(ConfigError::Zero("footprint.watch_level"));
        }
        if self.footprint.history_capacity == 0 {
            return Err(ConfigError::Zero("footprint.history_capacity"));
        }
        self.synflood_filter().validate()?;
        self.footprint_filter().validate()?;
        Ok(())
    }

    fn seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| pcf::default_seeds(self.synflood.stages))
    }

    pub fn synflood_filter(&self) -> PcfConfig {
        PcfConfig {
            stages: self.synflood.stages,
            buckets: self.synflood.buckets,
            threshold: self.synflood.threshold,
            seeds: self.seeds(),
        }
    }

    pub fn footprint_filter(&self) -> PcfConfig {
        PcfConfig {
            stages: self.synflood.stages,
            buckets: self.synflood.buckets,
            threshold: self.footprint.watch_level() as i64,
            seeds: self.seeds(),
        }
    }

    pub fn interval_micros(&self) -> u64 {
        self.interval_seconds * 1_000_000
    }

    /// Same config with seeds chosen so that neither filter has a hash
    /// collision among the keys `events` can touch. `None` when no such
    /// seeds turn up (for instance, more keys than buckets).
    pub fn with_injective_seeds(&self, events: &[FlowEvent]) -> Option<DetectorConfig> {
        let mut dest = HashSet::new();
        let mut pair = HashSet::new();
        for ev in events {
            dest.insert(PcfKey::dest(ev.dip, ev.dp));
            pair.insert(PcfKey::pair(ev.sip, ev.dip));
        }
        let dest: Vec<_> = dest.into_iter().collect();
        let pair: Vec<_> = pair.into_iter().collect();
        let seeds = pcf::injective_seeds(
            self.synflood.stages,
            self.synflood.buckets,
            &[&dest, &pair],
            0,
            1_000_000,
        )?;
        Some(DetectorConfig {
            seeds: Some(seeds),
            ..self.clone()
        })
    }
}
