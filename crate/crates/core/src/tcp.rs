//! Small value types shared by every stage: capture timestamps and TCP flag sets.

use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

const MICROS_PER_SEC: u64 = 1_000_000;

/// Capture timestamp with microsecond resolution, ordered chronologically.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Timestamp {
    pub sec: u32,
    pub usec: u32,
}

impl Timestamp {
    /// Builds a timestamp, carrying any whole seconds out of `usec`.
    pub fn new(sec: u32, usec: u32) -> Self {
        let carry = usec / MICROS_PER_SEC as u32;
        Timestamp {
            sec: sec.saturating_add(carry),
            usec: usec % MICROS_PER_SEC as u32,
        }
    }

    pub fn from_micros(micros: u64) -> Self {
        let sec = (micros / MICROS_PER_SEC).min(u32::MAX as u64) as u32;
        Timestamp {
            sec,
            usec: (micros % MICROS_PER_SEC) as u32,
        }
    }

    pub fn as_micros(self) -> u64 {
        self.sec as u64 * MICROS_PER_SEC + self.usec as u64
    }

    pub fn add_micros(self, micros: u64) -> Self {
        Self::from_micros(self.as_micros() + micros)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.sec, self.usec)
    }
}

/// A set over the four TCP control flags the detectors look at.
///
/// Bit positions match the TCP flags octet, so `bits()` can be written
/// straight into a header. Any other bits (PSH, URG, ECE, CWR) are dropped.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TcpFlags(u8);

impl TcpFlags {
    pub const FIN: TcpFlags = TcpFlags(0x01);
    pub const SYN: TcpFlags = TcpFlags(0x02);
    pub const RST: TcpFlags = TcpFlags(0x04);
    pub const ACK: TcpFlags = TcpFlags(0x10);

    const MASK: u8 = 0x01 | 0x02 | 0x04 | 0x10;
    const NAMES: [(TcpFlags, &'static str); 4] = [
        (TcpFlags::SYN, "SYN"),
        (TcpFlags::ACK, "ACK"),
        (TcpFlags::FIN, "FIN"),
        (TcpFlags::RST, "RST"),
    ];

    pub const fn empty() -> Self {
        TcpFlags(0)
    }

    /// Keeps only the FIN, SYN, RST and ACK bits of a raw flags octet.
    pub const fn from_octet(octet: u8) -> Self {
        TcpFlags(octet & Self::MASK)
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub const fn contains(self, other: TcpFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub const fn union(self, other: TcpFlags) -> Self {
        TcpFlags(self.0 | other.0)
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::NAMES
            .iter()
            .find(|(_, n)| *n == name)
            .map(|(f, _)| *f)
    }

    /// Flag names in a fixed order (SYN, ACK, FIN, RST).
    pub fn names(self) -> impl Iterator<Item = &'static str> {
        Self::NAMES
            .into_iter()
            .filter(move |(f, _)| self.contains(*f))
            .map(|(_, n)| n)
    }
}

impl std::ops::BitOr for TcpFlags {
    type Output = TcpFlags;

    fn bitor(self, rhs: TcpFlags) -> TcpFlags {
        self.union(rhs)
    }
}

impl fmt::Debug for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().collect::<Vec<_>>().join(", "))
    }
}

impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().collect::<Vec<_>>().join("|"))
    }
}

impl Serialize for TcpFlags {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(None)?;
        for name in self.names() {
            seq.serialize_element(name)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for TcpFlags {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FlagsVisitor;

        impl<'de> Visitor<'de> for FlagsVisitor {
            type Value = TcpFlags;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array of flag names (SYN, ACK, FIN, RST)")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<TcpFlags, A::Error> {
                let mut flags = TcpFlags::empty();
                while let Some(name) = seq.next_element::<String>()? {
                    let flag = TcpFlags::from_name(&name)
                        .ok_or_else(|| de::Error::custom(format!("unknown TCP flag {name:?}")))?;
                    flags = flags | flag;
                }
                Ok(flags)
            }
        }

        deserializer.deserialize_seq(FlagsVisitor)
    }
}
