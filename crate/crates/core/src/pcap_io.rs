//! Classic libpcap capture files: reading, writing, and Ethernet/IPv4/TCP frame decoding.
//!
//! Only the microsecond-resolution format is handled (magic `0xa1b2c3d4`, either
//! byte order). pcapng and nanosecond captures are rejected with
//! [`PcapError::BadMagic`]. Frames that are not IPv4 carrying TCP are skipped
//! and counted, never treated as errors.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::{self, Execution};
use crate::tcp::{TcpFlags, Timestamp};

pub const PCAP_MAGIC: u32 = 0xa1b2_c3d4;
pub const PCAP_MAGIC_SWAPPED: u32 = 0xd4c3_b2a1;
pub const LINKTYPE_ETHERNET: u32 = 1;
pub const SNAPLEN: u32 = 65_535;

pub const GLOBAL_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;

const ETH_HEADER_LEN: usize = 14;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_VLAN: u16 = 0x8100;
const IPV4_MIN_HEADER: usize = 20;
const TCP_MIN_HEADER: usize = 20;
const IPPROTO_TCP: u8 = 6;

/// Largest payload a single IPv4 packet with minimal headers can carry.
pub const MAX_PAYLOAD_LEN: u16 = (u16::MAX as usize - IPV4_MIN_HEADER - TCP_MIN_HEADER) as u16;

// Refuse to allocate for absurd record lengths in corrupt files.
const MAX_RECORD_LEN: u32 = 256 * 1024;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("bad magic 0x{0:08x}: not a classic pcap file")]
    BadMagic(u32),
    #[error("truncated capture at byte {offset}: needed {needed} bytes, {available} remain")]
    Truncated {
        offset: u64,
        needed: usize,
        available: usize,
    },
    #[error("unsupported link type {0} (only Ethernet is handled)")]
    UnsupportedLinkType(u32),
    #[error("record at byte {offset} declares {len} captured bytes")]
    OversizedRecord { offset: u64, len: u32 },
    #[error("record cannot be encoded: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A frame was shorter than the headers it declares.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed frame: {layer} header needs {needed} bytes, frame has {len}")]
pub struct MalformedFrame {
    pub layer: &'static str,
    pub needed: usize,
    pub len: usize,
}

/// One decoded Ethernet/IPv4/TCP packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketRecord {
    pub ts: Timestamp,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub flags: TcpFlags,
    pub payload_len: u16,
}

/// Outcome of decoding a frame that was long enough to inspect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Tcp(PacketRecord),
    Skip,
}

/// Raw captured bytes with their record timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub ts: Timestamp,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CaptureStats {
    /// Records read from the file.
    pub packets: u64,
    /// Records decoded as IPv4/TCP.
    pub tcp: u64,
    /// Non-IPv4, non-TCP, or non-first-fragment records.
    pub skipped: u64,
    /// Records whose headers were cut short.
    pub malformed: u64,
}

impl CaptureStats {
    fn tally(&mut self, frame: &Result<Frame, MalformedFrame>) {
        self.packets += 1;
        match frame {
            Ok(Frame::Tcp(_)) => self.tcp += 1,
            Ok(Frame::Skip) => self.skipped += 1,
            Err(_) => self.malformed += 1,
        }
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn need(layer: &'static str, bytes: &[u8], needed: usize) -> Result<(), MalformedFrame> {
    if bytes.len() < needed {
        Err(MalformedFrame {
            layer,
            needed,
            len: bytes.len(),
        })
    } else {
        Ok(())
    }
}

/// Decodes one Ethernet frame into a [`PacketRecord`] when it carries IPv4/TCP.
///
/// Never reads past `bytes.len()`. A single 802.1Q tag is stepped over.
pub fn decode_frame(bytes: &[u8], ts: Timestamp) -> Result<Frame, MalformedFrame> {
    need("ethernet", bytes, ETH_HEADER_LEN)?;
    let mut ip_off = ETH_HEADER_LEN;
    let mut ethertype = be16(bytes, 12);
    if ethertype == ETHERTYPE_VLAN {
        need("vlan", bytes, ETH_HEADER_LEN + 4)?;
        ethertype = be16(bytes, 16);
        ip_off += 4;
    }
    if ethertype != ETHERTYPE_IPV4 {
        return Ok(Frame::Skip);
    }

    need("ipv4", bytes, ip_off + IPV4_MIN_HEADER)?;
    let ip = &bytes[ip_off..];
    if ip[0] >> 4 != 4 {
        return Ok(Frame::Skip);
    }
    let ihl = (ip[0] & 0x0f) as usize * 4;
    if ihl < IPV4_MIN_HEADER {
        return Err(MalformedFrame {
            layer: "ipv4",
            needed: IPV4_MIN_HEADER,
            len: ihl,
        });
    }
    need("ipv4", ip, ihl)?;
    let total_len = be16(ip, 2) as usize;
    let frag_offset = be16(ip, 6) & 0x1fff;
    if ip[9] != IPPROTO_TCP || frag_offset != 0 {
        return Ok(Frame::Skip);
    }
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);

    let tcp = &ip[ihl..];
    need("tcp", tcp, TCP_MIN_HEADER)?;
    let doff = (tcp[12] >> 4) as usize * 4;
    if doff < TCP_MIN_HEADER {
        return Err(MalformedFrame {
            layer: "tcp",
            needed: TCP_MIN_HEADER,
            len: doff,
        });
    }
    need("tcp", tcp, doff)?;
    if total_len < ihl + doff {
        return Err(MalformedFrame {
            layer: "ipv4",
            needed: ihl + doff,
            len: total_len,
        });
    }

    Ok(Frame::Tcp(PacketRecord {
        ts,
        src_ip,
        dst_ip,
        src_port: be16(tcp, 0),
        dst_port: be16(tcp, 2),
        flags: TcpFlags::from_octet(tcp[13]),
        payload_len: (total_len - ihl - doff) as u16,
    }))
}

/// Internet checksum over `data`, folded into 16 bits.
fn ones_complement_sum(data: &[u8], mut acc: u32) -> u32 {
    let mut chunks = data.chunks_exact(2);
    for c in &mut chunks {
        acc += u16::from_be_bytes([c[0], c[1]]) as u32;
    }
    if let [last] = chunks.remainder() {
        acc += (*last as u32) << 8;
    }
    acc
}

fn fold_checksum(mut acc: u32) -> u16 {
    while acc >> 16 != 0 {
        acc = (acc & 0xffff) + (acc >> 16);
    }
    !(acc as u16)
}

/// Computes the IPv4 header checksum (the checksum field must be zeroed).
pub fn ipv4_checksum(header: &[u8]) -> u16 {
    fold_checksum(ones_complement_sum(header, 0))
}

/// Synthesizes an Ethernet/IPv4/TCP frame carrying exactly the record's
/// addresses, ports and flags, followed by `payload_len` zero bytes.
pub fn encode_frame(record: &PacketRecord) -> Result<Vec<u8>, PcapError> {
    if record.payload_len > MAX_PAYLOAD_LEN {
        return Err(PcapError::InvalidRecord(format!(
            "payload_len {} exceeds {}",
            record.payload_len, MAX_PAYLOAD_LEN
        )));
    }
    if record.ts.usec >= 1_000_000 {
        return Err(PcapError::InvalidRecord(format!(
            "ts_usec {} out of range",
            record.ts.usec
        )));
    }
    let payload = record.payload_len as usize;
    let ip_total = IPV4_MIN_HEADER + TCP_MIN_HEADER + payload;
    let mut frame = Vec::with_capacity(ETH_HEADER_LEN + ip_total);

    // Ethernet: locally administered MACs derived from the IPv4 addresses.
    let dst = record.dst_ip.octets();
    let src = record.src_ip.octets();
    frame.extend_from_slice(&[0x02, 0x00, dst[0], dst[1], dst[2], dst[3]]);
    frame.extend_from_slice(&[0x02, 0x00, src[0], src[1], src[2], src[3]]);
    frame.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());

    let ip_start = frame.len();
    frame.extend_from_slice(&[0x45, 0x00]);
    frame.extend_from_slice(&(ip_total as u16).to_be_bytes());
    frame.extend_from_slice(&[0x00, 0x00, 0x40, 0x00]); // id 0, DF
    frame.extend_from_slice(&[64, IPPROTO_TCP, 0x00, 0x00]);
    frame.extend_from_slice(&src);
    frame.extend_from_slice(&dst);
    let csum = ipv4_checksum(&frame[ip_start..]);
    frame[ip_start + 10..ip_start + 12].copy_from_slice(&csum.to_be_bytes());

    let tcp_start = frame.len();
    frame.extend_from_slice(&record.src_port.to_be_bytes());
    frame.extend_from_slice(&record.dst_port.to_be_bytes());
    frame.extend_from_slice(&[0; 8]); // seq, ack
    frame.push((TCP_MIN_HEADER as u8 / 4) << 4);
    frame.push(record.flags.bits());
    frame.extend_from_slice(&u16::MAX.to_be_bytes()); // window
    frame.extend_from_slice(&[0; 4]); // checksum, urgent
    frame.resize(frame.len() + payload, 0);

    // TCP checksum over the pseudo-header and segment.
    let mut acc = ones_complement_sum(&src, 0);
    acc = ones_complement_sum(&dst, acc);
    acc += IPPROTO_TCP as u32;
    acc += (TCP_MIN_HEADER + payload) as u32;
    acc = ones_complement_sum(&frame[tcp_start..], acc);
    let tcp_csum = fold_checksum(acc);
    frame[tcp_start + 16..tcp_start + 18].copy_from_slice(&tcp_csum.to_be_bytes());

    Ok(frame)
}

/// Streaming reader over a classic pcap file.
pub struct PcapReader<R> {
    inner: R,
    swapped: bool,
    snaplen: u32,
    offset: u64,
    stats: CaptureStats,
}

impl PcapReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PcapError> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

/// Reads as many bytes as are available up to `buf.len()`.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut hdr = [0u8; GLOBAL_HEADER_LEN];
        let got = read_full(&mut inner, &mut hdr)?;
        if got >= 4 {
            let magic = u32::from_le_bytes([hdr[0], hdr[1], hdr[2], hdr[3]]);
            if magic != PCAP_MAGIC && magic != PCAP_MAGIC_SWAPPED {
                return Err(PcapError::BadMagic(magic));
            }
        }
        if got < GLOBAL_HEADER_LEN {
            if got < 4 {
                let mut m = [0u8; 4];
                m[..got].copy_from_slice(&hdr[..got]);
                return Err(PcapError::BadMagic(u32::from_le_bytes(m)));
            }
            return Err(PcapError::Truncated {
                offset: 0,
                needed: GLOBAL_HEADER_LEN,
                available: got,
            });
        }
        let swapped = u32::from_le_bytes([hdr[0], hdr[1], hdr[2], hdr[3]]) == PCAP_MAGIC_SWAPPED;
        let word = |at: usize| {
            let b = [hdr[at], hdr[at + 1], hdr[at + 2], hdr[at + 3]];
            if swapped {
                u32::from_be_bytes(b)
            } else {
                u32::from_le_bytes(b)
            }
        };
        let snaplen = word(16);
        let linktype = word(20);
        if linktype != LINKTYPE_ETHERNET {
            return Err(PcapError::UnsupportedLinkType(linktype));
        }
        Ok(PcapReader {
            inner,
            swapped,
            snaplen,
            offset: GLOBAL_HEADER_LEN as u64,
            stats: CaptureStats::default(),
        })
    }

    pub fn snaplen(&self) -> u32 {
        self.snaplen
    }

    pub fn stats(&self) -> CaptureStats {
        self.stats
    }

    fn word(&self, b: &[u8]) -> u32 {
        let b = [b[0], b[1], b[2], b[3]];
        if self.swapped {
            u32::from_be_bytes(b)
        } else {
            u32::from_le_bytes(b)
        }
    }

    /// Next undecoded record, or `None` at a clean end of file.
    pub fn next_raw(&mut self) -> Result<Option<RawFrame>, PcapError> {
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        let got = read_full(&mut self.inner, &mut hdr)?;
        if got == 0 {
            return Ok(None);
        }
        if got < RECORD_HEADER_LEN {
            return Err(PcapError::Truncated {
                offset: self.offset,
                needed: RECORD_HEADER_LEN,
                available: got,
            });
        }
        let ts_sec = self.word(&hdr[0..4]);
        let ts_usec = self.word(&hdr[4..8]);
        let incl_len = self.word(&hdr[8..12]);
        if incl_len > MAX_RECORD_LEN.max(self.snaplen) {
            return Err(PcapError::OversizedRecord {
                offset: self.offset,
                len: incl_len,
            });
        }
        let body_offset = self.offset + RECORD_HEADER_LEN as u64;
        let mut data = vec![0u8; incl_len as usize];
        let got = read_full(&mut self.inner, &mut data)?;
        if got < data.len() {
            return Err(PcapError::Truncated {
                offset: body_offset,
                needed: data.len(),
                available: got,
            });
        }
        self.offset = body_offset + incl_len as u64;
        Ok(Some(RawFrame {
            ts: Timestamp::new(ts_sec, ts_usec),
            data,
        }))
    }

    /// Next TCP record, skipping (and counting) everything else.
    pub fn next_record(&mut self) -> Result<Option<PacketRecord>, PcapError> {
        while let Some(raw) = self.next_raw()? {
            let frame = decode_frame(&raw.data, raw.ts);
            self.stats.tally(&frame);
            if let Ok(Frame::Tcp(rec)) = frame {
                return Ok(Some(rec));
            }
        }
        Ok(None)
    }
}

/// An ordered producer of packet records with a definite end.
pub trait CaptureSource {
    /// `Ok(None)` marks end of stream.
    fn next_packet(&mut self) -> Result<Option<PacketRecord>, PcapError>;

    fn capture_stats(&self) -> CaptureStats;
}

impl<R: Read> CaptureSource for PcapReader<R> {
    fn next_packet(&mut self) -> Result<Option<PacketRecord>, PcapError> {
        self.next_record()
    }

    fn capture_stats(&self) -> CaptureStats {
        self.stats
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Stop after this many records have been read from the file.
    pub max_packets: Option<u64>,
    pub execution: Execution,
}

#[derive(Debug, Clone, Default)]
pub struct Capture {
    pub records: Vec<PacketRecord>,
    pub stats: CaptureStats,
}

/// Reads a whole pcap file into TCP records in file order.
pub fn read_pcap(path: impl AsRef<Path>) -> Result<Capture, PcapError> {
    read_pcap_with(path, ReadOptions::default())
}

pub fn read_pcap_with(path: impl AsRef<Path>, opts: ReadOptions) -> Result<Capture, PcapError> {
    let mut reader = PcapReader::open(path)?;
    read_capture(&mut reader, opts)
}

/// Pulls raw records sequentially, then decodes them as a batch.
pub fn read_capture<R: Read>(
    reader: &mut PcapReader<R>,
    opts: ReadOptions,
) -> Result<Capture, PcapError> {
    let mut raw = Vec::new();
    while opts.max_packets.is_none_or(|max| (raw.len() as u64) < max) {
        match reader.next_raw()? {
            Some(frame) => raw.push(frame),
            None => break,
        }
    }
    let decoded = batch::decode_frames(&raw, opts.execution);
    let mut stats = CaptureStats::default();
    let mut records = Vec::with_capacity(decoded.len());
    for frame in decoded {
        stats.tally(&frame);
        if let Ok(Frame::Tcp(rec)) = frame {
            records.push(rec);
        }
    }
    Ok(Capture { records, stats })
}

/// Writes classic little-endian pcap with Ethernet link type.
pub struct PcapWriter<W: Write> {
    inner: W,
}

impl PcapWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, PcapError> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W) -> Result<Self, PcapError> {
        let mut hdr = Vec::with_capacity(GLOBAL_HEADER_LEN);
        hdr.extend_from_slice(&PCAP_MAGIC.to_le_bytes());
        hdr.extend_from_slice(&2u16.to_le_bytes());
        hdr.extend_from_slice(&4u16.to_le_bytes());
        hdr.extend_from_slice(&0i32.to_le_bytes()); // thiszone
        hdr.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
        hdr.extend_from_slice(&SNAPLEN.to_le_bytes());
        hdr.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
        inner.write_all(&hdr)?;
        Ok(PcapWriter { inner })
    }

    pub fn write_record(&mut self, record: &PacketRecord) -> Result<(), PcapError> {
        let frame = encode_frame(record)?;
        self.write_frame(record.ts, &frame)
    }

    /// Writes arbitrary frame bytes as one record.
    pub fn write_frame(&mut self, ts: Timestamp, frame: &[u8]) -> Result<(), PcapError> {
        let len = frame.len() as u32;
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        hdr[0..4].copy_from_slice(&ts.sec.to_le_bytes());
        hdr[4..8].copy_from_slice(&ts.usec.to_le_bytes());
        hdr[8..12].copy_from_slice(&len.to_le_bytes());
        hdr[12..16].copy_from_slice(&len.to_le_bytes());
        self.inner.write_all(&hdr)?;
        self.inner.write_all(frame)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, PcapError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_pcap<'a>(
    records: impl IntoIterator<Item = &'a PacketRecord>,
    path: impl AsRef<Path>,
) -> Result<(), PcapError> {
    let mut writer = PcapWriter::create(path)?;
    for rec in records {
        writer.write_record(rec)?;
    }
    writer.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(flags: TcpFlags) -> PacketRecord {
        PacketRecord {
            ts: Timestamp::new(1_700_000_000, 250),
            src_ip: Ipv4Addr::new(10, 0, 0, 1),
            dst_ip: Ipv4Addr::new(10, 0, 0, 2),
            src_port: 4000,
            dst_port: 80,
            flags,
            payload_len: 0,
        }
    }

    fn to_bytes(records: &[PacketRecord]) -> Vec<u8> {
        let mut w = PcapWriter::new(Vec::new()).unwrap();
        for r in records {
            w.write_record(r).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn empty_file_is_global_header_only() {
        let bytes = to_bytes(&[]);
        assert_eq!(bytes.len(), GLOBAL_HEADER_LEN);
        assert_eq!(&bytes[0..4], &[0xd4, 0xc3, 0xb2, 0xa1]);
        assert_eq!(&bytes[4..8], &[2, 0, 4, 0]);
        assert_eq!(&bytes[16..20], &SNAPLEN.to_le_bytes());
        assert_eq!(&bytes[20..24], &[1, 0, 0, 0]);
    }

    #[test]
    fn syn_is_flags_octet_0x02() {
        let bytes = to_bytes(&[rec(TcpFlags::SYN)]);
        let frame = &bytes[GLOBAL_HEADER_LEN + RECORD_HEADER_LEN..];
        assert_eq!(frame[ETH_HEADER_LEN + IPV4_MIN_HEADER + 13], 0x02);
    }

    #[test]
    fn written_ip_checksum_verifies() {
        let frame = encode_frame(&rec(TcpFlags::SYN | TcpFlags::ACK)).unwrap();
        let ip = &frame[ETH_HEADER_LEN..ETH_HEADER_LEN + IPV4_MIN_HEADER];
        // Summing a header including its checksum folds to zero.
        assert_eq!(ipv4_checksum(ip), 0);
    }

    #[test]
    fn decodes_syn_ack_octet() {
        let mut frame = encode_frame(&rec(TcpFlags::SYN)).unwrap();
        frame[ETH_HEADER_LEN + IPV4_MIN_HEADER + 13] = 0x12;
        match decode_frame(&frame, Timestamp::default()).unwrap() {
            Frame::Tcp(r) => assert_eq!(r.flags, TcpFlags::SYN | TcpFlags::ACK),
            Frame::Skip => panic!("expected TCP"),
        }
    }

    #[test]
    fn udp_is_skipped() {
        let mut frame = encode_frame(&rec(TcpFlags::SYN)).unwrap();
        frame[ETH_HEADER_LEN + 9] = 17;
        assert_eq!(decode_frame(&frame, Timestamp::default()), Ok(Frame::Skip));
    }

    #[test]
    fn non_first_fragment_is_skipped() {
        let mut frame = encode_frame(&rec(TcpFlags::SYN)).unwrap();
        frame[ETH_HEADER_LEN + 7] = 0x10;
        assert_eq!(decode_frame(&frame, Timestamp::default()), Ok(Frame::Skip));
    }

    #[test]
    fn short_frame_claiming_ipv4_is_malformed() {
        let frame = encode_frame(&rec(TcpFlags::SYN)).unwrap();
        assert!(decode_frame(&frame[..10], Timestamp::default()).is_err());
        // Ethernet header present, IPv4 header cut short
        let err = decode_frame(&frame[..20], Timestamp::default()).unwrap_err();
        assert_eq!(err.layer, "ipv4");
    }

    #[test]
    fn ip_and_tcp_options_are_honored() {
        let base = encode_frame(&PacketRecord {
            payload_len: 5,
            ..rec(TcpFlags::FIN | TcpFlags::ACK)
        })
        .unwrap();
        // Rebuild with 4 bytes of IPv4 options and 8 bytes of TCP options.
        let mut frame = base[..ETH_HEADER_LEN].to_vec();
        let mut ip = base[ETH_HEADER_LEN..ETH_HEADER_LEN + 20].to_vec();
        ip[0] = 0x46;
        let total = 24 + 28 + 5;
        ip[2..4].copy_from_slice(&(total as u16).to_be_bytes());
        ip.extend_from_slice(&[1, 1, 1, 0]);
        frame.extend_from_slice(&ip);
        let mut tcp = base[ETH_HEADER_LEN + 20..ETH_HEADER_LEN + 40].to_vec();
        tcp[12] = 7 << 4;
        tcp.extend_from_slice(&[1; 8]);
        frame.extend_from_slice(&tcp);
        frame.extend_from_slice(&[0; 5]);
        match decode_frame(&frame, Timestamp::default()).unwrap() {
            Frame::Tcp(r) => {
                assert_eq!(r.payload_len, 5);
                assert_eq!(r.dst_port, 80);
                assert_eq!(r.flags, TcpFlags::FIN | TcpFlags::ACK);
            }
            Frame::Skip => panic!("expected TCP"),
        }
    }

    #[test]
    fn vlan_tag_is_stepped_over() {
        let base = encode_frame(&rec(TcpFlags::RST)).unwrap();
        let mut frame = base[..12].to_vec();
        frame.extend_from_slice(&[0x81, 0x00, 0x00, 0x05]);
        frame.extend_from_slice(&base[12..]);
        assert!(matches!(
            decode_frame(&frame, Timestamp::default()),
            Ok(Frame::Tcp(_))
        ));
    }

    #[test]
    fn zero_magic_is_bad_magic() {
        let mut bytes = to_bytes(&[rec(TcpFlags::SYN)]);
        bytes[0..4].copy_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(
            PcapReader::new(&bytes[..]),
            Err(PcapError::BadMagic(0))
        ));
    }

    #[test]
    fn pcapng_is_bad_magic() {
        let bytes = [0x0a, 0x0d, 0x0d, 0x0a, 0, 0, 0, 0];
        assert!(matches!(
            PcapReader::new(&bytes[..]),
            Err(PcapError::BadMagic(_))
        ));
    }

    #[test]
    fn non_ethernet_link_type_rejected() {
        let mut bytes = to_bytes(&[]);
        bytes[20] = 101; // raw IP
        assert!(matches!(
            PcapReader::new(&bytes[..]),
            Err(PcapError::UnsupportedLinkType(101))
        ));
    }

    #[test]
    fn truncated_record_body_reported() {
        let bytes = to_bytes(&[rec(TcpFlags::SYN)]);
        let cut = &bytes[..bytes.len() - 3];
        let mut reader = PcapReader::new(cut).unwrap();
        assert!(matches!(
            reader.next_raw(),
            Err(PcapError::Truncated { .. })
        ));
    }

    #[test]
    fn big_endian_files_are_read() {
        let r = rec(TcpFlags::SYN);
        let le = to_bytes(&[r]);
        // Byte-swap every header word to mimic a big-endian writer.
        let mut be = le.clone();
        for w in [0usize, 8, 12, 16, 20] {
            be[w..w + 4].reverse();
        }
        be[4..6].reverse();
        be[6..8].reverse();
        for w in 0..4 {
            let at = GLOBAL_HEADER_LEN + w * 4;
            be[at..at + 4].reverse();
        }
        let mut reader = PcapReader::new(&be[..]).unwrap();
        assert_eq!(reader.next_record().unwrap(), Some(r));
        assert_eq!(reader.next_record().unwrap(), None);
    }

    #[test]
    fn oversized_payload_rejected_on_write() {
        let r = PacketRecord {
            payload_len: MAX_PAYLOAD_LEN + 1,
            ..rec(TcpFlags::ACK)
        };
        assert!(matches!(encode_frame(&r), Err(PcapError::InvalidRecord(_))));
    }
}
