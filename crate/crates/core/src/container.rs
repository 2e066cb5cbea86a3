//! The `VCM1` container: a fixed header, one length-prefixed payload per
//! stream kind, and a trailing CRC-32 over everything before it.

use std::fmt;

use crate::error::{Error, Result, StreamKind};
use crate::wire::Cursor;

pub const MAGIC: &[u8; 4] = b"VCM1";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 2 + 2 + 2 + 2 + 2 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub version: u8,
    pub fps_num: u16,
    pub fps_den: u16,
    pub width: u16,
    pub height: u16,
    pub frame_count: u16,
    pub stream_count: u8,
}

impl ContainerHeader {
    pub fn new(fps: f64, width: usize, height: usize, frame_count: usize) -> Result<Self> {
        let fit = |v: usize, what: &str| {
            u16::try_from(v).map_err(|_| Error::Contract(format!("{what} {v} exceeds u16")))
        };
        let (fps_num, fps_den) = fps_ratio(fps)?;
        Ok(ContainerHeader {
            version: VERSION,
            fps_num,
            fps_den,
            width: fit(width, "width")?,
            height: fit(height, "height")?,
            frame_count: fit(frame_count, "frame count")?,
            stream_count: 0,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps_num as f64 / self.fps_den.max(1) as f64
    }
}

/// Closest num/den pair with both parts in u16; integral rates map to n/1
/// and NTSC-style rates to n·1000/1001.
pub fn fps_ratio(fps: f64) -> Result<(u16, u16)> {
    if !(fps.is_finite() && fps > 0.0 && fps <= u16::MAX as f64) {
        return Err(Error::Contract(format!("fps {fps} cannot be stored")));
    }
    for den in [1u32, 1001, 1000, 100, 10] {
        let num = (fps * den as f64).round();
        if num >= 1.0 && num <= u16::MAX as f64 && ((num / den as f64) - fps).abs() < 1e-9 * fps.max(1.0) {
            return Ok((num as u16, den as u16));
        }
    }
    let den = (u16::MAX as f64 / fps).floor().clamp(1.0, u16::MAX as f64);
    Ok(((fps * den).round() as u16, den as u16))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub header: ContainerHeader,
    pub streams: Vec<(StreamKind, Vec<u8>)>,
}

impl Container {
    pub fn get(&self, kind: StreamKind) -> Option<&[u8]> {
        self.streams
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, v)| v.as_slice())
    }
}

pub fn mux(header: &ContainerHeader, streams: &[(StreamKind, Vec<u8>)]) -> Result<Vec<u8>> {
    if header.stream_count as usize != streams.len() {
        return Err(Error::Contract(format!(
            "header declares {} streams, {} given",
            header.stream_count,
            streams.len()
        )));
    }
    for (i, (k, _)) in streams.iter().enumerate() {
        if streams[..i].iter().any(|(other, _)| other == k) {
            return Err(Error::Contract(format!("duplicate {k} stream")));
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + streams.iter().map(|(_, p)| 9 + p.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.push(header.version);
    for v in [header.fps_num, header.fps_den, header.width, header.height, header.frame_count] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(header.stream_count);
    for (kind, payload) in streams {
        out.push(*kind as u8);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(payload);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Convenience wrapper that fills in `stream_count`.
pub fn mux_streams(mut header: ContainerHeader, streams: &[(StreamKind, Vec<u8>)]) -> Result<Vec<u8>> {
    header.stream_count = u8::try_from(streams.len())
        .map_err(|_| Error::Contract("too many streams".into()))?;
    mux(&header, streams)
}

pub fn demux(bytes: &[u8]) -> Result<Container> {
    let (container, stored, computed) = parse(bytes)?;
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    Ok(container)
}

/// Parses the layout but reports a checksum mismatch instead of failing,
/// for consumers that only need streams with their own integrity checks.
pub fn demux_unverified(bytes: &[u8]) -> Result<(Container, bool)> {
    let (container, stored, computed) = parse(bytes)?;
    Ok((container, stored == computed))
}

fn parse(bytes: &[u8]) -> Result<(Container, u32, u32)> {
    let mut c = Cursor::new(bytes, "container");
    let magic = c.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:02x?}, expected \"VCM1\"")));
    }
    let version = c.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let header = ContainerHeader {
        version,
        fps_num: c.u16()?,
        fps_den: c.u16()?,
        width: c.u16()?,
        height: c.u16()?,
        frame_count: c.u16()?,
        stream_count: c.u8()?,
    };
    let mut streams: Vec<(StreamKind, Vec<u8>)> = Vec::with_capacity(header.stream_count as usize);
    for _ in 0..header.stream_count {
        let code = c.u8()?;
        let kind = StreamKind::from_code(code)
            .ok_or_else(|| Error::Format(format!("unknown stream kind {code}")))?;
        if streams.iter().any(|(k, _)| *k == kind) {
            return Err(Error::Format(format!("duplicate {kind} stream")));
        }
        let declared = c.u64()?;
        let remaining = c.remaining().saturating_sub(4) as u64;
        if declared > remaining {
            return Err(Error::Overrun { declared, remaining });
        }
        streams.push((kind, c.take(declared as usize)?.to_vec()));
    }
    let body_len = c.position();
    let stored = c.u32()?;
    c.finish()?;
    let computed = crc32fast::hash(&bytes[..body_len]);
    Ok((Container { header, streams }, stored, computed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamShare {
    pub kind: StreamKind,
    pub bytes: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerSummary {
    pub header: ContainerHeader,
    pub total_bytes: usize,
    pub streams: Vec<StreamShare>,
}

/// Per-stream sizes and their share of the total payload.
pub fn inspect(bytes: &[u8]) -> Result<ContainerSummary> {
    let c = demux(bytes)?;
    let payload: usize = c.streams.iter().map(|(_, p)| p.len()).sum();
    let streams = c
        .streams
        .iter()
        .map(|(kind, p)| StreamShare {
            kind: *kind,
            bytes: p.len(),
            share: if payload == 0 {
                0.0
            } else {
                p.len() as f64 / payload as f64
            },
        })
        .collect();
    Ok(ContainerSummary {
        header: c.header,
        total_bytes: bytes.len(),
        streams,
    })
}

impl fmt::Display for ContainerSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = &self.header;
        writeln!(
            f,
            "VCM1 v{} {}x{} {} frames @ {}/{} fps, {} bytes",
            h.version, h.width, h.height, h.frame_count, h.fps_num, h.fps_den, self.total_bytes
        )?;
        for s in &self.streams {
            writeln!(
                f,
                "{:<5} {:<20} {:>10} bytes {:>6.1}%",
                s.kind.short_name(),
                s.kind.to_string(),
                s.bytes,
                s.share * 100.0
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> ContainerHeader {
        ContainerHeader::new(30.0, 64, 48, 8).unwrap()
    }

    #[test]
    fn empty_container() {
        let bytes = mux(&header(), &[]).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        let c = demux(&bytes).unwrap();
        assert!(c.streams.is_empty());
        assert_eq!(c.header, header());
    }

    #[test]
    fn duplicate_kind_rejected() {
        let streams = vec![(StreamKind::Feature, vec![1]), (StreamKind::Feature, vec![2])];
        assert!(matches!(mux_streams(header(), &streams), Err(Error::Contract(_))));
    }

    #[test]
    fn golden_fixture() {
        let mut h = header();
        h.stream_count = 1;
        let bytes = mux(&h, &[(StreamKind::Model, b"abc".to_vec())]).unwrap();
        let mut expected = b"VCM1\x01".to_vec();
        expected.extend_from_slice(&[30, 0, 1, 0, 64, 0, 48, 0, 8, 0, 1]);
        expected.push(5);
        expected.extend_from_slice(&3u64.to_le_bytes());
        expected.extend_from_slice(b"abc");
        let crc = crc32fast::hash(&expected);
        expected.extend_from_slice(&crc.to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(demux(&expected).unwrap().get(StreamKind::Model), Some(&b"abc"[..]));
    }

    #[test]
    fn every_payload_flip_is_checksum_error() {
        let streams = vec![(StreamKind::Feature, vec![7u8; 12]), (StreamKind::Residue, vec![9u8; 5])];
        let bytes = mux_streams(header(), &streams).unwrap();
        let c = demux(&bytes).unwrap();
        assert_eq!(c.streams, streams);
        let payload_offsets: Vec<usize> = (HEADER_LEN + 9..HEADER_LEN + 21)
            .chain(HEADER_LEN + 30..HEADER_LEN + 35)
            .collect();
        for i in payload_offsets {
            let mut bad = bytes.clone();
            bad[i] ^= 0x01;
            assert!(matches!(demux(&bad), Err(Error::Checksum { .. })), "offset {i}");
        }
    }

    #[test]
    fn overrun_is_typed() {
        let mut h = header();
        h.stream_count = 1;
        let mut bytes = mux(&h, &[(StreamKind::Feature, vec![1, 2, 3])]).unwrap();
        bytes[HEADER_LEN + 1..HEADER_LEN + 9].copy_from_slice(&1000u64.to_le_bytes());
        assert!(matches!(demux(&bytes), Err(Error::Overrun { declared: 1000, .. })));
        bytes[0] = b'X';
        assert!(matches!(demux(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn shares() {
        let streams = vec![
            (StreamKind::KeyFrameVideo, vec![0; 800]),
            (StreamKind::Feature, vec![0; 100]),
            (StreamKind::Residue, vec![0; 300]),
        ];
        let s = inspect(&mux_streams(header(), &streams).unwrap()).unwrap();
        let pct: Vec<String> = s.streams.iter().map(|x| format!("{:.1}", x.share * 100.0)).collect();
        assert_eq!(pct, vec!["66.7", "8.3", "25.0"]);
        let text = s.to_string();
        assert!(text.contains("66.7%"));

        let single = inspect(&mux_streams(header(), &[(StreamKind::Feature, vec![0; 10])]).unwrap()).unwrap();
        assert_eq!(single.streams.len(), 1);
        assert_eq!(single.streams[0].share, 1.0);
    }

    #[test]
    fn fps_ratios() {
        assert_eq!(fps_ratio(30.0).unwrap(), (30, 1));
        assert_eq!(fps_ratio(30000.0 / 1001.0).unwrap(), (30000, 1001));
        let (n, d) = fps_ratio(12.5).unwrap();
        assert_eq!(n as f64 / d as f64, 12.5);
        assert!(fps_ratio(0.0).is_err());
    }
}
