//! Keypoint stream coding: position quantization with step 2, inverse
//! covariance quantization with step 64, temporal delta coding and an
//! LZMA back end.

use std::io::{Read, Write};

use lzma_rust2::{LzmaOptions, LzmaReader, LzmaWriter};

use crate::error::{Error, Result};
use crate::model::{is_positive_definite, Keypoint, KeypointSet};
use crate::wire::Cursor;

pub const POSITION_STEP: f64 = 2.0;
pub const INV_COV_STEP: f64 = 64.0;
/// Substituted for inverse covariances that dequantize to a singular or
/// indefinite matrix.
pub const DEFAULT_INV_COV: [f64; 4] = [64.0, 0.0, 0.0, 64.0];

pub const CODEC_LZMA: u8 = 0;
const LZMA_DICT_SIZE: u32 = 1 << 20;
const LZMA_MEM_LIMIT_KB: u32 = 64 * 1024;

/// Quantizer step sizes. The stream format does not record them; encoder
/// and decoder must agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointSteps {
    pub position: f64,
    pub inv_cov: f64,
}

impl Default for KeypointSteps {
    fn default() -> Self {
        KeypointSteps {
            position: POSITION_STEP,
            inv_cov: INV_COV_STEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedKeypoint {
    pub qx: i16,
    pub qy: i16,
    pub qc: [i16; 4],
}

impl QuantizedKeypoint {
    fn fields(&self) -> [i16; 6] {
        [self.qx, self.qy, self.qc[0], self.qc[1], self.qc[2], self.qc[3]]
    }

    fn from_fields(f: [i16; 6]) -> Self {
        QuantizedKeypoint {
            qx: f[0],
            qy: f[1],
            qc: [f[2], f[3], f[4], f[5]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantizedKeypointSet {
    pub frame_index: usize,
    pub points: Vec<QuantizedKeypoint>,
}

/// Result of dequantization; `degenerate[k]` marks points whose matrix was
/// replaced by the fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct DequantizedSet {
    pub set: KeypointSet,
    pub degenerate: Vec<bool>,
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

fn to_index(v: f64, step: f64, what: &str) -> Result<i16> {
    let q = round_half_up(v / step);
    if !(i16::MIN as f64..=i16::MAX as f64).contains(&q) {
        return Err(Error::Validation(format!(
            "{what} {v} does not fit a 16-bit index at step {step}"
        )));
    }
    Ok(q as i16)
}

pub fn quantize_keypoints(set: &KeypointSet) -> Result<QuantizedKeypointSet> {
    quantize_keypoints_with(set, KeypointSteps::default())
}

pub fn quantize_keypoints_with(
    set: &KeypointSet,
    steps: KeypointSteps,
) -> Result<QuantizedKeypointSet> {
    let points = set
        .points
        .iter()
        .map(|kp| {
            kp.check_matrix()?;
            Ok(QuantizedKeypoint {
                qx: to_index(kp.x, steps.position, "x")?,
                qy: to_index(kp.y, steps.position, "y")?,
                qc: [
                    to_index(kp.inv_cov[0], steps.inv_cov, "inverse covariance")?,
                    to_index(kp.inv_cov[1], steps.inv_cov, "inverse covariance")?,
                    to_index(kp.inv_cov[2], steps.inv_cov, "inverse covariance")?,
                    to_index(kp.inv_cov[3], steps.inv_cov, "inverse covariance")?,
                ],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedKeypointSet {
        frame_index: set.frame_index,
        points,
    })
}

pub fn dequantize_keypoints(q: &QuantizedKeypointSet) -> DequantizedSet {
    dequantize_keypoints_with(q, KeypointSteps::default(), DEFAULT_INV_COV)
}

pub fn dequantize_keypoints_with(
    q: &QuantizedKeypointSet,
    steps: KeypointSteps,
    fallback: [f64; 4],
) -> DequantizedSet {
    let mut degenerate = Vec::with_capacity(q.points.len());
    let points = q
        .points
        .iter()
        .map(|p| {
            let m = p.qc.map(|c| c as f64 * steps.inv_cov);
            let ok = is_positive_definite(m);
            degenerate.push(!ok);
            Keypoint {
                x: p.qx as f64 * steps.position,
                y: p.qy as f64 * steps.position,
                inv_cov: if ok { m } else { fallback },
            }
        })
        .collect();
    DequantizedSet {
        set: KeypointSet {
            frame_index: q.frame_index,
            points,
        },
        degenerate,
    }
}

/// Serializes, delta codes and compresses a keypoint stream (`B_F`).
///
/// Frame indices are implicit: set `t` must carry `frame_index == t`.
pub fn encode_keypoint_stream(sets: &[QuantizedKeypointSet]) -> Result<Vec<u8>> {
    let raw = serialize_indices(sets)?;
    let mut out = Vec::with_capacity(raw.len() / 4 + 32);
    out.push(CODEC_LZMA);
    out.extend_from_slice(&(raw.len() as u32).to_le_bytes());
    out.extend_from_slice(&lzma_compress(&raw)?);
    Ok(out)
}

pub fn decode_keypoint_stream(bytes: &[u8]) -> Result<Vec<QuantizedKeypointSet>> {
    let mut c = Cursor::new(bytes, "keypoint stream");
    let codec = c.u8()?;
    if codec != CODEC_LZMA {
        return Err(Error::Format(format!("unknown keypoint codec id {codec}")));
    }
    let raw_len = c.u32()? as usize;
    let raw = lzma_decompress(c.take(c.remaining())?, raw_len)?;
    deserialize_indices(&raw)
}

/// The uncompressed layout: u16 frame count, u8 K, then per frame and
/// point six i16 indices, each frame after the first as a wrapping
/// difference from the previous frame.
pub fn serialize_indices(sets: &[QuantizedKeypointSet]) -> Result<Vec<u8>> {
    if sets.len() > u16::MAX as usize {
        return Err(Error::Contract(format!("{} frames exceed u16", sets.len())));
    }
    let k = sets.first().map_or(0, |s| s.points.len());
    if k > u8::MAX as usize {
        return Err(Error::Contract(format!("{k} keypoints per frame exceed u8")));
    }
    for (t, s) in sets.iter().enumerate() {
        if s.points.len() != k {
            return Err(Error::Contract(format!(
                "frame {t} has {} keypoints, expected {k}",
                s.points.len()
            )));
        }
        if s.frame_index != t {
            return Err(Error::Contract(format!(
                "set {t} carries frame index {}",
                s.frame_index
            )));
        }
    }
    let mut out = Vec::with_capacity(3 + sets.len() * k * 12);
    out.extend_from_slice(&(sets.len() as u16).to_le_bytes());
    out.push(k as u8);
    for (t, s) in sets.iter().enumerate() {
        for (i, p) in s.points.iter().enumerate() {
            let cur = p.fields();
            let prev = if t == 0 {
                [0; 6]
            } else {
                sets[t - 1].points[i].fields()
            };
            for (a, b) in cur.iter().zip(prev.iter()) {
                out.extend_from_slice(&a.wrapping_sub(*b).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn deserialize_indices(raw: &[u8]) -> Result<Vec<QuantizedKeypointSet>> {
    let mut c = Cursor::new(raw, "keypoint indices");
    let frames = c.u16()? as usize;
    let k = c.u8()? as usize;
    let expected = frames * k * 12;
    if c.remaining() != expected {
        return Err(Error::Format(format!(
            "keypoint header declares {frames} frames of {k} points ({expected} bytes), payload has {}",
            c.remaining()
        )));
    }
    let mut sets: Vec<QuantizedKeypointSet> = Vec::with_capacity(frames);
    for t in 0..frames {
        let mut points = Vec::with_capacity(k);
        for i in 0..k {
            let mut f = [0i16; 6];
            for v in f.iter_mut() {
                *v = c.i16()?;
            }
            if t > 0 {
                let prev = sets[t - 1].points[i].fields();
                for (v, p) in f.iter_mut().zip(prev.iter()) {
                    *v = v.wrapping_add(*p);
                }
            }
            points.push(QuantizedKeypoint::from_fields(f));
        }
        sets.push(QuantizedKeypointSet {
            frame_index: t,
            points,
        });
    }
    Ok(sets)
}

fn lzma_compress(raw: &[u8]) -> Result<Vec<u8>> {
    let mut options = LzmaOptions::with_preset(6);
    options.dict_size = LZMA_DICT_SIZE;
    let mut w = LzmaWriter::new_use_header(Vec::new(), &options, Some(raw.len() as u64))?;
    w.write_all(raw)?;
    Ok(w.finish()?)
}

fn lzma_decompress(compressed: &[u8], raw_len: usize) -> Result<Vec<u8>> {
    let fail = |e: std::io::Error| Error::Format(format!("LZMA payload: {e}"));
    let reader = LzmaReader::new_mem_limit(compressed, LZMA_MEM_LIMIT_KB, None).map_err(fail)?;
    let mut out = Vec::new();
    reader
        .take(raw_len as u64 + 1)
        .read_to_end(&mut out)
        .map_err(fail)?;
    if out.len() != raw_len {
        return Err(Error::Format(format!(
            "LZMA payload expands to {} bytes, header says {raw_len}",
            out.len()
        )));
    }
    Ok(out)
}
