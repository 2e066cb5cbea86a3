//! Block-based hybrid luma codec.
//!
//! Each 8×8 block is predicted (intra DC/horizontal/vertical from
//! reconstructed neighbours, or motion-compensated/skip from a reference),
//! the residual is DCT'd, uniformly quantized, zigzag scanned and written as
//! Exp-Golomb run/level pairs with an end-of-block flag. Mode choice
//! minimises `SSE + λ·bits` with `λ = 0.85·Qstep²`. The encoder returns the
//! exact reconstruction the decoder will produce.

pub mod dct;

use rayon::prelude::*;

use crate::bits::{se_bits, ue_bits, BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::model::{Frame, VideoClip};
use crate::wire::{put_blob, Cursor};

pub use dct::transform_block;

const B: usize = dct::N;
const CHUNK_HEADER_LEN: usize = 6;

pub const DEFAULT_SEARCH_RANGE: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gop {
    AllIntra,
    Ippp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    pub qp: u8,
    pub gop: Gop,
    pub search_range: u8,
}

impl CodecConfig {
    pub fn new(qp: u8, gop: Gop) -> Result<Self> {
        let cfg = CodecConfig {
            qp,
            gop,
            search_range: DEFAULT_SEARCH_RANGE,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.qp > 51 {
            return Err(Error::Contract(format!("qp {} outside 0..=51", self.qp)));
        }
        Ok(())
    }

    pub fn qstep(&self) -> f64 {
        qstep(self.qp)
    }
}

/// `2^((qp - 4) / 6)`: qp 4 is unit step, every +6 doubles it.
pub fn qstep(qp: u8) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

fn lambda(qp: u8) -> f64 {
    let q = qstep(qp);
    0.85 * q * q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameType {
    I = 0,
    P = 1,
}

/// One coded picture: header fields plus the entropy-coded payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedChunk {
    pub frame_type: FrameType,
    pub qp: u8,
    pub width: u16,
    pub height: u16,
    pub payload: Vec<u8>,
}

impl CodedChunk {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CHUNK_HEADER_LEN + self.payload.len());
        out.push(self.frame_type as u8);
        out.push(self.qp);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes, "coded chunk");
        let frame_type = match c.u8()? {
            0 => FrameType::I,
            1 => FrameType::P,
            t => return Err(Error::Decode(format!("unknown frame type {t}"))),
        };
        let qp = c.u8()?;
        if qp > 51 {
            return Err(Error::Decode(format!("qp {qp} outside 0..=51")));
        }
        let width = c.u16()?;
        let height = c.u16()?;
        Ok(CodedChunk {
            frame_type,
            qp,
            width,
            height,
            payload: bytes[CHUNK_HEADER_LEN..].to_vec(),
        })
    }

    pub fn byte_len(&self) -> usize {
        CHUNK_HEADER_LEN + self.payload.len()
    }
}

/// u32 count, then each chunk as a u32-length-prefixed blob.
pub fn write_chunk_list(chunks: &[CodedChunk]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(chunks.len() as u32).to_le_bytes());
    for c in chunks {
        put_blob(&mut out, &c.to_bytes());
    }
    out
}

/// Parses a chunk list; an error names the index of the offending chunk.
pub fn read_chunk_list(bytes: &[u8]) -> Result<Vec<CodedChunk>> {
    let mut c = Cursor::new(bytes, "chunk list");
    let n = c.u32()? as usize;
    // every chunk costs at least its length prefix and header
    if n > c.remaining() / (4 + CHUNK_HEADER_LEN) {
        return Err(Error::Format(format!("chunk list declares {n} chunks")));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(CodedChunk::from_bytes(c.blob()?)?);
    }
    c.finish()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Skip,
    Inter,
    Dc,
    Horizontal,
    Vertical,
}

impl Mode {
    fn code(self, ft: FrameType) -> u32 {
        let intra = |m: Mode| match m {
            Mode::Dc => 0,
            Mode::Horizontal => 1,
            Mode::Vertical => 2,
            _ => unreachable!("inter mode in intra picture"),
        };
        match (ft, self) {
            (FrameType::I, m) => intra(m),
            (FrameType::P, Mode::Skip) => 0,
            (FrameType::P, Mode::Inter) => 1,
            (FrameType::P, m) => 2 + intra(m),
        }
    }

    fn from_code(ft: FrameType, code: u32) -> Result<Self> {
        let modes: &[Mode] = match ft {
            FrameType::I => &[Mode::Dc, Mode::Horizontal, Mode::Vertical],
            FrameType::P => &[
                Mode::Skip,
                Mode::Inter,
                Mode::Dc,
                Mode::Horizontal,
                Mode::Vertical,
            ],
        };
        modes
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Decode(format!("invalid block mode {code}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Mv {
    x: i32,
    y: i32,
}

fn intra_pred(recon: &Frame, bx: usize, by: usize, mode: Mode) -> [i32; 64] {
    let x0 = bx * B;
    let y0 = by * B;
    let top: Option<[i32; B]> =
        (y0 > 0).then(|| std::array::from_fn(|i| recon.get(x0 + i, y0 - 1) as i32));
    let left: Option<[i32; B]> =
        (x0 > 0).then(|| std::array::from_fn(|i| recon.get(x0 - 1, y0 + i) as i32));
    let mut p = [128i32; 64];
    match mode {
        Mode::Dc => {
            let (sum, n) = top
                .iter()
                .chain(left.iter())
                .fold((0i32, 0i32), |(s, n), edge| (s + edge.iter().sum::<i32>(), n + B as i32));
            if n > 0 {
                p = [(sum + n / 2) / n; 64];
            }
        }
        Mode::Horizontal => {
            if let Some(l) = left {
                for y in 0..B {
                    p[y * B..(y + 1) * B].fill(l[y]);
                }
            }
        }
        Mode::Vertical => {
            if let Some(t) = top {
                for y in 0..B {
                    p[y * B..(y + 1) * B].copy_from_slice(&t);
                }
            }
        }
        Mode::Skip | Mode::Inter => unreachable!(),
    }
    p
}

fn inter_pred(reference: &Frame, bx: usize, by: usize, mv: Mv) -> [i32; 64] {
    let x0 = (bx * B) as i32 + mv.x;
    let y0 = (by * B) as i32 + mv.y;
    let mut p = [0i32; 64];
    for y in 0..B {
        for x in 0..B {
            p[y * B + x] = reference.get((x0 + x as i32) as usize, (y0 + y as i32) as usize) as i32;
        }
    }
    p
}

fn mv_in_bounds(frame: &Frame, bx: usize, by: usize, mv: Mv) -> bool {
    let x0 = (bx * B) as i32 + mv.x;
    let y0 = (by * B) as i32 + mv.y;
    x0 >= 0 && y0 >= 0 && x0 + B as i32 <= frame.width as i32 && y0 + B as i32 <= frame.height as i32
}

fn source_block(f: &Frame, bx: usize, by: usize) -> [i32; 64] {
    let mut b = [0i32; 64];
    for y in 0..B {
        for x in 0..B {
            b[y * B + x] = f.get(bx * B + x, by * B + y) as i32;
        }
    }
    b
}

/// Full search around (0,0) minimising SAD; earlier candidates win ties,
/// and the zero vector is tried first.
fn motion_search(src: &[i32; 64], reference: &Frame, bx: usize, by: usize, range: i32) -> Mv {
    let sad = |mv: Mv, bound: u32| -> u32 {
        let x0 = (bx * B) as i32 + mv.x;
        let y0 = (by * B) as i32 + mv.y;
        let mut acc = 0u32;
        for y in 0..B {
            let row = (y0 as usize + y) * reference.width + x0 as usize;
            for x in 0..B {
                acc += (src[y * B + x] - reference.samples[row + x] as i32).unsigned_abs();
            }
            if acc >= bound {
                return acc;
            }
        }
        acc
    };
    let mut best = Mv::default();
    let mut best_sad = sad(best, u32::MAX);
    for dy in -range..=range {
        for dx in -range..=range {
            let mv = Mv { x: dx, y: dy };
            if mv == Mv::default() || !mv_in_bounds(reference, bx, by, mv) {
                continue;
            }
            let s = sad(mv, best_sad);
            if s < best_sad {
                best_sad = s;
                best = mv;
            }
        }
    }
    best
}

fn quantize_levels(residual: &[i32; 64], qstep: f64) -> [i32; 64] {
    let mut block = [0.0; 64];
    for (b, r) in block.iter_mut().zip(residual) {
        *b = *r as f64;
    }
    let coefs = transform_block(&block, false);
    let mut levels = [0i32; 64];
    for (l, c) in levels.iter_mut().zip(coefs.iter()) {
        *l = (c / qstep).round() as i32;
    }
    levels
}

/// Shared by encoder and decoder so both produce identical samples.
fn reconstruct(pred: &[i32; 64], levels: &[i32; 64], qstep: f64) -> [u8; 64] {
    let mut out = [0u8; 64];
    if levels.iter().all(|&l| l == 0) {
        for (o, p) in out.iter_mut().zip(pred) {
            *o = (*p).clamp(0, 255) as u8;
        }
        return out;
    }
    let mut deq = [0.0; 64];
    for (d, l) in deq.iter_mut().zip(levels) {
        *d = *l as f64 * qstep;
    }
    let res = transform_block(&deq, true);
    for i in 0..64 {
        out[i] = (pred[i] as f64 + res[i]).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn level_code(level: i32) -> u32 {
    // nonzero levels: 1, -1, 2, -2, ... -> 0, 1, 2, 3, ...
    let mag = level.unsigned_abs() - 1;
    mag * 2 + (level < 0) as u32
}

fn level_from_code(code: u32) -> i32 {
    let mag = (code / 2) as i64 + 1;
    let v = if code & 1 == 1 { -mag } else { mag };
    v as i32
}

fn residual_bits(levels: &[i32; 64]) -> u32 {
    let zz = dct::zigzag();
    let mut bits = 1;
    let mut run = 0u32;
    for &idx in zz.iter() {
        let l = levels[idx];
        if l == 0 {
            run += 1;
        } else {
            bits += ue_bits(run) + ue_bits(level_code(l)) + 1;
            run = 0;
        }
    }
    bits
}

fn write_residual(w: &mut BitWriter, levels: &[i32; 64]) {
    let zz = dct::zigzag();
    let nonzero: Vec<(u32, i32)> = {
        let mut run = 0u32;
        let mut v = Vec::new();
        for &idx in zz.iter() {
            let l = levels[idx];
            if l == 0 {
                run += 1;
            } else {
                v.push((run, l));
                run = 0;
            }
        }
        v
    };
    w.put_bit(!nonzero.is_empty());
    for (i, (run, level)) in nonzero.iter().enumerate() {
        w.put_ue(*run);
        w.put_ue(level_code(*level));
        w.put_bit(i + 1 == nonzero.len());
    }
}

fn read_residual(r: &mut BitReader<'_>) -> Result<[i32; 64]> {
    let zz = dct::zigzag();
    let mut levels = [0i32; 64];
    if !r.get_bit()? {
        return Ok(levels);
    }
    let mut pos = 0usize;
    loop {
        let run = r.get_ue()? as usize;
        let code = r.get_ue()?;
        pos = pos
            .checked_add(run)
            .filter(|&p| p < 64)
            .ok_or_else(|| Error::Decode("coefficient run past end of block".into()))?;
        levels[zz[pos]] = level_from_code(code);
        pos += 1;
        if r.get_bit()? {
            return Ok(levels);
        }
        if pos >= 64 {
            return Err(Error::Decode("missing end-of-block flag".into()));
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || !width.is_multiple_of(B) || !height.is_multiple_of(B) {
        return Err(Error::Contract(format!(
            "frame {width}x{height} is not a positive multiple of 8 in both dims"
        )));
    }
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::Contract(format!("frame {width}x{height} exceeds u16 dims")));
    }
    Ok(())
}

struct Candidate {
    mode: Mode,
    mv: Mv,
    levels: [i32; 64],
    recon: [u8; 64],
    cost: f64,
}

/// Encodes one frame; a reference makes it a P frame.
pub fn encode_frame(
    frame: &Frame,
    reference: Option<&Frame>,
    cfg: &CodecConfig,
) -> Result<(CodedChunk, Frame)> {
    cfg.validate()?;
    check_dims(frame.width, frame.height)?;
    if let Some(r) = reference {
        if !r.same_dims(frame) {
            return Err(Error::Contract(format!(
                "reference {}x{} does not match frame {}x{}",
                r.width, r.height, frame.width, frame.height
            )));
        }
    }
    let frame_type = if reference.is_some() {
        FrameType::P
    } else {
        FrameType::I
    };
    let qs = cfg.qstep();
    let lam = lambda(cfg.qp);
    let bw = frame.width / B;
    let bh = frame.height / B;

    // motion vectors only depend on the reference, so search all blocks up front
    let mvs: Vec<Mv> = match reference {
        Some(r) => (0..bw * bh)
            .into_par_iter()
            .map(|i| {
                let (bx, by) = (i % bw, i / bw);
                motion_search(&source_block(frame, bx, by), r, bx, by, cfg.search_range as i32)
            })
            .collect(),
        None => Vec::new(),
    };

    let mut recon = Frame::filled(frame.width, frame.height, 0);
    let mut w = BitWriter::new();
    let mut mv_pred = Mv::default();
    for by in 0..bh {
        for bx in 0..bw {
            let src = source_block(frame, bx, by);
            let mut best: Option<Candidate> = None;
            let mut consider = |mode: Mode, mv: Mv, pred: [i32; 64], coded: bool, side_bits: u32| {
                let levels = if coded {
                    let mut res = [0i32; 64];
                    for i in 0..64 {
                        res[i] = src[i] - pred[i];
                    }
                    quantize_levels(&res, qs)
                } else {
                    [0; 64]
                };
                let rec = reconstruct(&pred, &levels, qs);
                let dist: f64 = src
                    .iter()
                    .zip(rec.iter())
                    .map(|(&s, &r)| ((s - r as i32) as f64).powi(2))
                    .sum();
                let bits = ue_bits(mode.code(frame_type))
                    + side_bits
                    + if coded { residual_bits(&levels) } else { 0 };
                let cost = dist + lam * bits as f64;
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    best = Some(Candidate {
                        mode,
                        mv,
                        levels,
                        recon: rec,
                        cost,
                    });
                }
            };
            if let Some(r) = reference {
                consider(Mode::Skip, Mv::default(), inter_pred(r, bx, by, Mv::default()), false, 0);
                let mv = mvs[by * bw + bx];
                let side = se_bits(mv.x - mv_pred.x) + se_bits(mv.y - mv_pred.y);
                consider(Mode::Inter, mv, inter_pred(r, bx, by, mv), true, side);
            }
            for mode in [Mode::Dc, Mode::Horizontal, Mode::Vertical] {
                consider(mode, Mv::default(), intra_pred(&recon, bx, by, mode), true, 0);
            }
            let best = best.expect("at least one intra candidate");

            w.put_ue(best.mode.code(frame_type));
            if best.mode == Mode::Inter {
                w.put_se(best.mv.x - mv_pred.x);
                w.put_se(best.mv.y - mv_pred.y);
                mv_pred = best.mv;
            }
            if best.mode != Mode::Skip {
                write_residual(&mut w, &best.levels);
            }
            put_block(&mut recon, bx, by, &best.recon);
        }
    }

    let chunk = CodedChunk {
        frame_type,
        qp: cfg.qp,
        width: frame.width as u16,
        height: frame.height as u16,
        payload: w.finish(),
    };
    Ok((chunk, recon))
}

fn put_block(f: &mut Frame, bx: usize, by: usize, block: &[u8; 64]) {
    for y in 0..B {
        let row = (by * B + y) * f.width + bx * B;
        f.samples[row..row + B].copy_from_slice(&block[y * B..(y + 1) * B]);
    }
}

/// Decodes a chunk back to the encoder's reconstruction.
pub fn decode_frame(chunk: &CodedChunk, reference: Option<&Frame>) -> Result<Frame> {
    let width = chunk.width as usize;
    let height = chunk.height as usize;
    check_dims(width, height).map_err(|e| Error::Decode(e.to_string()))?;
    if chunk.qp > 51 {
        return Err(Error::Decode(format!("qp {} outside 0..=51", chunk.qp)));
    }
    let reference = match (chunk.frame_type, reference) {
        (FrameType::P, None) => {
            return Err(Error::Contract("P frame decoded without a reference".into()))
        }
        (FrameType::P, Some(r)) => {
            if r.width != width || r.height != height {
                return Err(Error::Contract(format!(
                    "reference {}x{} does not match chunk {width}x{height}",
                    r.width, r.height
                )));
            }
            Some(r)
        }
        (FrameType::I, _) => None,
    };
    let bw = width / B;
    let bh = height / B;
    // every block spends at least one bit
    if chunk.payload.len() * 8 < bw * bh {
        return Err(Error::Decode(format!(
            "payload of {} bytes cannot hold {} blocks",
            chunk.payload.len(),
            bw * bh
        )));
    }
    let qs = qstep(chunk.qp);
    let mut recon = Frame::filled(width, height, 0);
    let mut r = BitReader::new(&chunk.payload);
    let mut mv_pred = Mv::default();
    for by in 0..bh {
        for bx in 0..bw {
            let mode = Mode::from_code(chunk.frame_type, r.get_ue()?)?;
            let block = match mode {
                Mode::Skip => {
                    let pred = inter_pred(reference.unwrap(), bx, by, Mv::default());
                    reconstruct(&pred, &[0; 64], qs)
                }
                Mode::Inter => {
                    let dx = r.get_se()?;
                    let dy = r.get_se()?;
                    let mv = Mv {
                        x: mv_pred.x.checked_add(dx).ok_or_else(|| Error::Decode("mv overflow".into()))?,
                        y: mv_pred.y.checked_add(dy).ok_or_else(|| Error::Decode("mv overflow".into()))?,
                    };
                    let reference = reference.unwrap();
                    if !mv_in_bounds(reference, bx, by, mv) {
                        return Err(Error::Decode(format!(
                            "motion vector ({}, {}) leaves the picture at block ({bx}, {by})",
                            mv.x, mv.y
                        )));
                    }
                    mv_pred = mv;
                    let levels = read_residual(&mut r)?;
                    reconstruct(&inter_pred(reference, bx, by, mv), &levels, qs)
                }
                intra => {
                    let levels = read_residual(&mut r)?;
                    reconstruct(&intra_pred(&recon, bx, by, intra), &levels, qs)
                }
            };
            put_block(&mut recon, bx, by, &block);
        }
    }
    r.expect_end()?;
    Ok(recon)
}

/// Codes a clip; IPPP predicts each frame from the previous reconstruction.
/// Returns the chunks and the reconstructed clip.
pub fn encode_clip(clip: &VideoClip, cfg: &CodecConfig) -> Result<(Vec<CodedChunk>, VideoClip)> {
    let mut chunks = Vec::with_capacity(clip.len());
    let mut recons: Vec<Frame> = Vec::with_capacity(clip.len());
    for f in clip.frames() {
        let reference = match cfg.gop {
            Gop::Ippp => recons.last(),
            Gop::AllIntra => None,
        };
        let (chunk, recon) = encode_frame(f, reference, cfg)?;
        chunks.push(chunk);
        recons.push(recon);
    }
    Ok((chunks, VideoClip::new(recons, clip.fps())?))
}

pub fn decode_clip(chunks: &[CodedChunk], fps: f64) -> Result<VideoClip> {
    let mut frames: Vec<Frame> = Vec::with_capacity(chunks.len());
    for (i, c) in chunks.iter().enumerate() {
        let reference = match c.frame_type {
            FrameType::P => Some(frames.last().ok_or_else(|| {
                Error::Contract(format!("chunk {i} is a P frame with no preceding frame"))
            })?),
            FrameType::I => None,
        };
        let f = decode_frame(c, reference)?;
        frames.push(f);
    }
    VideoClip::new(frames, fps)
}

pub fn total_bytes(chunks: &[CodedChunk]) -> usize {
    chunks.iter().map(CodedChunk::byte_len).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, seed: u32) -> Frame {
        let mut s = seed;
        Frame::from_fn(w, h, |x, y| {
            s = s.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            let noise = (s >> 24) as i32 % 24;
            let v = 96 + ((x * 3 + y * 2) % 64) as i32 + noise + if (x / 16 + y / 16) % 2 == 0 { 40 } else { 0 };
            v.clamp(0, 255) as u8
        })
    }

    #[test]
    fn qstep_scale() {
        assert!((qstep(4) - 1.0).abs() < 1e-12);
        assert!((qstep(10) - 2.0).abs() < 1e-12);
        assert!((qstep(22) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn constant_frame_is_lossless_at_qp4() {
        let f = Frame::filled(64, 64, 77);
        let cfg = CodecConfig::new(4, Gop::AllIntra).unwrap();
        let (chunk, recon) = encode_frame(&f, None, &cfg).unwrap();
        assert_eq!(recon, f);
        assert_eq!(decode_frame(&chunk, None).unwrap(), f);
    }

    #[test]
    fn closed_loop_and_truncation() {
        let f = textured(32, 24, 7);
        let cfg = CodecConfig::new(22, Gop::AllIntra).unwrap();
        let (chunk, recon) = encode_frame(&f, None, &cfg).unwrap();
        assert_eq!(decode_frame(&chunk, None).unwrap(), recon);
        let mut short = chunk.clone();
        short.payload.pop();
        assert!(decode_frame(&short, None).is_err());
        let mut long = chunk.clone();
        long.payload.push(0);
        assert!(decode_frame(&long, None).is_err());
    }

    #[test]
    fn p_frame_requires_reference() {
        let f = textured(16, 16, 1);
        let cfg = CodecConfig::new(22, Gop::Ippp).unwrap();
        let (_, recon) = encode_frame(&f, None, &cfg).unwrap();
        let (p, _) = encode_frame(&f, Some(&recon), &cfg).unwrap();
        assert_eq!(p.frame_type, FrameType::P);
        assert!(matches!(decode_frame(&p, None), Err(Error::Contract(_))));
    }

    #[test]
    fn identical_p_frame_is_all_skip() {
        let f = textured(64, 64, 3);
        let cfg = CodecConfig::new(22, Gop::Ippp).unwrap();
        let (i, recon) = encode_frame(&f, None, &cfg).unwrap();
        let (p, p_recon) = encode_frame(&recon, Some(&recon), &cfg).unwrap();
        assert_eq!(p_recon, recon);
        // 64 blocks × one-bit skip code
        assert_eq!(p.payload, vec![0xff; 8]);
        assert!((p.payload.len() as f64) < 0.02 * i.payload.len() as f64);
    }

    #[test]
    fn misaligned_dims_rejected() {
        let f = Frame::filled(12, 16, 0);
        let cfg = CodecConfig::new(22, Gop::AllIntra).unwrap();
        assert!(matches!(encode_frame(&f, None, &cfg), Err(Error::Contract(_))));
    }

    #[test]
    fn chunk_list_round_trip() {
        let clip = VideoClip::new(vec![textured(16, 16, 1), textured(16, 16, 2)], 30.0).unwrap();
        let cfg = CodecConfig::new(30, Gop::Ippp).unwrap();
        let (chunks, recon) = encode_clip(&clip, &cfg).unwrap();
        let parsed = read_chunk_list(&write_chunk_list(&chunks)).unwrap();
        assert_eq!(parsed, chunks);
        assert_eq!(decode_clip(&parsed, 30.0).unwrap(), recon);
    }

    #[test]
    fn level_codes_round_trip() {
        for l in [-300, -2, -1, 1, 2, 5, 3000] {
            assert_eq!(level_from_code(level_code(l)), l);
        }
    }
}
