//! Base layer: intra-coded key frame, keypoint stream, and per-frame
//! residues against the warped prediction.

use crate::codec::{self, encode_frame, read_chunk_list, write_chunk_list, CodecConfig, CodedChunk, Gop};
use crate::container::{mux_streams, Container, ContainerHeader};
use crate::error::{Error, Result, StreamKind};
use crate::keypoints::{
    decode_keypoint_stream, dequantize_keypoints, encode_keypoint_stream, quantize_keypoints, QuantizedKeypointSet,
};
use crate::model::{common_point_count, Frame, KeyFrameSchedule, KeypointSet, VideoClip};

use super::extract::{extract_keypoints, ExtractorConfig};
use super::warp::generate_predicted_frame;

/// Residues are stored shifted by this offset.
pub const RESIDUE_OFFSET: i32 = 128;

/// The bitstreams of one coded clip.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredStreams {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub schedule: KeyFrameSchedule,
    /// Key-frame chunk (`B_I`).
    pub b_i: Vec<CodedChunk>,
    /// Keypoint stream (`B_F`).
    pub b_f: Vec<u8>,
    /// One residue chunk per non-key frame (`B_R`).
    pub b_r: Vec<CodedChunk>,
    /// Enhancement layer (`B_DV`), when present.
    pub b_dv: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeReport {
    /// Residue samples clamped into the 8-bit range.
    pub residue_saturated: usize,
    /// Points whose matrix fell back to the default after quantization.
    pub degenerate_keypoints: usize,
    /// What was written to `B_F`.
    pub keypoints: Vec<QuantizedKeypointSet>,
}

/// Decoder output for both consumers: pixels and keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedClip {
    pub video: VideoClip,
    pub keypoints: Vec<KeypointSet>,
    /// Generated prediction per frame; frame 0 is the decoded key frame.
    pub predicted: Vec<Frame>,
    /// Decoded residue per frame in offset form; frame 0 is flat 128.
    pub residue: Vec<Frame>,
}

impl LayeredStreams {
    pub fn frame_count(&self) -> usize {
        self.schedule.len()
    }

    /// Serialised payload per stream kind, in container order.
    pub fn streams(&self) -> Vec<(StreamKind, Vec<u8>)> {
        let mut s = vec![
            (StreamKind::KeyFrameVideo, write_chunk_list(&self.b_i)),
            (StreamKind::Feature, self.b_f.clone()),
            (StreamKind::Residue, write_chunk_list(&self.b_r)),
        ];
        if let Some(dv) = &self.b_dv {
            s.push((StreamKind::Enhancement, dv.clone()));
        }
        s
    }

    pub fn stream_len(&self, kind: StreamKind) -> usize {
        self.streams().iter().find(|(k, _)| *k == kind).map_or(0, |(_, p)| p.len())
    }

    pub fn total_bytes(&self) -> usize {
        self.streams().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn to_container(&self) -> Result<Vec<u8>> {
        let header = ContainerHeader::new(self.fps, self.width, self.height, self.frame_count())?;
        mux_streams(header, &self.streams())
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let need = |kind: StreamKind| {
            c.get(kind)
                .ok_or_else(|| Error::Format("stream missing from container".into()).in_stream(kind, None))
        };
        let b_i = read_chunk_list(need(StreamKind::KeyFrameVideo)?)
            .map_err(|e| e.in_stream(StreamKind::KeyFrameVideo, None))?;
        let b_r = read_chunk_list(need(StreamKind::Residue)?).map_err(|e| e.in_stream(StreamKind::Residue, None))?;
        Ok(LayeredStreams {
            width: c.header.width as usize,
            height: c.header.height as usize,
            fps: c.header.fps(),
            schedule: KeyFrameSchedule::first_frame(c.header.frame_count as usize),
            b_i,
            b_f: need(StreamKind::Feature)?.to_vec(),
            b_r,
            b_dv: c.get(StreamKind::Enhancement).map(<[u8]>::to_vec),
        })
    }
}

pub(crate) fn offset_residue(target: &Frame, prediction: &Frame, extra: Option<&Frame>, saturated: &mut usize) -> Frame {
    let mut out = Frame::filled(target.width, target.height, 0);
    for i in 0..out.samples.len() {
        let mut r = target.samples[i] as i32 - prediction.samples[i] as i32 + RESIDUE_OFFSET;
        if let Some(e) = extra {
            r -= e.samples[i] as i32 - RESIDUE_OFFSET;
        }
        if !(0..=255).contains(&r) {
            *saturated += 1;
        }
        out.samples[i] = r.clamp(0, 255) as u8;
    }
    out
}

/// `clamp(base + Σ (r − 128))`.
pub(crate) fn add_residues(base: &Frame, residues: &[&Frame]) -> Frame {
    let mut out = base.clone();
    for (i, s) in out.samples.iter_mut().enumerate() {
        let v = residues
            .iter()
            .fold(base.samples[i] as i32, |acc, r| acc + r.samples[i] as i32 - RESIDUE_OFFSET);
        *s = v.clamp(0, 255) as u8;
    }
    out
}

/// Runs the extractor, then codes the clip.
pub fn encode_predictive_clip(
    v: &VideoClip,
    cfg: &ExtractorConfig,
    qp_key: u8,
    qp_res: u8,
) -> Result<(LayeredStreams, EncodeReport)> {
    let keypoints = extract_keypoints(v, cfg);
    encode_with_keypoints(v, &keypoints, qp_key, qp_res)
}

/// Codes a clip with caller-supplied keypoints (one set per frame).
pub fn encode_with_keypoints(
    v: &VideoClip,
    keypoints: &[KeypointSet],
    qp_key: u8,
    qp_res: u8,
) -> Result<(LayeredStreams, EncodeReport)> {
    if keypoints.len() != v.len() {
        return Err(Error::Contract(format!(
            "{} keypoint sets for {} frames",
            keypoints.len(),
            v.len()
        )));
    }
    common_point_count(keypoints)?;
    for (t, set) in keypoints.iter().enumerate() {
        if set.frame_index != t {
            return Err(Error::Contract(format!("keypoint set {t} is labelled frame {}", set.frame_index)));
        }
        for kp in &set.points {
            kp.validate(v.width(), v.height())?;
        }
    }
    let key_cfg = CodecConfig::new(qp_key, Gop::AllIntra)?;
    let res_cfg = CodecConfig::new(qp_res, Gop::AllIntra)?;

    let (key_chunk, key_recon) = encode_frame(&v.frames()[0], None, &key_cfg)?;
    let quantized = keypoints.iter().map(quantize_keypoints).collect::<Result<Vec<_>>>()?;
    let b_f = encode_keypoint_stream(&quantized)?;
    let decoded: Vec<_> = quantized.iter().map(dequantize_keypoints).collect();
    let degenerate_keypoints = decoded.iter().map(|d| d.degenerate.iter().filter(|&&x| x).count()).sum();

    let mut residue_saturated = 0;
    let mut b_r = Vec::with_capacity(v.len().saturating_sub(1));
    for (t, frame) in v.frames().iter().enumerate().skip(1) {
        let predicted = generate_predicted_frame(&key_recon, &decoded[0].set, &decoded[t].set)?;
        let residue = offset_residue(frame, &predicted, None, &mut residue_saturated);
        b_r.push(encode_frame(&residue, None, &res_cfg)?.0);
    }
    let streams = LayeredStreams {
        width: v.width(),
        height: v.height(),
        fps: v.fps(),
        schedule: KeyFrameSchedule::first_frame(v.len()),
        b_i: vec![key_chunk],
        b_f,
        b_r,
        b_dv: None,
    };
    let report = EncodeReport {
        residue_saturated,
        degenerate_keypoints,
        keypoints: quantized,
    };
    Ok((streams, report))
}

/// Decodes `B_F` alone.
pub fn decode_keypoints(b_f: &[u8]) -> Result<Vec<KeypointSet>> {
    let sets = decode_keypoint_stream(b_f).map_err(|e| e.in_stream(StreamKind::Feature, None))?;
    Ok(sets.iter().map(|q| dequantize_keypoints(q).set).collect())
}

fn check_dims(f: &Frame, s: &LayeredStreams, kind: StreamKind, t: usize) -> Result<()> {
    if f.width != s.width || f.height != s.height {
        return Err(Error::Decode(format!(
            "decoded {}x{}, header says {}x{}",
            f.width, f.height, s.width, s.height
        ))
        .in_stream(kind, Some(t)));
    }
    Ok(())
}

pub fn decode_predictive_clip(s: &LayeredStreams) -> Result<DecodedClip> {
    let n = s.frame_count();
    if n == 0 {
        return Err(Error::Decode("clip has no frames".into()));
    }
    let keypoints = decode_keypoints(&s.b_f)?;
    if keypoints.len() != n {
        return Err(Error::Decode(format!("{} keypoint sets for {n} frames", keypoints.len()))
            .in_stream(StreamKind::Feature, None));
    }
    let key_chunk = match s.b_i.as_slice() {
        [c] => c,
        other => {
            return Err(Error::Decode(format!("expected one key-frame chunk, found {}", other.len()))
                .in_stream(StreamKind::KeyFrameVideo, None))
        }
    };
    let key = codec::decode_frame(key_chunk, None).map_err(|e| e.in_stream(StreamKind::KeyFrameVideo, Some(0)))?;
    check_dims(&key, s, StreamKind::KeyFrameVideo, 0)?;
    if s.b_r.len() != n - 1 {
        return Err(Error::Decode(format!("{} residue chunks for {} predicted frames", s.b_r.len(), n - 1))
            .in_stream(StreamKind::Residue, None));
    }

    let mut frames = vec![key.clone()];
    let mut predicted = vec![key.clone()];
    let mut residue = vec![Frame::filled(s.width, s.height, RESIDUE_OFFSET as u8)];
    for (i, chunk) in s.b_r.iter().enumerate() {
        let t = i + 1;
        let r = codec::decode_frame(chunk, None).map_err(|e| e.in_stream(StreamKind::Residue, Some(t)))?;
        check_dims(&r, s, StreamKind::Residue, t)?;
        let p = generate_predicted_frame(&key, &keypoints[0], &keypoints[t])
            .map_err(|e| e.in_stream(StreamKind::Feature, Some(t)))?;
        frames.push(add_residues(&p, &[&r]));
        predicted.push(p);
        residue.push(r);
    }
    Ok(DecodedClip {
        video: VideoClip::new(frames, s.fps)?,
        keypoints,
        predicted,
        residue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use crate::model::Keypoint;

    fn textured(w: usize, h: usize, shift: usize) -> Frame {
        Frame::from_fn(w, h, |x, y| {
            let xs = x + 64 - shift;
            (((xs / 6) * 41 + (y / 5) * 23 + xs * 2) % 200 + 20) as u8
        })
    }

    #[test]
    fn static_clip_round_trip_is_near_lossless() {
        let clip = VideoClip::new(vec![textured(32, 32, 0); 4], 30.0).unwrap();
        let cfg = ExtractorConfig { keypoints: 4, ..ExtractorConfig::default() };
        let (s, report) = encode_predictive_clip(&clip, &cfg, 4, 4).unwrap();
        assert_eq!(s.b_r.len(), 3);
        let d = decode_predictive_clip(&s).unwrap();
        for (a, b) in d.video.frames().iter().zip(clip.frames()) {
            assert!(psnr(a, b).unwrap().value >= 45.0);
        }
        let expected: Vec<KeypointSet> = report.keypoints.iter().map(|q| dequantize_keypoints(q).set).collect();
        assert_eq!(d.keypoints, expected);
    }

    #[test]
    fn corrupt_residue_names_stream_and_frame() {
        let clip = VideoClip::new((0..3).map(|t| textured(32, 32, t)).collect(), 30.0).unwrap();
        let (mut s, _) = encode_predictive_clip(&clip, &ExtractorConfig::default(), 30, 30).unwrap();
        s.b_r[1].payload.truncate(1);
        match decode_predictive_clip(&s) {
            Err(Error::Stream { kind: StreamKind::Residue, frame: Some(2), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // keypoints decode regardless
        assert_eq!(decode_keypoints(&s.b_f).unwrap().len(), 3);
    }

    #[test]
    fn container_round_trip() {
        let clip = VideoClip::new((0..3).map(|t| textured(16, 16, t)).collect(), 25.0).unwrap();
        let (s, _) = encode_predictive_clip(&clip, &ExtractorConfig::default(), 22, 22).unwrap();
        let bytes = s.to_container().unwrap();
        let back = LayeredStreams::from_container(&crate::container::demux(&bytes).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(bytes.len(), s.total_bytes() + 16 + 3 * 9 + 4);
    }

    #[test]
    fn misaligned_dims_are_rejected() {
        let clip = VideoClip::new(vec![Frame::filled(12, 16, 3); 2], 30.0).unwrap();
        assert!(matches!(
            encode_predictive_clip(&clip, &ExtractorConfig::default(), 30, 30),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn keypoint_count_mismatch_is_contract_error() {
        let clip = VideoClip::new(vec![Frame::filled(16, 16, 3); 2], 30.0).unwrap();
        let sets = vec![
            KeypointSet { frame_index: 0, points: vec![Keypoint::isotropic(1.0, 1.0, 64.0)] },
            KeypointSet { frame_index: 1, points: vec![] },
        ];
        assert!(matches!(encode_with_keypoints(&clip, &sets, 30, 30), Err(Error::Contract(_))));
    }

    #[test]
    fn residue_helpers() {
        let a = Frame::new(2, 1, vec![250, 0]).unwrap();
        let b = Frame::new(2, 1, vec![0, 250]).unwrap();
        let mut sat = 0;
        let r = offset_residue(&a, &b, None, &mut sat);
        assert_eq!(r.samples, vec![255, 0]);
        assert_eq!(sat, 2);
        assert_eq!(add_residues(&b, &[&r]).samples, vec![127, 122]);
    }
}
