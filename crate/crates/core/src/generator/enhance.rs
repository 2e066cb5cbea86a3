//! Enhancement layer (`B_DV`): finer keypoint positions, extra keypoints,
//! and an incremental residue coded on top of the base reconstruction.

use crate::codec::{decode_frame, encode_frame, CodecConfig, CodedChunk, Gop};
use crate::error::{Error, Result, StreamKind};
use crate::keypoints::{
    decode_keypoint_stream, dequantize_keypoints_with, encode_keypoint_stream, quantize_keypoints_with, KeypointSteps, QuantizedKeypoint, QuantizedKeypointSet,
    DEFAULT_INV_COV, INV_COV_STEP, POSITION_STEP,
};
use crate::model::{Frame, Keypoint, KeypointSet, VideoClip};
use crate::wire::{put_blob, Cursor};

use super::extract::{extract_with_extra, ExtractorConfig};
use super::pipeline::{add_residues, decode_keypoints, decode_predictive_clip, offset_residue, DecodedClip, LayeredStreams};
use super::warp::generate_predicted_frame;

const EXTRA_STEPS: KeypointSteps = KeypointSteps {
    position: 1.0,
    inv_cov: INV_COV_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefineConfig {
    pub extra_points: usize,
    pub qp: u8,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { extra_points: 4, qp: 32 }
    }
}

/// Parsed `B_DV`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementLayer {
    pub extra_points: u8,
    pub qp: u8,
    /// Per frame: step-1 refinements for the base points (`qx`, `qy` only),
    /// followed by the extra points at step 1.
    pub delta: Vec<QuantizedKeypointSet>,
    /// Incremental residue per frame; `None` keeps the base reconstruction.
    pub residues: Vec<Option<CodedChunk>>,
}

impl EnhancementLayer {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = vec![self.extra_points, self.qp];
        put_blob(&mut out, &encode_keypoint_stream(&self.delta)?);
        let n = u16::try_from(self.residues.len())
            .map_err(|_| Error::Contract(format!("{} frames exceed u16", self.residues.len())))?;
        out.extend_from_slice(&n.to_le_bytes());
        for r in &self.residues {
            match r {
                None => out.push(0),
                Some(chunk) => {
                    out.push(1);
                    put_blob(&mut out, &chunk.to_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes, "enhancement layer");
        let extra_points = c.u8()?;
        let qp = c.u8()?;
        let delta = decode_keypoint_stream(c.blob()?)?;
        let n = c.u16()? as usize;
        let mut residues = Vec::with_capacity(n.min(c.remaining()));
        for t in 0..n {
            residues.push(match c.u8()? {
                0 => None,
                1 => Some(CodedChunk::from_bytes(c.blob()?)?),
                flag => return Err(Error::Format(format!("frame {t}: bad layer flag {flag}"))),
            });
        }
        c.finish()?;
        Ok(EnhancementLayer {
            extra_points,
            qp,
            delta,
            residues,
        })
    }

    /// Refined keypoints `Fᵁ` per frame from the decoded base points.
    pub fn refined_keypoints(&self, base: &[KeypointSet]) -> Result<Vec<KeypointSet>> {
        if self.delta.len() != base.len() {
            return Err(Error::Decode(format!(
                "{} refinement sets for {} frames",
                self.delta.len(),
                base.len()
            )));
        }
        base.iter()
            .zip(&self.delta)
            .map(|(b, d)| {
                let k = b.points.len();
                if d.points.len() != k + self.extra_points as usize {
                    return Err(Error::Decode(format!(
                        "frame {}: {} refinement points, expected {}",
                        b.frame_index,
                        d.points.len(),
                        k + self.extra_points as usize
                    )));
                }
                let mut points: Vec<Keypoint> = b
                    .points
                    .iter()
                    .zip(&d.points)
                    .map(|(p, r)| Keypoint {
                        x: p.x + r.qx as f64,
                        y: p.y + r.qy as f64,
                        inv_cov: p.inv_cov,
                    })
                    .collect();
                let extras = QuantizedKeypointSet {
                    frame_index: b.frame_index,
                    points: d.points[k..].to_vec(),
                };
                points.extend(dequantize_keypoints_with(&extras, EXTRA_STEPS, DEFAULT_INV_COV).set.points);
                Ok(KeypointSet {
                    frame_index: b.frame_index,
                    points,
                })
            })
            .collect()
    }
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Builds `B_DV` for a base layer, re-running the extractor with extra
/// points to recover the unquantized positions.
pub fn encode_enhancement(
    v: &VideoClip,
    base: &LayeredStreams,
    extractor: &ExtractorConfig,
    refine: &RefineConfig,
) -> Result<Vec<u8>> {
    let pristine = extract_with_extra(v, extractor, refine.extra_points);
    encode_enhancement_with_keypoints(v, base, &pristine, refine)
}

/// As [`encode_enhancement`] with caller-supplied keypoints: per frame the
/// base points first, then `refine.extra_points` more.
pub fn encode_enhancement_with_keypoints(
    v: &VideoClip,
    base: &LayeredStreams,
    pristine: &[KeypointSet],
    refine: &RefineConfig,
) -> Result<Vec<u8>> {
    let extra = u8::try_from(refine.extra_points)
        .map_err(|_| Error::Contract(format!("{} extra points exceed 255", refine.extra_points)))?;
    let cfg = CodecConfig::new(refine.qp, Gop::AllIntra)?;
    let decoded = decode_predictive_clip(base)?;
    if v.len() != decoded.video.len() || pristine.len() != v.len() {
        return Err(Error::Contract(format!(
            "clip has {} frames, base {} and keypoints {}",
            v.len(),
            decoded.video.len(),
            pristine.len()
        )));
    }
    let k = decoded.keypoints[0].points.len();
    let mut delta = Vec::with_capacity(v.len());
    for (t, (p, b)) in pristine.iter().zip(&decoded.keypoints).enumerate() {
        if p.points.len() != k + refine.extra_points {
            return Err(Error::Contract(format!(
                "frame {t}: {} keypoints, expected {}",
                p.points.len(),
                k + refine.extra_points
            )));
        }
        let mut points: Vec<QuantizedKeypoint> = p.points[..k]
            .iter()
            .zip(&b.points)
            .map(|(orig, coarse)| {
                let r = |o: f64, c: f64| round_half_up(o - c).clamp(-POSITION_STEP, POSITION_STEP) as i16;
                QuantizedKeypoint {
                    qx: r(orig.x, coarse.x),
                    qy: r(orig.y, coarse.y),
                    qc: [0; 4],
                }
            })
            .collect();
        let extras = KeypointSet {
            frame_index: t,
            points: p.points[k..].to_vec(),
        };
        points.extend(quantize_keypoints_with(&extras, EXTRA_STEPS)?.points);
        delta.push(QuantizedKeypointSet { frame_index: t, points });
    }
    let mut layer = EnhancementLayer {
        extra_points: extra,
        qp: refine.qp,
        delta,
        residues: Vec::with_capacity(v.len()),
    };
    let refined = layer.refined_keypoints(&decoded.keypoints)?;
    let key = &decoded.predicted[0];
    let mut saturated = 0;
    for (t, target) in v.frames().iter().enumerate() {
        let generated = generate_predicted_frame(key, &refined[0], &refined[t])?;
        let residue = offset_residue(target, &generated, Some(&decoded.residue[t]), &mut saturated);
        let (chunk, recon) = encode_frame(&residue, None, &cfg)?;
        let enhanced = add_residues(&generated, &[&decoded.residue[t], &recon]);
        let keep = sse(&enhanced, target) < sse(&decoded.video.frames()[t], target);
        layer.residues.push(keep.then_some(chunk));
    }
    layer.to_bytes()
}

fn sse(a: &Frame, b: &Frame) -> u64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64)
        .sum()
}

/// Which layer a reconstruction came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Base,
    Enhanced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedClip {
    pub video: VideoClip,
    pub layer: Layer,
    /// Frames that carry an incremental residue.
    pub enhanced_frames: Vec<bool>,
}

/// Applies `B_DV` to an already decoded base layer.
pub fn enhance_decoded(base: &DecodedClip, b_dv: &[u8]) -> Result<EnhancedClip> {
    let wrap = |e: Error, t: Option<usize>| e.in_stream(StreamKind::Enhancement, t);
    let layer = EnhancementLayer::from_bytes(b_dv).map_err(|e| wrap(e, None))?;
    let n = base.video.len();
    if layer.residues.len() != n {
        return Err(wrap(Error::Decode(format!("{} residue flags for {n} frames", layer.residues.len())), None));
    }
    let refined = layer.refined_keypoints(&base.keypoints).map_err(|e| wrap(e, None))?;
    let key = &base.predicted[0];
    let mut frames = Vec::with_capacity(n);
    let mut enhanced_frames = Vec::with_capacity(n);
    for (t, chunk) in layer.residues.iter().enumerate() {
        let base_frame = &base.video.frames()[t];
        let Some(chunk) = chunk else {
            frames.push(base_frame.clone());
            enhanced_frames.push(false);
            continue;
        };
        let r = decode_frame(chunk, None).map_err(|e| wrap(e, Some(t)))?;
        if !r.same_dims(base_frame) {
            return Err(wrap(Error::Decode(format!("residue is {}x{}", r.width, r.height)), Some(t)));
        }
        let generated = generate_predicted_frame(key, &refined[0], &refined[t]).map_err(|e| wrap(e, Some(t)))?;
        frames.push(add_residues(&generated, &[&base.residue[t], &r]));
        enhanced_frames.push(true);
    }
    Ok(EnhancedClip {
        video: VideoClip::new(frames, base.video.fps())?,
        layer: Layer::Enhanced,
        enhanced_frames,
    })
}

/// Decodes the base layer and, when `b_dv` is given, the enhancement on top.
pub fn decode_enhanced(base: &LayeredStreams, b_dv: Option<&[u8]>) -> Result<EnhancedClip> {
    let decoded = decode_predictive_clip(base)?;
    match b_dv {
        Some(bytes) => enhance_decoded(&decoded, bytes),
        None => Ok(EnhancedClip {
            enhanced_frames: vec![false; decoded.video.len()],
            video: decoded.video,
            layer: Layer::Base,
        }),
    }
}

/// Keypoints a machine consumer would use with the enhancement applied.
pub fn decode_refined_keypoints(b_f: &[u8], b_dv: &[u8]) -> Result<Vec<KeypointSet>> {
    let base = decode_keypoints(b_f)?;
    EnhancementLayer::from_bytes(b_dv)
        .and_then(|l| l.refined_keypoints(&base))
        .map_err(|e| e.in_stream(StreamKind::Enhancement, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::pipeline::{encode_predictive_clip, encode_with_keypoints};
    use crate::metrics::psnr;

    fn moving(t: usize) -> Frame {
        Frame::from_fn(64, 64, move |x, y| {
            let inside = (16 + 3 * t..36 + 3 * t).contains(&x) && (20..40).contains(&y);
            if inside {
                (150 + (x - 3 * t) * 4 % 60 + y % 7) as u8
            } else {
                (40 + (x / 8 + y / 8) % 3 * 10) as u8
            }
        })
    }

    fn clip() -> VideoClip {
        VideoClip::new((0..4).map(moving).collect(), 30.0).unwrap()
    }

    #[test]
    fn layer_round_trip_and_fallback() {
        let v = clip();
        let cfg = ExtractorConfig { keypoints: 6, ..ExtractorConfig::default() };
        let (base, _) = encode_predictive_clip(&v, &cfg, 32, 37).unwrap();
        let dv = encode_enhancement(&v, &base, &cfg, &RefineConfig { extra_points: 3, qp: 27 }).unwrap();
        let layer = EnhancementLayer::from_bytes(&dv).unwrap();
        assert_eq!(layer.to_bytes().unwrap(), dv);

        let enhanced = decode_enhanced(&base, Some(&dv)).unwrap();
        let plain = decode_enhanced(&base, None).unwrap();
        assert_eq!(plain.layer, Layer::Base);
        assert_eq!(enhanced.layer, Layer::Enhanced);
        for t in 0..v.len() {
            let e = psnr(&enhanced.video.frames()[t], &v.frames()[t]).unwrap().value;
            let b = psnr(&plain.video.frames()[t], &v.frames()[t]).unwrap().value;
            assert!(e >= b, "frame {t}: {e} < {b}");
        }
        let two_step = enhance_decoded(&decode_predictive_clip(&base).unwrap(), &dv).unwrap();
        assert_eq!(two_step, enhanced);
    }

    #[test]
    fn lattice_positions_give_zero_delta() {
        let v = clip();
        let sets: Vec<KeypointSet> = (0..v.len())
            .map(|t| KeypointSet {
                frame_index: t,
                points: vec![Keypoint::isotropic(26.0 + 4.0 * t as f64, 30.0, 64.0)],
            })
            .collect();
        let (base, _) = encode_with_keypoints(&v, &sets, 32, 37).unwrap();
        let dv = encode_enhancement_with_keypoints(&v, &base, &sets, &RefineConfig { extra_points: 0, qp: 32 }).unwrap();
        let layer = EnhancementLayer::from_bytes(&dv).unwrap();
        assert!(layer.delta.iter().flat_map(|s| &s.points).all(|p| *p == QuantizedKeypoint { qx: 0, qy: 0, qc: [0; 4] }));
        let refined = layer.refined_keypoints(&decode_keypoints(&base.b_f).unwrap()).unwrap();
        assert_eq!(refined, decode_keypoints(&base.b_f).unwrap());
    }

    #[test]
    fn flat_incremental_residue_keeps_base() {
        let v = clip();
        let (base, report) = encode_predictive_clip(&v, &ExtractorConfig::default(), 32, 37).unwrap();
        let zero = |q: &QuantizedKeypointSet| QuantizedKeypointSet {
            frame_index: q.frame_index,
            points: vec![QuantizedKeypoint { qx: 0, qy: 0, qc: [0; 4] }; q.points.len()],
        };
        let flat = Frame::filled(64, 64, 128);
        let cfg = CodecConfig::new(4, Gop::AllIntra).unwrap();
        let layer = EnhancementLayer {
            extra_points: 0,
            qp: 4,
            delta: report.keypoints.iter().map(zero).collect(),
            residues: (0..v.len()).map(|_| Some(encode_frame(&flat, None, &cfg).unwrap().0)).collect(),
        };
        let out = decode_enhanced(&base, Some(&layer.to_bytes().unwrap())).unwrap();
        let plain = decode_predictive_clip(&base).unwrap();
        for (a, b) in out.video.frames().iter().zip(plain.video.frames()) {
            assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.abs_diff(*y) <= 1));
        }
    }

    #[test]
    fn bad_flag_is_enhancement_error() {
        let v = clip();
        let (base, _) = encode_predictive_clip(&v, &ExtractorConfig::default(), 32, 37).unwrap();
        let mut dv = encode_enhancement(&v, &base, &ExtractorConfig::default(), &RefineConfig::default()).unwrap();
        let n = dv.len();
        dv.truncate(n - 1);
        assert!(matches!(
            decode_enhanced(&base, Some(&dv)),
            Err(Error::Stream { kind: StreamKind::Enhancement, .. })
        ));
    }
}
