//! Shared data model: feature tensors, luma frames, clips and keypoints,
//! plus the `VCMT` tensor file format and headerless raw-luma video.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"VCMT";
pub const TENSOR_VERSION: u8 = 1;

pub const DEFAULT_FPS: f64 = 30.0;

/// A C×H×W float feature map taken from some layer of some network.
///
/// Values are stored channel-major, then row-major within a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub network_id: String,
    pub layer_id: String,
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(
        network_id: impl Into<String>,
        layer_id: impl Into<String>,
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        let t = FeatureTensor {
            network_id: network_id.into(),
            layer_id: layer_id.into(),
            channels,
            height,
            width,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    /// All-zero tensor with empty labels.
    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        let len = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::Validation("tensor dimensions overflow".into()))?;
        Self::new("", "", channels, height, width, vec![0.0; len])
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Validation(format!(
                "tensor dims must be positive, got {}x{}x{}",
                self.channels, self.height, self.width
            )));
        }
        let expected = self.channels * self.height * self.width;
        if self.values.len() != expected {
            return Err(Error::Validation(format!(
                "tensor holds {} values, dims require {expected}",
                self.values.len()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite tensor value {} at index {i}",
                self.values[i]
            )));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.values[(c * self.height + y) * self.width + x]
    }

    /// Smallest and largest value.
    pub fn range(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Encodes the tensor in `VCMT` layout. Fails validation before
    /// anything is written.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let net = self.network_id.as_bytes();
        let layer = self.layer_id.as_bytes();
        if net.len() > u8::MAX as usize || layer.len() > u8::MAX as usize {
            return Err(Error::Validation("labels are limited to 255 bytes".into()));
        }
        let dims_fit = [self.channels, self.height, self.width]
            .iter()
            .all(|&d| d <= u32::MAX as usize);
        if !dims_fit {
            return Err(Error::Validation("tensor dims exceed u32".into()));
        }
        let mut out = Vec::with_capacity(19 + net.len() + layer.len() + 4 * self.values.len());
        out.extend_from_slice(TENSOR_MAGIC);
        out.push(TENSOR_VERSION);
        for d in [self.channels, self.height, self.width] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(net.len() as u8);
        out.extend_from_slice(net);
        out.push(layer.len() as u8);
        out.extend_from_slice(layer);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut slice = bytes;
        let t = read_tensor_file(&mut slice)?;
        if !slice.is_empty() {
            return Err(Error::Format(format!(
                "{} trailing bytes after tensor",
                slice.len()
            )));
        }
        Ok(t)
    }
}

/// Writes `t` in `VCMT` format, returning the number of bytes emitted.
pub fn write_tensor_file<W: Write>(t: &FeatureTensor, mut sink: W) -> Result<usize> {
    let bytes = t.to_bytes()?;
    sink.write_all(&bytes)?;
    Ok(bytes.len())
}

/// Reads exactly one `VCMT` tensor from `source`, leaving any following
/// bytes unread.
pub fn read_tensor_file<R: Read>(source: &mut R) -> Result<FeatureTensor> {
    let mut consumed = 0usize;
    let mut fixed = [0u8; 17];
    read_counted(source, &mut fixed, &mut consumed, "tensor header")?;
    if &fixed[..4] != TENSOR_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02x?}, expected \"VCMT\"",
            &fixed[..4]
        )));
    }
    if fixed[4] != TENSOR_VERSION {
        return Err(Error::Format(format!(
            "unsupported tensor version {}",
            fixed[4]
        )));
    }
    let dim = |i: usize| u32::from_le_bytes(fixed[5 + 4 * i..9 + 4 * i].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));

    let network_id = read_label(source, &mut consumed)?;
    let layer_id = read_label(source, &mut consumed)?;

    let count = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Validation(format!("invalid tensor dims {c}x{h}x{w}")))?;
    let payload_len = count
        .checked_mul(4)
        .ok_or_else(|| Error::Validation("tensor payload overflows".into()))?;
    let mut payload = Vec::new();
    source
        .take(payload_len as u64)
        .read_to_end(&mut payload)?;
    if payload.len() < payload_len {
        return Err(Error::Truncated {
            what: "tensor payload",
            expected: consumed + payload_len,
            actual: consumed + payload.len(),
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureTensor::new(network_id, layer_id, c, h, w, values)
}

fn read_counted<R: Read>(
    source: &mut R,
    buf: &mut [u8],
    consumed: &mut usize,
    what: &'static str,
) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Truncated {
                    what,
                    expected: *consumed + buf.len(),
                    actual: *consumed + filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    *consumed += buf.len();
    Ok(())
}

fn read_label<R: Read>(source: &mut R, consumed: &mut usize) -> Result<String> {
    let mut len = [0u8; 1];
    read_counted(source, &mut len, consumed, "tensor label")?;
    let mut raw = vec![0u8; len[0] as usize];
    read_counted(source, &mut raw, consumed, "tensor label")?;
    String::from_utf8(raw).map_err(|_| Error::Format("tensor label is not UTF-8".into()))
}

/// Single-plane 8-bit luma picture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if samples.len() != width * height {
            return Err(Error::Validation(format!(
                "frame {width}x{height} needs {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Frame {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Frame {
            width,
            height,
            samples,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.samples[y * self.width + x] = v;
    }

    /// Sample with coordinates clamped into the picture.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Zero-pads on the right and bottom so both dims are multiples of `m`.
    pub fn padded_to_multiple(&self, m: usize) -> Frame {
        let w = self.width.div_ceil(m) * m;
        let h = self.height.div_ceil(m) * m;
        if w == self.width && h == self.height {
            return self.clone();
        }
        let mut out = Frame::filled(w, h, 0);
        for y in 0..self.height {
            out.samples[y * w..y * w + self.width]
                .copy_from_slice(&self.samples[y * self.width..(y + 1) * self.width]);
        }
        out
    }

    /// Top-left `width`×`height` region.
    pub fn cropped(&self, width: usize, height: usize) -> Frame {
        Frame::from_fn(width, height, |x, y| self.get(x, y))
    }
}

/// An ordered sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    frames: Vec<Frame>,
    fps: f64,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Validation("clip needs at least one frame".into()))?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Validation(format!("fps must be positive, got {fps}")));
        }
        if let Some(i) = frames.iter().position(|f| !f.same_dims(first)) {
            return Err(Error::Validation(format!(
                "frame {i} is {}x{}, clip is {}x{}",
                frames[i].width, frames[i].height, first.width, first.height
            )));
        }
        Ok(VideoClip { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    /// Planar 8-bit bytes, frame after frame.
    pub fn to_raw(&self) -> Vec<u8> {
        self.frames.iter().flat_map(|f| f.samples.iter().copied()).collect()
    }
}

/// Reads `frame_count` headerless 8-bit luma frames.
pub fn read_raw_video<R: Read>(
    source: &mut R,
    width: usize,
    height: usize,
    frame_count: usize,
    fps: f64,
) -> Result<VideoClip> {
    if width == 0 || height == 0 || frame_count == 0 {
        return Err(Error::Validation(format!(
            "raw video geometry must be positive, got {width}x{height}x{frame_count}"
        )));
    }
    let frame_len = width
        .checked_mul(height)
        .ok_or_else(|| Error::Validation("frame size overflows".into()))?;
    let total = frame_len
        .checked_mul(frame_count)
        .ok_or_else(|| Error::Validation("clip size overflows".into()))?;
    let mut raw = Vec::new();
    source.take(total as u64).read_to_end(&mut raw)?;
    if raw.len() < total {
        return Err(Error::Truncated {
            what: "raw video",
            expected: total,
            actual: raw.len(),
        });
    }
    let frames = raw
        .chunks_exact(frame_len)
        .map(|c| Frame::new(width, height, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    VideoClip::new(frames, fps)
}

pub fn write_raw_video<W: Write>(clip: &VideoClip, mut sink: W) -> Result<usize> {
    let raw = clip.to_raw();
    sink.write_all(&raw)?;
    Ok(raw.len())
}

/// One sparse motion point: a position in pixels and the inverse of its
/// 2×2 covariance, row-major `[a, b, c, d]`.
///
/// The inverse covariance is expressed in normalised picture coordinates
/// where the frame spans [-1, 1] on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub inv_cov: [f64; 4],
}

impl Keypoint {
    pub fn isotropic(x: f64, y: f64, precision: f64) -> Self {
        Keypoint {
            x,
            y,
            inv_cov: [precision, 0.0, 0.0, precision],
        }
    }

    /// Builds a keypoint from a covariance matrix by inverting it.
    pub fn from_covariance(x: f64, y: f64, cov: [f64; 4]) -> Result<Self> {
        let inv = invert_2x2(cov)
            .ok_or_else(|| Error::Validation(format!("covariance {cov:?} is singular")))?;
        let kp = Keypoint { x, y, inv_cov: inv };
        kp.check_matrix()?;
        Ok(kp)
    }

    pub fn check_matrix(&self) -> Result<()> {
        if is_positive_definite(self.inv_cov) {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "inverse covariance {:?} is not symmetric positive-definite",
                self.inv_cov
            )))
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let inside = self.x >= 0.0
            && self.y >= 0.0
            && self.x < width as f64
            && self.y < height as f64;
        if !inside {
            return Err(Error::Validation(format!(
                "keypoint ({}, {}) outside {width}x{height}",
                self.x, self.y
            )));
        }
        self.check_matrix()
    }
}

pub(crate) fn is_positive_definite(m: [f64; 4]) -> bool {
    let [a, b, c, d] = m;
    m.iter().all(|v| v.is_finite()) && (b - c).abs() <= 1e-6 && a > 0.0 && a * d - b * c > 0.0
}

pub(crate) fn invert_2x2(m: [f64; 4]) -> Option<[f64; 4]> {
    let [a, b, c, d] = m;
    let det = a * d - b * c;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([d / det, -b / det, -c / det, a / det])
}

/// The K keypoints describing one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    pub frame_index: usize,
    pub points: Vec<Keypoint>,
}

/// Checks that every set in a clip carries the same number of points.
pub fn common_point_count(sets: &[KeypointSet]) -> Result<usize> {
    let k = sets.first().map_or(0, |s| s.points.len());
    if let Some(s) = sets.iter().find(|s| s.points.len() != k) {
        return Err(Error::Contract(format!(
            "frame {} has {} keypoints, expected {k}",
            s.frame_index,
            s.points.len()
        )));
    }
    Ok(k)
}

/// Maps every frame index t to the index of the key frame it is
/// predicted from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyFrameSchedule {
    key_of: Vec<usize>,
}

impl KeyFrameSchedule {
    pub fn new(key_of: Vec<usize>) -> Result<Self> {
        for (t, &k) in key_of.iter().enumerate() {
            if k > t || key_of[k] != k {
                return Err(Error::Validation(format!(
                    "frame {t} maps to {k}, which is not a key frame at or before it"
                )));
            }
        }
        Ok(KeyFrameSchedule { key_of })
    }

    /// Only frame 0 is a key frame.
    pub fn first_frame(frame_count: usize) -> Self {
        KeyFrameSchedule {
            key_of: vec![0; frame_count],
        }
    }

    pub fn key_of(&self, t: usize) -> usize {
        self.key_of[t]
    }

    pub fn is_key(&self, t: usize) -> bool {
        self.key_of[t] == t
    }

    pub fn len(&self) -> usize {
        self.key_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key_of.is_empty()
    }

    pub fn key_frames(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.key_of.len()).filter(|&t| self.is_key(t))
    }
}
