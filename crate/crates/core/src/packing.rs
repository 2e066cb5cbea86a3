//! Feature tensor packing: 8-bit quantization and the three plane
//! arrangements (concatenation, distance-ordered concatenation, tiling),
//! plus cross-level feature prediction.

use crate::codec::{self, CodecConfig, Gop};
use crate::error::{Error, Result};
use crate::model::{FeatureTensor, Frame, VideoClip};
use crate::wire::{put_blob, Cursor};

const ALIGN: usize = 8;

/// Global min-max mapping between tensor values and 8-bit codes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantMeta {
    pub v_min: f32,
    pub v_max: f32,
}

impl QuantMeta {
    pub const BIT_DEPTH: u8 = 8;

    pub fn degenerate(&self) -> bool {
        self.v_max == self.v_min
    }

    fn span(&self) -> f64 {
        self.v_max as f64 - self.v_min as f64
    }

    pub fn quantize(&self, v: f32) -> u8 {
        if self.degenerate() {
            return 0;
        }
        let scaled = (v as f64 - self.v_min as f64) * 255.0 / self.span();
        (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
    }

    pub fn dequantize(&self, code: u8) -> f32 {
        if self.degenerate() {
            return self.v_min;
        }
        (self.v_min as f64 + code as f64 * self.span() / 255.0) as f32
    }

    /// Worst-case reconstruction error of the mapping.
    pub fn half_step(&self) -> f64 {
        self.span() / 510.0
    }
}

/// Quantizes every channel to 8-bit codes.
pub fn quantize_tensor(t: &FeatureTensor) -> Result<(Vec<Vec<u8>>, QuantMeta)> {
    t.validate()?;
    let (v_min, v_max) = t.range();
    let meta = QuantMeta { v_min, v_max };
    let planes = (0..t.channels())
        .map(|c| t.channel(c).iter().map(|&v| meta.quantize(v)).collect())
        .collect();
    Ok((planes, meta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackMode {
    /// One plane per channel in original order.
    Concat,
    /// One plane per channel, ordered by a greedy nearest-neighbour chain
    /// starting from channel 0.
    DDConcat,
    /// All channels in a single near-square mosaic.
    Tile,
}

impl PackMode {
    fn code(self) -> u8 {
        match self {
            PackMode::Concat => 0,
            PackMode::DDConcat => 1,
            PackMode::Tile => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(PackMode::Concat),
            1 => Ok(PackMode::DDConcat),
            2 => Ok(PackMode::Tile),
            _ => Err(Error::Format(format!("unknown packing mode {c}"))),
        }
    }
}

impl std::str::FromStr for PackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "concat" => Ok(PackMode::Concat),
            "ddconcat" => Ok(PackMode::DDConcat),
            "tile" => Ok(PackMode::Tile),
            _ => Err(Error::Contract(format!("unknown packing mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedPlanes {
    pub mode: PackMode,
    pub planes: Vec<Frame>,
    /// `channel_order[i]` is the channel stored in plane `i` (Concat and
    /// DDConcat) or in mosaic cell `i` (Tile).
    pub channel_order: Vec<usize>,
    pub pad_right: usize,
    pub pad_bottom: usize,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub network_id: String,
    pub layer_id: String,
    pub quant: QuantMeta,
}

fn l2_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Channel 0 first, then repeatedly the unused channel closest (L2) to the
/// previously placed one; ties go to the lower index.
pub fn dd_channel_order(t: &FeatureTensor) -> Vec<usize> {
    let c = t.channels();
    let mut used = vec![false; c];
    let mut order = Vec::with_capacity(c);
    let mut cur = 0;
    used[0] = true;
    order.push(0);
    while order.len() < c {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..c).filter(|&j| !used[j]) {
            let d = l2_distance(t.channel(cur), t.channel(j));
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.unwrap();
        used[j] = true;
        order.push(j);
        cur = j;
    }
    order
}

/// Sum of L2 distances between consecutive channels in `order`.
pub fn successive_distance(t: &FeatureTensor, order: &[usize]) -> f64 {
    order
        .windows(2)
        .map(|w| l2_distance(t.channel(w[0]), t.channel(w[1])))
        .sum()
}

fn align(v: usize) -> usize {
    v.div_ceil(ALIGN) * ALIGN
}

pub fn tile_grid(channels: usize) -> (usize, usize) {
    let mut cols = (channels as f64).sqrt().ceil() as usize;
    while cols * cols < channels {
        cols += 1;
    }
    while cols > 1 && (cols - 1) * (cols - 1) >= channels {
        cols -= 1;
    }
    (cols, channels.div_ceil(cols))
}

pub fn pack_tensor(t: &FeatureTensor, mode: PackMode) -> Result<PackedPlanes> {
    let (codes, quant) = quantize_tensor(t)?;
    let (c, h, w) = t.dims();
    let mut packed = PackedPlanes {
        mode,
        planes: Vec::new(),
        channel_order: (0..c).collect(),
        pad_right: 0,
        pad_bottom: 0,
        grid_cols: 0,
        grid_rows: 0,
        channels: c,
        height: h,
        width: w,
        network_id: t.network_id.clone(),
        layer_id: t.layer_id.clone(),
        quant,
    };
    match mode {
        PackMode::Concat | PackMode::DDConcat => {
            if mode == PackMode::DDConcat {
                packed.channel_order = dd_channel_order(t);
            }
            let (pw, ph) = (align(w), align(h));
            packed.pad_right = pw - w;
            packed.pad_bottom = ph - h;
            packed.planes = packed
                .channel_order
                .iter()
                .map(|&ch| {
                    Frame::from_fn(pw, ph, |x, y| {
                        if x < w && y < h {
                            codes[ch][y * w + x]
                        } else {
                            0
                        }
                    })
                })
                .collect();
        }
        PackMode::Tile => {
            let (cols, rows) = tile_grid(c);
            packed.grid_cols = cols;
            packed.grid_rows = rows;
            let (mw, mh) = (cols * w, rows * h);
            let (pw, ph) = (align(mw), align(mh));
            packed.pad_right = pw - mw;
            packed.pad_bottom = ph - mh;
            let mosaic = Frame::from_fn(pw, ph, |x, y| {
                if x >= mw || y >= mh {
                    return 0;
                }
                let cell = (y / h) * cols + x / w;
                if cell < c {
                    codes[cell][(y % h) * w + x % w]
                } else {
                    0
                }
            });
            packed.planes = vec![mosaic];
        }
    }
    Ok(packed)
}

fn geometry_error(msg: impl Into<String>) -> Error {
    Error::Format(format!("inconsistent packed planes: {}", msg.into()))
}

impl PackedPlanes {
    fn check(&self) -> Result<()> {
        let (c, h, w) = (self.channels, self.height, self.width);
        if c == 0 || h == 0 || w == 0 {
            return Err(geometry_error("zero tensor dims"));
        }
        let mut seen = vec![false; c];
        if self.channel_order.len() != c {
            return Err(geometry_error("channel order length"));
        }
        for &ch in &self.channel_order {
            if ch >= c || seen[ch] {
                return Err(geometry_error("channel order is not a permutation"));
            }
            seen[ch] = true;
        }
        if self.mode == PackMode::DDConcat && self.channel_order[0] != 0 {
            return Err(geometry_error("DDConcat must start with channel 0"));
        }
        let (cw, ch_) = match self.mode {
            PackMode::Concat | PackMode::DDConcat => {
                if self.planes.len() != c {
                    return Err(geometry_error(format!("{} planes for {c} channels", self.planes.len())));
                }
                (w, h)
            }
            PackMode::Tile => {
                if self.planes.len() != 1 {
                    return Err(geometry_error("tiling uses exactly one plane"));
                }
                if self.grid_cols == 0 || self.grid_cols * self.grid_rows < c {
                    return Err(geometry_error("tile grid too small"));
                }
                (self.grid_cols * w, self.grid_rows * h)
            }
        };
        let (pw, ph) = (cw + self.pad_right, ch_ + self.pad_bottom);
        if let Some(p) = self.planes.iter().find(|p| p.width != pw || p.height != ph) {
            return Err(geometry_error(format!(
                "plane {}x{} but geometry implies {pw}x{ph}",
                p.width, p.height
            )));
        }
        if !self.quant.v_min.is_finite() || !self.quant.v_max.is_finite() || self.quant.v_min > self.quant.v_max {
            return Err(geometry_error("invalid quantization range"));
        }
        Ok(())
    }
}

/// Reverses padding, arrangement and quantization.
pub fn unpack_tensor(p: &PackedPlanes) -> Result<FeatureTensor> {
    p.check()?;
    let (c, h, w) = (p.channels, p.height, p.width);
    let mut values = vec![0f32; c * h * w];
    for (slot, &ch) in p.channel_order.iter().enumerate() {
        let dst = &mut values[ch * h * w..(ch + 1) * h * w];
        let (plane, ox, oy) = match p.mode {
            PackMode::Concat | PackMode::DDConcat => (&p.planes[slot], 0, 0),
            PackMode::Tile => {
                // Tile cells hold channels in natural order.
                (&p.planes[0], (ch % p.grid_cols) * w, (ch / p.grid_cols) * h)
            }
        };
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = p.quant.dequantize(plane.get(ox + x, oy + y));
            }
        }
    }
    FeatureTensor::new(p.network_id.clone(), p.layer_id.clone(), c, h, w, values)
}

/// How the 8-bit planes are stored in a packed-feature payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneCoding {
    /// Planes stored verbatim; the only loss is quantization.
    Raw,
    /// Planes coded with the block codec (as a video when there are
    /// several).
    Codec(CodecConfig),
}

/// Serializes packed planes: mode byte, dims, labels, permutation, pads,
/// grid geometry, quantization range, then the planes.
pub fn encode_packed(p: &PackedPlanes, coding: PlaneCoding) -> Result<Vec<u8>> {
    p.check()?;
    let fits16 = |v: usize| v <= u16::MAX as usize;
    if !fits16(p.channels) || !fits16(p.pad_right) || !fits16(p.pad_bottom) || !fits16(p.grid_cols) || !fits16(p.grid_rows) {
        return Err(Error::Contract("packed geometry exceeds u16 fields".into()));
    }
    if p.network_id.len() > 255 || p.layer_id.len() > 255 {
        return Err(Error::Validation("labels are limited to 255 bytes".into()));
    }
    let mut out = Vec::new();
    out.push(p.mode.code());
    for d in [p.channels, p.height, p.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for label in [&p.network_id, &p.layer_id] {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    for &ch in &p.channel_order {
        out.extend_from_slice(&(ch as u16).to_le_bytes());
    }
    for v in [p.pad_right, p.pad_bottom, p.grid_cols, p.grid_rows] {
        out.extend_from_slice(&(v as u16).to_le_bytes());
    }
    out.extend_from_slice(&p.quant.v_min.to_le_bytes());
    out.extend_from_slice(&p.quant.v_max.to_le_bytes());
    match coding {
        PlaneCoding::Raw => {
            out.push(0);
            out.extend_from_slice(&(p.planes.len() as u32).to_le_bytes());
            for plane in &p.planes {
                out.extend_from_slice(&plane.samples);
            }
        }
        PlaneCoding::Codec(cfg) => {
            out.push(1);
            let clip = VideoClip::new(p.planes.clone(), 1.0)?;
            let (chunks, _) = codec::encode_clip(&clip, &cfg)?;
            put_blob(&mut out, &codec::write_chunk_list(&chunks));
        }
    }
    Ok(out)
}

/// Parses a packed-feature payload, decoding coded planes if needed.
pub fn decode_packed(bytes: &[u8]) -> Result<PackedPlanes> {
    let mut c = Cursor::new(bytes, "packed feature planes");
    let mode = PackMode::from_code(c.u8()?)?;
    let channels = c.u32()? as usize;
    let height = c.u32()? as usize;
    let width = c.u32()? as usize;
    let mut labels = Vec::new();
    for _ in 0..2 {
        let n = c.u8()? as usize;
        let raw = c.take(n)?;
        labels.push(
            String::from_utf8(raw.to_vec()).map_err(|_| Error::Format("label is not UTF-8".into()))?,
        );
    }
    if channels > c.remaining() / 2 {
        return Err(Error::Format(format!("{channels} channels cannot fit the payload")));
    }
    let channel_order = (0..channels)
        .map(|_| c.u16().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let pad_right = c.u16()? as usize;
    let pad_bottom = c.u16()? as usize;
    let grid_cols = c.u16()? as usize;
    let grid_rows = c.u16()? as usize;
    let quant = QuantMeta {
        v_min: c.f32()?,
        v_max: c.f32()?,
    };
    let (pw, ph) = match mode {
        PackMode::Tile => (grid_cols.saturating_mul(width), grid_rows.saturating_mul(height)),
        _ => (width, height),
    };
    let (pw, ph) = (pw.saturating_add(pad_right), ph.saturating_add(pad_bottom));
    let planes = match c.u8()? {
        0 => {
            let n = c.u32()? as usize;
            let plane_len = pw.checked_mul(ph).filter(|&l| l > 0)
                .ok_or_else(|| Error::Format("invalid plane geometry".into()))?;
            if n.checked_mul(plane_len) != Some(c.remaining()) {
                return Err(Error::Format(format!(
                    "{n} raw planes of {pw}x{ph} do not match {} payload bytes",
                    c.remaining()
                )));
            }
            (0..n)
                .map(|_| Frame::new(pw, ph, c.take(plane_len)?.to_vec()))
                .collect::<Result<Vec<_>>>()?
        }
        1 => {
            let chunks = codec::read_chunk_list(c.blob()?)?;
            if chunks.is_empty() {
                return Err(Error::Format("no coded planes".into()));
            }
            codec::decode_clip(&chunks, 1.0)?.into_frames()
        }
        other => return Err(Error::Format(format!("unknown plane coding {other}"))),
    };
    c.finish()?;
    let [network_id, layer_id]: [String; 2] = labels.try_into().unwrap();
    let p = PackedPlanes {
        mode,
        planes,
        channel_order,
        pad_right,
        pad_bottom,
        grid_cols,
        grid_rows,
        channels,
        height,
        width,
        network_id,
        layer_id,
        quant,
    };
    p.check()?;
    Ok(p)
}

/// Default group-of-pictures used when packed planes go through the codec.
pub fn plane_gop(mode: PackMode) -> Gop {
    match mode {
        PackMode::Tile => Gop::AllIntra,
        _ => Gop::Ippp,
    }
}

/// Cross-level feature predictor `G(F^j, i)`.
#[derive(Debug, Clone)]
pub enum Predictor {
    Identity,
    Resample,
    /// Per-channel affine map fitted on (source, target) calibration pairs.
    LinearMap(Vec<(FeatureTensor, FeatureTensor)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub tensor: FeatureTensor,
    /// Set when a least-squares fit was singular and the channel fell back
    /// to plain resampling.
    pub fell_back: bool,
}

/// Bilinear spatial resampling with corner alignment, plus channel
/// truncation or zero extension.
pub fn resample(source: &FeatureTensor, shape: (usize, usize, usize)) -> Result<FeatureTensor> {
    let (c, h, w) = shape;
    let (sc, sh, sw) = source.dims();
    let coord = |dst: usize, dst_len: usize, src_len: usize| -> (usize, usize, f64) {
        if dst_len == 1 || src_len == 1 {
            return (0, 0, 0.0);
        }
        let pos = dst as f64 * (src_len - 1) as f64 / (dst_len - 1) as f64;
        let i0 = (pos.floor() as usize).min(src_len - 1);
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, pos - i0 as f64)
    };
    let mut values = vec![0f32; c * h * w];
    for ch in 0..c.min(sc) {
        for y in 0..h {
            let (y0, y1, fy) = coord(y, h, sh);
            for x in 0..w {
                let (x0, x1, fx) = coord(x, w, sw);
                let v = |yy, xx| source.get(ch, yy, xx) as f64;
                let top = v(y0, x0) * (1.0 - fx) + v(y0, x1) * fx;
                let bottom = v(y1, x0) * (1.0 - fx) + v(y1, x1) * fx;
                values[(ch * h + y) * w + x] = (top * (1.0 - fy) + bottom * fy) as f32;
            }
        }
    }
    FeatureTensor::new(source.network_id.clone(), source.layer_id.clone(), c, h, w, values)
}

pub fn predict_feature(
    source: &FeatureTensor,
    target_shape: (usize, usize, usize),
    predictor: &Predictor,
) -> Result<Prediction> {
    match predictor {
        Predictor::Identity => {
            if source.dims() != target_shape {
                return Err(Error::Contract(format!(
                    "identity predictor needs matching shapes, got {:?} -> {:?}",
                    source.dims(),
                    target_shape
                )));
            }
            Ok(Prediction {
                tensor: source.clone(),
                fell_back: false,
            })
        }
        Predictor::Resample => Ok(Prediction {
            tensor: resample(source, target_shape)?,
            fell_back: false,
        }),
        Predictor::LinearMap(pairs) => {
            if pairs.is_empty() {
                return Err(Error::Contract("linear map needs calibration pairs".into()));
            }
            for (s, t) in pairs {
                if s.channels() != source.channels() || t.channels() != target_shape.0 {
                    return Err(Error::Contract(format!(
                        "calibration pair has {}->{} channels, expected {}->{}",
                        s.channels(),
                        t.channels(),
                        source.channels(),
                        target_shape.0
                    )));
                }
            }
            let calib: Vec<(FeatureTensor, FeatureTensor)> = pairs
                .iter()
                .map(|(s, t)| Ok((resample(s, t.dims())?, t.clone())))
                .collect::<Result<_>>()?;
            let base = resample(source, target_shape)?;
            let mut fell_back = false;
            let mut values = base.values().to_vec();
            let plane = target_shape.1 * target_shape.2;
            for ch in 0..target_shape.0 {
                let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (x, y) in &calib {
                    for (a, b) in x.channel(ch).iter().zip(y.channel(ch)) {
                        let (a, b) = (*a as f64, *b as f64);
                        n += 1.0;
                        sx += a;
                        sy += b;
                        sxx += a * a;
                        sxy += a * b;
                    }
                }
                let var = sxx - sx * sx / n;
                let (gain, offset) = if var > 1e-12 * n.max(1.0) * (1.0 + sxx / n) {
                    let gain = (sxy - sx * sy / n) / var;
                    (gain, (sy - gain * sx) / n)
                } else {
                    fell_back = true;
                    (1.0, 0.0)
                };
                for v in &mut values[ch * plane..(ch + 1) * plane] {
                    *v = (gain * *v as f64 + offset) as f32;
                }
            }
            Ok(Prediction {
                tensor: FeatureTensor::new(
                    base.network_id.clone(),
                    base.layer_id.clone(),
                    target_shape.0,
                    target_shape.1,
                    target_shape.2,
                    values,
                )?,
                fell_back,
            })
        }
    }
}

/// `target - prediction`, the quantity that gets coded.
pub fn feature_residual(target: &FeatureTensor, prediction: &FeatureTensor) -> Result<FeatureTensor> {
    elementwise(target, prediction, |a, b| a - b)
}

/// `prediction + residual`, the decoder-side reconstruction.
pub fn reconstruct_feature(prediction: &FeatureTensor, residual: &FeatureTensor) -> Result<FeatureTensor> {
    elementwise(prediction, residual, |a, b| a + b)
}

fn elementwise(a: &FeatureTensor, b: &FeatureTensor, f: impl Fn(f32, f32) -> f32) -> Result<FeatureTensor> {
    if a.dims() != b.dims() {
        return Err(Error::Contract(format!("shape mismatch {:?} vs {:?}", a.dims(), b.dims())));
    }
    let (c, h, w) = a.dims();
    let values = a.values().iter().zip(b.values()).map(|(x, y)| f(*x, *y)).collect();
    FeatureTensor::new(a.network_id.clone(), a.layer_id.clone(), c, h, w, values)
}
