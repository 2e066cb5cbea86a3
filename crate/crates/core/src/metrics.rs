//! Quality and rate metrics: PSNR, SSIM, compression rate, bitrate and
//! feature fidelity.

use std::io::{Read, Write};
use std::process::{Command, Stdio};

use crate::error::{Error, Result};
use crate::model::{FeatureTensor, Frame, VideoClip};

/// PSNR reported for identical inputs.
pub const LOSSLESS_PSNR: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 255.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub metric_id: &'static str,
    pub value: f64,
    pub lossless: bool,
}

fn check_same(a: &Frame, b: &Frame) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::Contract(format!(
            "frame dims differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

fn sse(a: &Frame, b: &Frame) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

fn psnr_from_mse(mse: f64) -> MetricResult {
    if mse == 0.0 {
        MetricResult {
            metric_id: "psnr",
            value: LOSSLESS_PSNR,
            lossless: true,
        }
    } else {
        MetricResult {
            metric_id: "psnr",
            value: 10.0 * (PEAK * PEAK / mse).log10(),
            lossless: false,
        }
    }
}

pub fn psnr(a: &Frame, b: &Frame) -> Result<MetricResult> {
    check_same(a, b)?;
    Ok(psnr_from_mse(sse(a, b) / a.samples.len() as f64))
}

/// Clip PSNR from the mean of per-frame MSE.
pub fn psnr_clip(a: &VideoClip, b: &VideoClip) -> Result<MetricResult> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "clips have {} and {} frames",
            a.len(),
            b.len()
        )));
    }
    let mut total = 0.0;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        check_same(fa, fb)?;
        total += sse(fa, fb) / fa.samples.len() as f64;
    }
    Ok(psnr_from_mse(total / a.len() as f64))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Separable Gaussian filter over valid positions only.
fn filter_valid(src: &[f64], width: usize, height: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        for x in 0..ow {
            horiz[y * ow + x] = (0..SSIM_WINDOW).map(|k| win[k] * src[y * width + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| win[k] * horiz[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5).
pub fn ssim(a: &Frame, b: &Frame) -> Result<MetricResult> {
    check_same(a, b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::Contract(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            a.width, a.height
        )));
    }
    if a.samples == b.samples {
        return Ok(MetricResult {
            metric_id: "ssim",
            value: 1.0,
            lossless: true,
        });
    }
    let (w, h) = (a.width, a.height);
    let win = gaussian_window();
    let fa: Vec<f64> = a.samples.iter().map(|&v| v as f64).collect();
    let fb: Vec<f64> = b.samples.iter().map(|&v| v as f64).collect();
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = filter_valid(&fa, w, h, &win);
    let mu_b = filter_valid(&fb, w, h, &win);
    let e_aa = filter_valid(&prod(&fa, &fa), w, h, &win);
    let e_bb = filter_valid(&prod(&fb, &fb), w, h, &win);
    let e_ab = filter_valid(&prod(&fa, &fb), w, h, &win);
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(MetricResult {
        metric_id: "ssim",
        value: sum / mu_a.len() as f64,
        lossless: false,
    })
}

/// Mean per-frame SSIM.
pub fn ssim_clip(a: &VideoClip, b: &VideoClip) -> Result<MetricResult> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "clips have {} and {} frames",
            a.len(),
            b.len()
        )));
    }
    let mut sum = 0.0;
    let mut lossless = true;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        let m = ssim(fa, fb)?;
        sum += m.value;
        lossless &= m.lossless;
    }
    Ok(MetricResult {
        metric_id: "ssim",
        value: sum / a.len() as f64,
        lossless,
    })
}

/// Compressed size over original size, so 0.001 means 1000× smaller.
pub fn compression_rate(original_bytes: usize, compressed_bytes: usize) -> Result<f64> {
    if original_bytes == 0 {
        return Err(Error::Contract("original size must be positive".into()));
    }
    Ok(compressed_bytes as f64 / original_bytes as f64)
}

pub fn bitrate_kbps(total_bytes: usize, frame_count: usize, fps: f64) -> Result<f64> {
    if frame_count == 0 {
        return Err(Error::Contract("frame count must be positive".into()));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Contract(format!("fps must be positive, got {fps}")));
    }
    Ok(total_bytes as f64 * 8.0 * fps / frame_count as f64 / 1000.0)
}

#[derive(Debug, Clone)]
pub enum FidelityKind {
    CosineSim,
    OneMinusNmse,
    /// Program and arguments of a process that reads two `VCMT` tensors
    /// (original, then reconstruction) on stdin and prints one number.
    ExternalOracle(Vec<String>),
}

pub fn feature_fidelity(
    original: &FeatureTensor,
    reconstructed: &FeatureTensor,
    kind: &FidelityKind,
) -> Result<MetricResult> {
    let builtin = |id: &'static str, value: f64| MetricResult {
        metric_id: id,
        value,
        lossless: original.values() == reconstructed.values(),
    };
    match kind {
        FidelityKind::CosineSim | FidelityKind::OneMinusNmse => {
            if original.dims() != reconstructed.dims() {
                return Err(Error::Contract(format!(
                    "tensor shapes differ: {:?} vs {:?}",
                    original.dims(),
                    reconstructed.dims()
                )));
            }
        }
        FidelityKind::ExternalOracle(_) => {}
    }
    let pairs = || original.values().iter().zip(reconstructed.values()).map(|(a, b)| (*a as f64, *b as f64));
    match kind {
        FidelityKind::CosineSim => {
            let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
            for (a, b) in pairs() {
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            let value = if na == 0.0 && nb == 0.0 {
                1.0
            } else if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na.sqrt() * nb.sqrt())
            };
            Ok(builtin("cosine", value))
        }
        FidelityKind::OneMinusNmse => {
            let (mut err, mut energy) = (0.0, 0.0);
            for (a, b) in pairs() {
                err += (a - b) * (a - b);
                energy += a * a;
            }
            let value = if err == 0.0 {
                1.0
            } else if energy == 0.0 {
                0.0
            } else {
                (1.0 - err / energy).max(0.0)
            };
            Ok(builtin("one_minus_nmse", value))
        }
        FidelityKind::ExternalOracle(cmd) => {
            let value = run_oracle(cmd, original, reconstructed)?;
            Ok(MetricResult {
                metric_id: "external",
                value,
                lossless: false,
            })
        }
    }
}

fn run_oracle(cmd: &[String], a: &FeatureTensor, b: &FeatureTensor) -> Result<f64> {
    let (program, args) = cmd
        .split_first()
        .ok_or_else(|| Error::Oracle("empty oracle command".into()))?;
    let mut input = a.to_bytes()?;
    input.extend_from_slice(&b.to_bytes()?);
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Oracle(format!("cannot start {program}: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || stdin.write_all(&input));
    let mut stdout = String::new();
    child
        .stdout
        .take()
        .expect("piped stdout")
        .read_to_string(&mut stdout)
        .map_err(|e| Error::Oracle(format!("reading oracle output: {e}")))?;
    let status = child
        .wait()
        .map_err(|e| Error::Oracle(format!("waiting for oracle: {e}")))?;
    // a broken pipe just means the oracle stopped reading early
    let _ = writer.join();
    if !status.success() {
        return Err(Error::Oracle(format!("{program} exited with {status}")));
    }
    stdout
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Oracle(format!("unparseable oracle output {:?}", stdout.trim())))
}

/// One row of a `frame,metric,value` dump.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub frame: Option<usize>,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(frame: Option<usize>, m: &MetricResult) -> Self {
        MetricRow {
            frame,
            metric: m.metric_id.to_string(),
            value: m.value,
        }
    }
}

pub fn write_metric_csv<W: Write>(rows: &[MetricRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["frame", "metric", "value"]).map_err(csv_err)?;
    for r in rows {
        let frame = r.frame.map_or_else(|| "all".to_string(), |f| f.to_string());
        w.write_record([frame, r.metric.clone(), format!("{:.6}", r.value)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}
