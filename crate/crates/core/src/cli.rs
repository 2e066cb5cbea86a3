//! The `vcm` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible
//! allocation. Output files are written to a temporary sibling and renamed
//! into place, so a failed run never leaves a partial file behind.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::codec::{encode_clip, total_bytes, CodecConfig, Gop, DEFAULT_SEARCH_RANGE};
use crate::container::{demux, demux_unverified, inspect, mux_streams, ContainerHeader};
use crate::error::{Error, Result, StreamKind};
use crate::generator::{
    decode_enhanced, decode_keypoints, decode_refined_keypoints, encode_enhancement, encode_predictive_clip,
    ExtractorConfig, LayeredStreams, RefineConfig,
};
use crate::metrics::{bitrate_kbps, csv_err, psnr, psnr_clip, ssim, ssim_clip, write_metric_csv, MetricRow};
use crate::model::{read_raw_video, read_tensor_file, write_raw_video, write_tensor_file, KeypointSet, VideoClip};
use crate::packing::{decode_packed, encode_packed, pack_tensor, plane_gop, unpack_tensor, PackMode, PlaneCoding};
use crate::rd::{allocate_budget, build_rd_curve, read_tasks_csv, write_rd_csv, Overheads, RdPoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vcm", version, about = "Joint pixel and feature video coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pack a VCMT feature tensor into planes and code them.
    FeatureEncode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Concat)]
        mode: ModeArg,
        /// Code planes with the pixel codec at this qp; without it planes
        /// are stored raw.
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=51))]
        qp: Option<u8>,
    },
    /// Recover a VCMT tensor from `feature-encode` output.
    FeatureDecode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Code a raw 8-bit luma clip with keypoint-driven prediction.
    ClipEncode {
        #[command(flatten)]
        clip: RawClipArgs,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 22, value_parser = clap::value_parser!(u8).range(0..=51))]
        qp_key: u8,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u8).range(0..=51))]
        qp_res: u8,
        #[arg(long, default_value_t = 20)]
        keypoints: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Also write the enhancement layer.
        #[arg(long)]
        enhance: bool,
        #[arg(long, default_value_t = 32, requires = "enhance", value_parser = clap::value_parser!(u8).range(0..=51))]
        qp_enh: u8,
        #[arg(long, default_value_t = 4, requires = "enhance")]
        extra_points: usize,
    },
    /// Decode a container to raw video, or to keypoints only.
    ClipDecode {
        #[arg(long)]
        input: PathBuf,
        /// Raw video, or keypoint CSV with `--machine-only`; stdout if absent.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Decode only the keypoint stream; pixel streams are not read.
        #[arg(long)]
        machine_only: bool,
        /// Ignore the enhancement layer.
        #[arg(long)]
        base_layer: bool,
    },
    /// Quality and rate metrics between two raw clips.
    Metrics {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        distorted: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long)]
        psnr: bool,
        #[arg(long)]
        ssim: bool,
        /// Report the bitrate of `--stream` over the clip's duration.
        #[arg(long, requires = "stream")]
        bitrate: bool,
        #[arg(long)]
        stream: Option<PathBuf>,
        /// CSV destination; stdout if absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep a qp grid over a clip and write the RD frontier.
    RdCurve {
        #[command(flatten)]
        clip: RawClipArgs,
        /// Parameter grid, `qp=12,22,32,42`.
        #[arg(long)]
        grid: String,
        #[arg(long, value_enum, default_value_t = PipelineArg::Pixel)]
        pipeline: PipelineArg,
        #[arg(long, value_enum, default_value_t = QualityArg::Psnr)]
        metric: QualityArg,
        #[arg(long, default_value_t = 20)]
        keypoints: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose one operating point per task under a rate budget.
    Allocate {
        /// Budget in Kbps.
        #[arg(long)]
        budget: f64,
        /// CSV with columns task_id,weight,level,rate_kbps,quality.
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        model_kbps: f64,
        #[arg(long, default_value_t = 0.0)]
        theta_kbps: f64,
        /// CSV destination; stdout if absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarise a container's header and streams.
    Inspect {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RawClipArgs {
    /// Headerless 8-bit luma frames.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// Defaults to every whole frame in the file.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Concat,
    Ddconcat,
    Tile,
}

impl From<ModeArg> for PackMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Concat => PackMode::Concat,
            ModeArg::Ddconcat => PackMode::DDConcat,
            ModeArg::Tile => PackMode::Tile,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PipelineArg {
    /// IPPP pixel coding.
    Pixel,
    /// Key frame plus keypoints plus residue, both qps from the grid.
    Predictive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QualityArg {
    Psnr,
    Ssim,
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Infeasible { .. } => EXIT_INFEASIBLE,
                _ => EXIT_DATA,
            }
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn emit(path: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => Ok(out.write_all(bytes)?),
    }
}

fn read_clip(a: &RawClipArgs) -> Result<VideoClip> {
    let bytes = fs::read(&a.input)?;
    let frame_len = a.width.checked_mul(a.height).filter(|&n| n > 0).ok_or_else(|| {
        Error::Validation(format!("frame size {}x{} is empty", a.width, a.height))
    })?;
    let frames = match a.frames {
        Some(n) => n,
        None => {
            if bytes.len() % frame_len != 0 {
                return Err(Error::Format(format!(
                    "{} bytes is not a whole number of {}x{} frames",
                    bytes.len(),
                    a.width,
                    a.height
                )));
            }
            bytes.len() / frame_len
        }
    };
    read_raw_video(&mut bytes.as_slice(), a.width, a.height, frames, a.fps)
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::FeatureEncode { input, output, mode, qp } => {
            let tensor = read_tensor_file(&mut fs::File::open(&input)?)?;
            let mode = PackMode::from(mode);
            let packed = pack_tensor(&tensor, mode)?;
            let coding = match qp {
                Some(qp) => PlaneCoding::Codec(CodecConfig {
                    qp,
                    gop: plane_gop(mode),
                    search_range: DEFAULT_SEARCH_RANGE,
                }),
                None => PlaneCoding::Raw,
            };
            let payload = encode_packed(&packed, coding)?;
            let plane = &packed.planes[0];
            let header = ContainerHeader::new(crate::model::DEFAULT_FPS, plane.width, plane.height, packed.planes.len())?;
            write_atomic(&output, &mux_streams(header, &[(StreamKind::PackedFeaturePlanes, payload)])?)
        }
        Command::FeatureDecode { input, output } => {
            let c = demux(&fs::read(&input)?)?;
            let payload = c
                .get(StreamKind::PackedFeaturePlanes)
                .ok_or_else(|| Error::Format("container holds no packed feature planes".into()))?;
            let packed = decode_packed(payload).map_err(|e| e.in_stream(StreamKind::PackedFeaturePlanes, None))?;
            let tensor = unpack_tensor(&packed)?;
            let mut bytes = Vec::new();
            write_tensor_file(&tensor, &mut bytes)?;
            write_atomic(&output, &bytes)
        }
        Command::ClipEncode {
            clip,
            output,
            qp_key,
            qp_res,
            keypoints,
            lambda,
            enhance,
            qp_enh,
            extra_points,
        } => {
            if keypoints == 0 || !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::Validation("--keypoints must be ≥ 1 and --lambda positive".into()));
            }
            let v = read_clip(&clip)?;
            let cfg = ExtractorConfig {
                keypoints,
                lambda,
                ..ExtractorConfig::default()
            };
            let (mut streams, report) = encode_predictive_clip(&v, &cfg, qp_key, qp_res)?;
            if enhance {
                let refine = RefineConfig { extra_points, qp: qp_enh };
                streams.b_dv = Some(encode_enhancement(&v, &streams, &cfg, &refine)?);
            }
            if report.residue_saturated > 0 {
                writeln!(err, "note: {} residue samples clamped", report.residue_saturated)?;
            }
            write_atomic(&output, &streams.to_container()?)
        }
        Command::ClipDecode {
            input,
            output,
            machine_only,
            base_layer,
        } => {
            let bytes = fs::read(&input)?;
            if machine_only {
                let (c, checksum_ok) = demux_unverified(&bytes)?;
                if !checksum_ok {
                    writeln!(err, "warning: container checksum mismatch; decoding keypoint stream only")?;
                }
                let b_f = c
                    .get(StreamKind::Feature)
                    .ok_or_else(|| Error::Format("stream missing from container".into()).in_stream(StreamKind::Feature, None))?;
                let sets = match c.get(StreamKind::Enhancement).filter(|_| !base_layer) {
                    Some(dv) => decode_refined_keypoints(b_f, dv)?,
                    None => decode_keypoints(b_f)?,
                };
                return emit(output.as_deref(), &keypoint_csv(&sets)?, out);
            }
            let streams = LayeredStreams::from_container(&demux(&bytes)?)?;
            let dv = if base_layer { None } else { streams.b_dv.as_deref() };
            let decoded = decode_enhanced(&streams, dv)?;
            let mut raw = Vec::new();
            write_raw_video(&decoded.video, &mut raw)?;
            emit(output.as_deref(), &raw, out)
        }
        Command::Metrics {
            reference,
            distorted,
            width,
            height,
            fps,
            psnr: want_psnr,
            ssim: want_ssim,
            bitrate,
            stream,
            output,
        } => {
            let load = |p: &PathBuf| {
                read_clip(&RawClipArgs {
                    input: p.clone(),
                    width,
                    height,
                    frames: None,
                    fps,
                })
            };
            let (a, b) = (load(&reference)?, load(&distorted)?);
            let all = !(want_psnr || want_ssim || bitrate);
            let mut rows = Vec::new();
            if want_psnr || all {
                for (t, (x, y)) in a.frames().iter().zip(b.frames()).enumerate() {
                    rows.push(MetricRow::new(Some(t), &psnr(x, y)?));
                }
                rows.push(MetricRow::new(None, &psnr_clip(&a, &b)?));
            }
            if want_ssim || all {
                for (t, (x, y)) in a.frames().iter().zip(b.frames()).enumerate() {
                    rows.push(MetricRow::new(Some(t), &ssim(x, y)?));
                }
                rows.push(MetricRow::new(None, &ssim_clip(&a, &b)?));
            }
            if bitrate {
                let len = fs::metadata(stream.as_deref().expect("clap enforces --stream"))?.len() as usize;
                rows.push(MetricRow {
                    frame: None,
                    metric: "bitrate_kbps".into(),
                    value: bitrate_kbps(len, b.len(), fps)?,
                });
            }
            let mut csv = Vec::new();
            write_metric_csv(&rows, &mut csv)?;
            emit(output.as_deref(), &csv, out)
        }
        Command::RdCurve {
            clip,
            grid,
            pipeline,
            metric,
            keypoints,
            out: path,
        } => {
            let qps = parse_grid(&grid)?;
            let v = read_clip(&clip)?;
            let quality = |recon: &VideoClip| -> Result<f64> {
                Ok(match metric {
                    QualityArg::Psnr => psnr_clip(&v, recon)?.value,
                    QualityArg::Ssim => ssim_clip(&v, recon)?.value,
                })
            };
            let curve = build_rd_curve(&qps, |&qp| {
                let (bytes, recon) = match pipeline {
                    PipelineArg::Pixel => {
                        let (chunks, recon) = encode_clip(&v, &CodecConfig::new(qp, Gop::Ippp)?)?;
                        (total_bytes(&chunks), recon)
                    }
                    PipelineArg::Predictive => {
                        let cfg = ExtractorConfig {
                            keypoints: keypoints.max(1),
                            ..ExtractorConfig::default()
                        };
                        let (s, _) = encode_predictive_clip(&v, &cfg, qp, qp)?;
                        (s.total_bytes(), decode_enhanced(&s, None)?.video)
                    }
                };
                Ok(RdPoint::new(bitrate_kbps(bytes, v.len(), v.fps())?, quality(&recon)?))
            })?;
            let mut csv = Vec::new();
            write_rd_csv(&curve, &mut csv)?;
            write_atomic(&path, &csv)
        }
        Command::Allocate {
            budget,
            tasks,
            model_kbps,
            theta_kbps,
            output,
        } => {
            let specs = read_tasks_csv(fs::File::open(&tasks)?)?;
            let overheads = Overheads {
                model: model_kbps,
                theta: theta_kbps,
            };
            let a = allocate_budget(&specs, budget, overheads)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["task_id", "rate_kbps", "quality"]).map_err(csv_err)?;
            for (t, p) in specs.iter().zip(&a.points) {
                w.write_record([t.task_id.clone(), format!("{:.6}", p.rate_kbps), format!("{:.6}", p.quality)])
                    .map_err(csv_err)?;
            }
            let csv = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            writeln!(
                err,
                "objective {:.6}, total {:.6} of {:.6} Kbps",
                a.objective, a.report.total, a.report.budget
            )?;
            emit(output.as_deref(), &csv, out)
        }
        Command::Inspect { input } => {
            let summary = inspect(&fs::read(&input)?)?;
            write!(out, "{summary}")?;
            Ok(())
        }
    }
}

fn parse_grid(grid: &str) -> Result<Vec<u8>> {
    let values = grid
        .strip_prefix("qp=")
        .ok_or_else(|| Error::Validation(format!("grid {grid:?} must look like qp=12,22,32")))?;
    values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<u8>()
                .ok()
                .filter(|&q| q <= 51)
                .ok_or_else(|| Error::Validation(format!("bad qp {v:?} in grid")))
        })
        .collect()
}

fn keypoint_csv(sets: &[KeypointSet]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frame", "point", "x", "y", "inv_a", "inv_b", "inv_c", "inv_d"])
        .map_err(csv_err)?;
    for s in sets {
        for (k, p) in s.points.iter().enumerate() {
            let mut rec = vec![s.frame_index.to_string(), k.to_string(), p.x.to_string(), p.y.to_string()];
            rec.extend(p.inv_cov.iter().map(f64::to_string));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("vcm").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run_str(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["inspect", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["feature-encode", "--input", "a", "--output", "b", "--qp", "60"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn missing_input_is_data_error() {
        let (code, _, err) = run_str(&["inspect", "--input", "/nonexistent/file.vcm"]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("qp=12,22, 32").unwrap(), vec![12, 22, 32]);
        assert!(parse_grid("12,22").is_err());
        assert!(parse_grid("qp=12,99").is_err());
    }

    #[test]
    fn failed_write_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let tensor = dir.path().join("t.vcmt");
        fs::write(&tensor, b"VCMT garbage").unwrap();
        let out = dir.path().join("out.vcm");
        let (code, _, _) = run_str(&[
            "feature-encode",
            "--input",
            tensor.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_DATA);
        assert!(!out.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
