//! Frame metrics, rates and a per-frame CSV report.

use vcm::codec::{encode_clip, total_bytes, CodecConfig, Gop};
use vcm::metrics::{bitrate_kbps, compression_rate, psnr, ssim, write_metric_csv, MetricRow};
use vcm::synthetic::moving_objects_clip;

fn main() -> vcm::Result<()> {
    let clip = moving_objects_clip(96, 64, 6, 2, 3);
    let (chunks, recon) = encode_clip(&clip, &CodecConfig::new(30, Gop::Ippp)?)?;
    let mut rows = Vec::new();
    for (t, (a, b)) in clip.frames().iter().zip(recon.frames()).enumerate() {
        rows.push(MetricRow::new(Some(t), &psnr(a, b)?));
        rows.push(MetricRow::new(Some(t), &ssim(a, b)?));
    }
    write_metric_csv(&rows, std::io::stdout())?;
    let coded = total_bytes(&chunks);
    println!(
        "{coded} bytes, {:.1} Kbps, compression rate {:.4}",
        bitrate_kbps(coded, clip.len(), clip.fps())?,
        compression_rate(clip.to_raw().len(), coded)?
    );
    Ok(())
}
