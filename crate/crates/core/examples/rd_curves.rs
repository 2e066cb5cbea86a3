//! Builds rate-distortion curves for the pixel codec and the predictive
//! pipeline and compares them with BD-rate.

use vcm::codec::{encode_clip, total_bytes, CodecConfig, Gop};
use vcm::generator::{decode_predictive_clip, encode_predictive_clip, ExtractorConfig};
use vcm::metrics::{bitrate_kbps, psnr_clip};
use vcm::rd::{bd_rate, build_rd_curve, RdPoint};
use vcm::synthetic::moving_objects_clip;

fn main() -> vcm::Result<()> {
    let clip = moving_objects_clip(128, 128, 10, 2, 47);
    let grid = [22u8, 27, 32, 37, 42];
    let kbps = |bytes| bitrate_kbps(bytes, clip.len(), clip.fps());

    let pixel = build_rd_curve(&grid, |&qp| {
        let (chunks, recon) = encode_clip(&clip, &CodecConfig::new(qp, Gop::Ippp)?)?;
        Ok(RdPoint::new(kbps(total_bytes(&chunks))?, psnr_clip(&clip, &recon)?.value))
    })?;
    let cfg = ExtractorConfig::default();
    let predictive = build_rd_curve(&grid, |&qp| {
        let (streams, _) = encode_predictive_clip(&clip, &cfg, qp, qp + 4)?;
        let decoded = decode_predictive_clip(&streams)?;
        Ok(RdPoint::new(kbps(streams.total_bytes())?, psnr_clip(&clip, &decoded.video)?.value))
    })?;
    for (name, curve) in [("pixel IPPP", &pixel), ("predictive", &predictive)] {
        println!("{name}:");
        for p in curve.points() {
            println!("  {:8.1} Kbps  {:6.2} dB", p.rate_kbps, p.quality);
        }
    }
    match bd_rate(&pixel, &predictive) {
        Ok(bd) => println!("BD-rate of predictive vs pixel: {bd:+.1}%"),
        Err(e) => println!("BD-rate unavailable: {e}"),
    }
    Ok(())
}
