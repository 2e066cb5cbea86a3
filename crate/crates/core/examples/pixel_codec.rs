//! Codes a moving clip with the block codec at several quantization
//! parameters and prints rate against quality.

use vcm::codec::{decode_clip, encode_clip, total_bytes, CodecConfig, Gop};
use vcm::metrics::{bitrate_kbps, psnr_clip, ssim_clip};
use vcm::synthetic::moving_objects_clip;

fn main() -> vcm::Result<()> {
    let clip = moving_objects_clip(128, 96, 10, 3, 5);
    println!("qp  gop       kbps     psnr   ssim");
    for gop in [Gop::AllIntra, Gop::Ippp] {
        for qp in [12, 22, 32, 42] {
            let (chunks, recon) = encode_clip(&clip, &CodecConfig::new(qp, gop)?)?;
            let decoded = decode_clip(&chunks, clip.fps())?;
            assert_eq!(decoded, recon, "decoder must match the encoder's reconstruction");
            let kbps = bitrate_kbps(total_bytes(&chunks), clip.len(), clip.fps())?;
            let p = psnr_clip(&clip, &decoded)?.value;
            let s = ssim_clip(&clip, &decoded)?.value;
            println!("{qp:<3} {:<9} {kbps:8.1} {p:6.2} {s:6.4}", format!("{gop:?}"));
        }
    }
    Ok(())
}
