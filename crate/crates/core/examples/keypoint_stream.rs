//! Extracts and tracks keypoints, then quantizes them into the lossless
//! feature stream and decodes it again.

use vcm::generator::{extract_keypoints, ExtractorConfig};
use vcm::keypoints::{decode_keypoint_stream, dequantize_keypoints, encode_keypoint_stream, quantize_keypoints};
use vcm::metrics::bitrate_kbps;
use vcm::synthetic::moving_objects_clip;

fn main() -> vcm::Result<()> {
    let clip = moving_objects_clip(256, 192, 30, 3, 21);
    let cfg = ExtractorConfig::default();
    let sets = extract_keypoints(&clip, &cfg);
    let quantized = sets.iter().map(quantize_keypoints).collect::<vcm::Result<Vec<_>>>()?;
    let stream = encode_keypoint_stream(&quantized)?;
    assert_eq!(decode_keypoint_stream(&stream)?, quantized);
    let kbps = bitrate_kbps(stream.len(), clip.len(), clip.fps())?;
    println!("{} frames x {} points -> {} bytes ({kbps:.2} Kbps)", sets.len(), cfg.effective_keypoints(), stream.len());
    let last = dequantize_keypoints(&quantized[clip.len() - 1]);
    for (before, after) in sets[0].points.iter().zip(&last.set.points).take(5) {
        println!("({:6.1}, {:6.1}) -> ({:6.1}, {:6.1})", before.x, before.y, after.x, after.y);
    }
    Ok(())
}
