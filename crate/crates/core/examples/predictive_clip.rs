//! The layered pipeline: key frame, keypoints and residue in the base
//! layer, then an optional enhancement layer. Also shows that the keypoint
//! stream decodes on its own.

use vcm::container::{demux, inspect};
use vcm::generator::{
    decode_enhanced, decode_keypoints, decode_predictive_clip, encode_enhancement, encode_predictive_clip,
    ExtractorConfig, LayeredStreams, RefineConfig,
};
use vcm::metrics::psnr_clip;
use vcm::model::VideoClip;
use vcm::synthetic::moving_objects_clip;
use vcm::StreamKind;

fn main() -> vcm::Result<()> {
    let clip = moving_objects_clip(128, 128, 12, 2, 44);
    let cfg = ExtractorConfig::default();
    let (mut streams, report) = encode_predictive_clip(&clip, &cfg, 22, 32)?;
    println!("residue saturated at {} samples", report.residue_saturated);

    let base = decode_predictive_clip(&streams)?;
    println!("base: {} bytes, PSNR {:.2} dB", streams.total_bytes(), psnr_clip(&clip, &base.video)?.value);
    println!("prediction alone: PSNR {:.2} dB", psnr_clip(&clip, &VideoClip::new(base.predicted.clone(), clip.fps())?)?.value);

    let b_dv = encode_enhancement(&clip, &streams, &cfg, &RefineConfig::default())?;
    let enhanced = decode_enhanced(&streams, Some(&b_dv))?;
    println!("enhanced: +{} bytes, PSNR {:.2} dB", b_dv.len(), psnr_clip(&clip, &enhanced.video)?.value);

    streams.b_dv = Some(b_dv);
    let file = streams.to_container()?;
    for s in inspect(&file)?.streams {
        println!("  {:?}: {} bytes ({:.1}%)", s.kind, s.bytes, 100.0 * s.share);
    }
    let container = demux(&file)?;
    let machine = decode_keypoints(container.get(StreamKind::Feature).expect("feature stream"))?;
    println!("machine-only decode: {} keypoint sets", machine.len());
    assert_eq!(LayeredStreams::from_container(&container)?.total_bytes(), streams.total_bytes());
    Ok(())
}
