//! Packs a feature tensor three ways, codes the planes and compares sizes
//! and fidelity.

use vcm::codec::CodecConfig;
use vcm::metrics::{feature_fidelity, FidelityKind};
use vcm::packing::{decode_packed, encode_packed, pack_tensor, plane_gop, unpack_tensor, PackMode, PlaneCoding};
use vcm::synthetic::clustered_tensor;

fn main() -> vcm::Result<()> {
    let tensor = clustered_tensor(32, 16, 16, 4, 11);
    let raw_bytes = tensor.values().len() * 4;
    println!("tensor {:?}, {raw_bytes} bytes as f32", tensor.dims());
    for mode in [PackMode::Concat, PackMode::DDConcat, PackMode::Tile] {
        let packed = pack_tensor(&tensor, mode)?;
        let cfg = CodecConfig::new(22, plane_gop(mode))?;
        let bytes = encode_packed(&packed, PlaneCoding::Codec(cfg))?;
        let back = unpack_tensor(&decode_packed(&bytes)?)?;
        let cos = feature_fidelity(&tensor, &back, &FidelityKind::CosineSim)?;
        println!(
            "{mode:?}: {} plane(s), {} bytes, cosine {:.5}",
            packed.planes.len(),
            bytes.len(),
            cos.value
        );
    }
    let raw = encode_packed(&pack_tensor(&tensor, PackMode::Concat)?, PlaneCoding::Raw)?;
    let back = unpack_tensor(&decode_packed(&raw)?)?;
    let nmse = feature_fidelity(&tensor, &back, &FidelityKind::OneMinusNmse)?;
    println!("raw planes: {} bytes, 1-NMSE {:.6}", raw.len(), nmse.value);
    Ok(())
}
