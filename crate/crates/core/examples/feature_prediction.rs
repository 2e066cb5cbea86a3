//! Predicts a deeper feature level from a shallower one and codes only the
//! residual.

use vcm::metrics::{feature_fidelity, FidelityKind};
use vcm::model::FeatureTensor;
use vcm::packing::{feature_residual, predict_feature, reconstruct_feature, Predictor};
use vcm::synthetic::smooth_tensor;

// A stand-in for a network stage: 2x spatial pooling plus a per-channel gain.
fn deeper(t: &FeatureTensor) -> vcm::Result<FeatureTensor> {
    let (c, h, w) = t.dims();
    let mut v = Vec::with_capacity(c * (h / 2) * (w / 2));
    for ch in 0..c {
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                let s = t.get(ch, 2 * y, 2 * x) + t.get(ch, 2 * y + 1, 2 * x) + t.get(ch, 2 * y, 2 * x + 1) + t.get(ch, 2 * y + 1, 2 * x + 1);
                v.push(0.25 * s * (1.0 + ch as f32 * 0.1) + 0.5);
            }
        }
    }
    FeatureTensor::new("toy", "deep", c, h / 2, w / 2, v)
}

fn main() -> vcm::Result<()> {
    let calibration = (0..4)
        .map(|s| {
            let shallow = smooth_tensor(8, 32, 32, 100 + s);
            let deep = deeper(&shallow)?;
            Ok((shallow, deep))
        })
        .collect::<vcm::Result<Vec<_>>>()?;
    let source = smooth_tensor(8, 32, 32, 7);
    let target = deeper(&source)?;
    for (name, predictor) in [("resample", Predictor::Resample), ("linear map", Predictor::LinearMap(calibration))] {
        let pred = predict_feature(&source, target.dims(), &predictor)?;
        let residual = feature_residual(&target, &pred.tensor)?;
        let energy: f64 = residual.values().iter().map(|v| (*v as f64).powi(2)).sum();
        let rebuilt = reconstruct_feature(&pred.tensor, &residual)?;
        let fid = feature_fidelity(&target, &rebuilt, &FidelityKind::OneMinusNmse)?;
        println!("{name}: residual energy {energy:.2}, rebuilt 1-NMSE {:.6}, fell back {}", fid.value, pred.fell_back);
    }
    Ok(())
}
