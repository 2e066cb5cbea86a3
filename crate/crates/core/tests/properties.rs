mod common;

use proptest::prelude::*;
use vcm::bits::{BitReader, BitWriter};
use vcm::codec::{decode_frame, encode_frame, CodecConfig, Gop};
use vcm::container::{demux, mux_streams, ContainerHeader};
use vcm::keypoints::{decode_keypoint_stream, dequantize_keypoints, encode_keypoint_stream, quantize_keypoints};
use vcm::model::{FeatureTensor, Frame, Keypoint, KeypointSet};
use vcm::rd::{allocate_budget, Overheads, RdCurve, RdPoint, TaskSpec};
use vcm::{Error, StreamKind};

const KINDS: [StreamKind; 6] = [
    StreamKind::KeyFrameVideo,
    StreamKind::Feature,
    StreamKind::Residue,
    StreamKind::Enhancement,
    StreamKind::Model,
    StreamKind::PackedFeaturePlanes,
];

fn frame(max_blocks: usize) -> impl Strategy<Value = Frame> {
    (1..=max_blocks, 1..=max_blocks).prop_flat_map(|(bw, bh)| {
        let (w, h) = (bw * 8, bh * 8);
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |s| Frame::new(w, h, s).unwrap())
    })
}

fn keypoint_sets() -> impl Strategy<Value = Vec<KeypointSet>> {
    (1usize..6, 1usize..8).prop_flat_map(|(frames, k)| {
        let point = (0.0..640.0f64, 0.0..480.0f64, 1.0..4000.0f64, -0.9..0.9f64, 1.0..4000.0f64).prop_map(|(x, y, a, rho, d)| {
            let b = rho * (a * d).sqrt();
            Keypoint { x, y, inv_cov: [a, b, b, d] }
        });
        prop::collection::vec(prop::collection::vec(point, k), frames).prop_map(|sets| {
            sets.into_iter()
                .enumerate()
                .map(|(frame_index, points)| KeypointSet { frame_index, points })
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn exp_golomb_round_trip(values in prop::collection::vec((any::<bool>(), -100_000i32..100_000), 0..64)) {
        let mut w = BitWriter::new();
        for &(signed, v) in &values {
            if signed { w.put_se(v) } else { w.put_ue(v.unsigned_abs()) }
        }
        let bytes = w.finish();
        let mut r = BitReader::new(&bytes);
        for &(signed, v) in &values {
            if signed {
                prop_assert_eq!(r.get_se().unwrap(), v);
            } else {
                prop_assert_eq!(r.get_ue().unwrap(), v.unsigned_abs());
            }
        }
    }

    #[test]
    fn container_round_trip(
        payloads in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..300), 0..6),
        fps in 1u16..120,
        w in 1u16..4096,
        h in 1u16..4096,
    ) {
        let streams: Vec<_> = KINDS.iter().copied().zip(payloads).collect();
        let header = ContainerHeader::new(fps as f64, w as usize, h as usize, 7).unwrap();
        let bytes = mux_streams(header, &streams).unwrap();
        let back = demux(&bytes).unwrap();
        prop_assert_eq!(back.streams, streams);
        prop_assert_eq!(back.header.fps(), fps as f64);
    }

    #[test]
    fn tensor_bytes_round_trip(c in 1usize..5, h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let values: Vec<f32> = (0..c * h * w).map(|i| ((i as u64 ^ seed) % 1000) as f32 * 0.37 - 100.0).collect();
        let t = FeatureTensor::new("net", "layer", c, h, w, values).unwrap();
        prop_assert_eq!(FeatureTensor::from_bytes(&t.to_bytes().unwrap()).unwrap(), t);
    }

    #[test]
    fn keypoint_quantization_stays_within_half_step(sets in keypoint_sets()) {
        for set in &sets {
            let deq = dequantize_keypoints(&quantize_keypoints(set).unwrap());
            for (p, q) in set.points.iter().zip(&deq.set.points) {
                prop_assert!((p.x - q.x).abs() <= 1.0 && (p.y - q.y).abs() <= 1.0);
                if !deq.degenerate.iter().any(|&d| d) {
                    for (a, b) in p.inv_cov.iter().zip(&q.inv_cov) {
                        prop_assert!((a - b).abs() <= 32.0);
                    }
                }
            }
        }
    }

    #[test]
    fn keypoint_stream_round_trip(sets in keypoint_sets()) {
        let q: Vec<_> = sets.iter().map(|s| quantize_keypoints(s).unwrap()).collect();
        prop_assert_eq!(decode_keypoint_stream(&encode_keypoint_stream(&q).unwrap()).unwrap(), q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn codec_decoder_tracks_encoder(f in frame(4), g in frame(4), qp in 0u8..=51) {
        let cfg = CodecConfig::new(qp, Gop::Ippp).unwrap();
        let (intra, recon) = encode_frame(&f, None, &cfg).unwrap();
        prop_assert_eq!(&decode_frame(&intra, None).unwrap(), &recon);
        if g.same_dims(&f) {
            let (inter, recon2) = encode_frame(&g, Some(&recon), &cfg).unwrap();
            prop_assert_eq!(decode_frame(&inter, Some(&recon)).unwrap(), recon2);
        }
    }

    #[test]
    fn allocation_matches_exhaustive_search(
        curves in prop::collection::vec(prop::collection::vec((0.5..50.0f64, 0.0..1.0f64), 2..5), 1..4),
        budget in 0.0..120.0f64,
    ) {
        let n = curves.len();
        let tasks: Vec<TaskSpec> = curves
            .into_iter()
            .enumerate()
            .map(|(i, pts)| TaskSpec {
                task_id: format!("t{i}"),
                weight: 1.0 / n as f64,
                level: 0,
                curve: RdCurve::new(
                    pts.into_iter()
                        .scan(0.0, |rate, (dr, q)| {
                            *rate += dr;
                            Some(RdPoint::new(*rate, q))
                        })
                        .collect(),
                )
                .unwrap(),
            })
            .collect();
        let overheads = Overheads { model: 1.0, theta: 0.5 };
        let expected = common::brute_force_allocation(&tasks, budget, overheads);
        match (allocate_budget(&tasks, budget, overheads), expected) {
            (Ok(a), Some((_, objective, rate))) => {
                prop_assert!((a.objective - objective).abs() <= 1e-9);
                prop_assert!(a.report.total <= budget + 1e-9);
                let chosen: f64 = a.points.iter().map(|p| p.rate_kbps).sum();
                prop_assert!(chosen <= rate + 1e-9);
            }
            (Err(Error::Infeasible { .. }), None) => {}
            (got, want) => prop_assert!(false, "allocator {:?} vs brute force {:?}", got, want),
        }
    }
}
