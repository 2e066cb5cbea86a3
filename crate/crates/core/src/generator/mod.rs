//! Feature-assisted predictive coding: keypoints drive a warp of the key
//! frame, and only the residue against that prediction is coded.

mod enhance;
mod extract;
mod pipeline;
mod warp;

pub use enhance::{
    decode_enhanced, decode_refined_keypoints, encode_enhancement, encode_enhancement_with_keypoints,
    enhance_decoded, EnhancedClip, EnhancementLayer, Layer, RefineConfig,
};
pub use extract::{detect_corners, extract_keypoints, extract_with_extra, ExtractorConfig};
pub use pipeline::{
    decode_keypoints, decode_predictive_clip, encode_predictive_clip, encode_with_keypoints, DecodedClip,
    EncodeReport, LayeredStreams, RESIDUE_OFFSET,
};
pub use warp::{generate_predicted_frame, motion_field, MIN_TOTAL_WEIGHT};
