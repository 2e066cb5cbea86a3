use std::fmt;

use thiserror::Error;

/// Identifies one of the multiplexed bitstreams carried in a container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum StreamKind {
    /// Intra-coded key frames.
    KeyFrameVideo = 1,
    /// Quantized keypoint stream.
    Feature = 2,
    /// Generator residue video.
    Residue = 3,
    /// Scalable enhancement layer.
    Enhancement = 4,
    /// Opaque model payload.
    Model = 5,
    /// Packed intermediate feature planes.
    PackedFeaturePlanes = 6,
}

impl StreamKind {
    pub const ALL: [StreamKind; 6] = [
        StreamKind::KeyFrameVideo,
        StreamKind::Feature,
        StreamKind::Residue,
        StreamKind::Enhancement,
        StreamKind::Model,
        StreamKind::PackedFeaturePlanes,
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| *k as u8 == code)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            StreamKind::KeyFrameVideo => "B_I",
            StreamKind::Feature => "B_F",
            StreamKind::Residue => "B_R",
            StreamKind::Enhancement => "B_DV",
            StreamKind::Model => "B_M",
            StreamKind::PackedFeaturePlanes => "B_FP",
        }
    }
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StreamKind::KeyFrameVideo => "KeyFrameVideo",
            StreamKind::Feature => "Feature",
            StreamKind::Residue => "Residue",
            StreamKind::Enhancement => "Enhancement",
            StreamKind::Model => "Model",
            StreamKind::PackedFeaturePlanes => "PackedFeaturePlanes",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated {what}: expected {expected} bytes, got {actual}")]
    Truncated {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("{kind} stream{}: {source}", frame.map(|f| format!(" (frame {f})")).unwrap_or_default())]
    Stream {
        kind: StreamKind,
        frame: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("length overrun: stream declares {declared} bytes but only {remaining} remain")]
    Overrun { declared: u64, remaining: u64 },

    #[error("degenerate rate-distortion curve: {0}")]
    DegenerateCurve(String),

    #[error("incomparable curves: {0}")]
    Incomparable(String),

    #[error("infeasible allocation: minimum cost {required:.3} exceeds budget {budget:.3} by {shortfall:.3}")]
    Infeasible {
        required: f64,
        budget: f64,
        shortfall: f64,
    },

    #[error("external oracle failed: {0}")]
    Oracle(String),
}

impl Error {
    pub(crate) fn in_stream(self, kind: StreamKind, frame: Option<usize>) -> Self {
        Error::Stream {
            kind,
            frame,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
