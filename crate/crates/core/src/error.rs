use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: expected {expected} input channels, got {actual}")]
    ChannelMismatch {
        layer: usize,
        expected: usize,
        actual: usize,
    },

    #[error("layer {layer}: shape mismatch, expected {expected}, got {actual}")]
    ShapeMismatch {
        layer: usize,
        expected: String,
        actual: String,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config: section [{section}] at line {line} is missing mandatory key `{key}`")]
    MissingKey {
        section: String,
        line: usize,
        key: &'static str,
    },

    #[error("config: layer {layer} references layer {target}, which is not an earlier layer")]
    ForwardReference { layer: usize, target: i64 },

    #[error(
        "config: yolo layer {layer} expects {expected} input channels \
         ({masks} masks x (5 + {classes} classes)), previous layer yields {actual}"
    )]
    HeadDepth {
        layer: usize,
        masks: usize,
        classes: usize,
        expected: usize,
        actual: usize,
    },

    #[error("weights: header truncated, need {needed} bytes, have {available}")]
    TruncatedHeader { needed: usize, available: usize },

    #[error("weights: stream truncated in layer {layer}, {missing} bytes missing")]
    TruncatedWeights { layer: usize, missing: usize },

    #[error("weights: {surplus} trailing bytes after the last layer")]
    TrailingBytes { surplus: usize },

    #[error("weights: layer {layer} channel {channel} has negative running variance {value}")]
    NegativeVariance { layer: usize, channel: usize, value: f32 },

    #[error("image has zero width or height")]
    EmptyImage,

    #[error("{}:{line}: {message}", path.display())]
    Annotation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("detections line {line}: {message}")]
    DetectionsFormat { line: usize, message: String },

    #[error("frame indices out of order: {previous} followed by {next}")]
    FrameOrder { previous: u64, next: u64 },

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }
}
