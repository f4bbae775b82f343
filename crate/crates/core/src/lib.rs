//! Single-class detection runtime and evaluation toolkit for a YOLOv3-style
//! three-head network: darknet config/weights loading, CPU inference,
//! decoding and suppression, AP evaluation, and debounced event alerts.

pub mod darknet;
pub mod data_io;
pub mod engine;
pub mod error;
pub mod events;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod raster;
pub mod tensor;

pub use darknet::{load_weights, parse_config, NetworkSpec, ParameterizedNetwork};
pub use engine::{CompileOptions, CompiledNetwork, Engine, HeadOutput, PreprocessRecord, ResizeMode};
pub use error::{Error, Result};
pub use events::{Debounce, EventAggregator, InteractionEvent};
pub use geometry::BBox;
pub use metrics::{EvalConfig, EvalReport, Interpolation};
pub use pipeline::{benchmark, BenchConfig, Detector, DetectorConfig, LatencyReport};
pub use postprocess::Detection;
pub use raster::RgbImage;
pub use tensor::{Shape, Tensor};
