//! Files in and out: ground-truth annotations, detection JSON lines, frame
//! listings and box overlays.

mod annotations;
mod detections;
mod font;
mod frames;
mod overlay;

pub use annotations::{load_ground_truth, parse_annotation, GroundTruthBox, CLAMP_WARN_OVERSHOOT, MAX_OVERSHOOT};
pub use detections::{format_detection, read_detections, write_detections, DetectionRecord};
pub use frames::{frame_index_from_stem, list_frames, FrameRecord, IMAGE_EXTENSIONS};
pub use overlay::{border_rect, caption_rect, render_overlay, PixelRect, GT_COLOR, PREDICTION_COLOR};
