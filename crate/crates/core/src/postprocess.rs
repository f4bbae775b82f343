//! Head decoding, non-maximum suppression and mapping back to frame pixels.

use serde::Serialize;

use crate::engine::{HeadOutput, PreprocessRecord};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Corners};

pub const DEFAULT_CONF_THRESHOLD: f32 = 0.25;
pub const DEFAULT_NMS_THRESHOLD: f32 = 0.45;
/// Upper bound on the size logit before `exp`.
pub const MAX_SIZE_LOGIT: f32 = 10.0;

/// One predicted box. Coordinates are pixels of whatever frame the
/// detection currently refers to (network input after decoding, source
/// frame after [`map_to_source`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
    pub objectness: f32,
    pub class_score: f32,
    /// `objectness * class_score`.
    pub confidence: f32,
    pub class_id: usize,
}

impl Detection {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.cx as f64, self.cy as f64, self.w as f64, self.h as f64)
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Every candidate a head predicts, `grid_h * grid_w * anchors` of them, in
/// `(row, col, anchor)` order.
pub fn decode_candidates(head: &HeadOutput) -> Result<Vec<Detection>> {
    let slot = 5 + head.classes;
    let anchors = head.anchors.len();
    if head.depth() != anchors * slot {
        return Err(Error::HeadDepth {
            layer: head.layer,
            masks: anchors,
            classes: head.classes,
            expected: anchors * slot,
            actual: head.depth(),
        });
    }
    let t = &head.tensor;
    let (gh, gw) = (head.grid_height(), head.grid_width());
    let mut out = Vec::with_capacity(gh * gw * anchors);
    for row in 0..gh {
        for col in 0..gw {
            for (a, &(aw, ah)) in head.anchors.iter().enumerate() {
                let base = a * slot;
                let at = |k: usize| t.get(base + k, row, col);
                let objectness = sigmoid(at(4));
                let (class_id, class_score) =
                    (0..head.classes)
                        .map(|c| (c, sigmoid(at(5 + c))))
                        .fold(
                            (0, f32::NEG_INFINITY),
                            |best, cur| if cur.1 > best.1 { cur } else { best },
                        );
                out.push(Detection {
                    cx: (sigmoid(at(0)) + col as f32) * head.stride_x,
                    cy: (sigmoid(at(1)) + row as f32) * head.stride_y,
                    w: aw * at(2).min(MAX_SIZE_LOGIT).exp(),
                    h: ah * at(3).min(MAX_SIZE_LOGIT).exp(),
                    objectness,
                    class_score,
                    confidence: objectness * class_score,
                    class_id,
                });
            }
        }
    }
    Ok(out)
}

/// Candidates whose confidence reaches `conf_threshold`.
pub fn decode(head: &HeadOutput, conf_threshold: f32) -> Result<Vec<Detection>> {
    let mut dets = decode_candidates(head)?;
    dets.retain(|d| d.confidence >= conf_threshold);
    Ok(dets)
}

/// Greedy per-class suppression. The highest-confidence remaining box (ties
/// to the earlier input) is kept and every same-class box overlapping it with
/// IoU above `iou_threshold` is dropped. Output is in descending confidence.
pub fn nms(dets: &[Detection], iou_threshold: f32) -> Vec<Detection> {
    let order = priority_order(dets);
    let boxes: Vec<Corners> = dets.iter().map(|d| d.bbox().corners()).collect();
    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(dets[i]);
        for &j in &order[pos + 1..] {
            if !suppressed[j]
                && dets[j].class_id == dets[i].class_id
                && crate::geometry::iou_corners(&boxes[i], &boxes[j]) > iou_threshold as f64
            {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// Indices sorted by descending confidence, ties by index.
pub fn priority_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence).then(a.cmp(&b)));
    order
}

/// Maps a network-space detection to source-frame pixels and clamps it to
/// the frame. Returns `None` when nothing of the box remains inside.
pub fn map_to_source(det: &Detection, record: &PreprocessRecord) -> Option<Detection> {
    let c = det.bbox().corners();
    let sx = |x: f64| (x - record.pad_x) / record.scale_x;
    let sy = |y: f64| (y - record.pad_y) / record.scale_y;
    let mapped = Corners::new(sx(c.x0), sy(c.y0), sx(c.x1), sy(c.y1))
        .clamp(record.source_width as f64, record.source_height as f64);
    if mapped.area() <= 0.0 {
        return None;
    }
    let b = mapped.to_bbox();
    Some(Detection {
        cx: b.cx as f32,
        cy: b.cy as f32,
        w: b.w as f32,
        h: b.h as f32,
        ..*det
    })
}

/// Inverse of [`map_to_source`] for boxes inside the frame.
pub fn map_to_network(det: &Detection, record: &PreprocessRecord) -> Detection {
    Detection {
        cx: (det.cx as f64 * record.scale_x + record.pad_x) as f32,
        cy: (det.cy as f64 * record.scale_y + record.pad_y) as f32,
        w: (det.w as f64 * record.scale_x) as f32,
        h: (det.h as f64 * record.scale_y) as f32,
        ..*det
    }
}

/// IoU between two detections.
pub fn detection_iou(a: &Detection, b: &Detection) -> f64 {
    iou(&a.bbox(), &b.bbox())
}
