use std::io::{BufRead, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::postprocess::Detection;

/// A detection together with the frame it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub detection: Detection,
}

/// One JSON object, fixed key order, 4 decimals for coordinates and 6 for
/// scores. No trailing newline.
pub fn format_detection(record: &DetectionRecord) -> String {
    let d = &record.detection;
    format!(
        "{{\"image_id\":{},\"class_id\":{},\"cx\":{:.4},\"cy\":{:.4},\"w\":{:.4},\"h\":{:.4},\
         \"objectness\":{:.6},\"class_score\":{:.6},\"confidence\":{:.6}}}",
        serde_json::Value::String(record.image_id.clone()),
        d.class_id,
        d.cx,
        d.cy,
        d.w,
        d.h,
        d.objectness,
        d.class_score,
        d.confidence
    )
}

pub fn write_detections<W: Write>(records: &[DetectionRecord], mut sink: W) -> Result<()> {
    for r in records {
        writeln!(sink, "{}", format_detection(r)).map_err(|e| Error::io("writing detections", e))?;
    }
    sink.flush().map_err(|e| Error::io("writing detections", e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    image_id: String,
    class_id: usize,
    cx: f32,
    cy: f32,
    w: f32,
    h: f32,
    objectness: f32,
    class_score: f32,
    confidence: f32,
}

/// Reads records written by [`write_detections`]. Blank lines are skipped.
pub fn read_detections<R: BufRead>(source: R) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io("reading detections", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::DetectionsFormat {
            line: n + 1,
            message: e.to_string(),
        })?;
        if !(parsed.w > 0.0 && parsed.h > 0.0) {
            return Err(Error::DetectionsFormat {
                line: n + 1,
                message: "box width and height must be positive".into(),
            });
        }
        out.push(DetectionRecord {
            image_id: parsed.image_id,
            detection: Detection {
                cx: parsed.cx,
                cy: parsed.cy,
                w: parsed.w,
                h: parsed.h,
                objectness: parsed.objectness,
                class_score: parsed.class_score,
                confidence: parsed.confidence,
                class_id: parsed.class_id,
            },
        });
    }
    Ok(out)
}
