use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::TruthBox;

/// Overshoot past the unit square that is clamped with a warning.
pub const CLAMP_WARN_OVERSHOOT: f64 = 1e-3;
/// Overshoot past the unit square that is rejected.
pub const MAX_OVERSHOOT: f64 = 0.05;

/// One annotated box, normalized to the frame size.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub image_id: String,
    pub class_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl GroundTruthBox {
    pub fn to_pixels(&self, width: usize, height: usize) -> TruthBox {
        TruthBox {
            class_id: self.class_id,
            bbox: BBox::new(self.cx, self.cy, self.w, self.h).scaled(width as f64, height as f64),
        }
    }
}

/// Parses one `<image_id>.txt` file: lines of `class cx cy w h`. Returns the
/// boxes and any clamp warnings.
pub fn parse_annotation(image_id: &str, text: &str, path: &Path) -> Result<(Vec<GroundTruthBox>, Vec<String>)> {
    let mut boxes = Vec::new();
    let mut warnings = Vec::new();
    let err = |line: usize, message: String| Error::Annotation {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(
                line_no,
                format!("expected `class cx cy w h`, found {} fields", fields.len()),
            ));
        }
        let class_id: usize = fields[0]
            .parse()
            .map_err(|_| err(line_no, format!("invalid class id `{}`", fields[0])))?;
        let mut values = [0.0f64; 4];
        for (k, name) in ["cx", "cy", "w", "h"].iter().enumerate() {
            let v: f64 = fields[k + 1]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(line_no, format!("invalid {name} `{}`", fields[k + 1])))?;
            if k >= 2 && v <= 0.0 {
                return Err(err(line_no, format!("{name} must be positive, got {v}")));
            }
            let overshoot = (-v).max(v - 1.0).max(0.0);
            if overshoot > MAX_OVERSHOOT {
                return Err(err(
                    line_no,
                    format!("{name}={v} lies {overshoot:.4} outside the unit square (limit {MAX_OVERSHOOT})"),
                ));
            }
            if overshoot > CLAMP_WARN_OVERSHOOT {
                warnings.push(format!("{}:{line_no}: clamped {name}={v} into [0, 1]", path.display()));
            }
            values[k] = v.clamp(0.0, 1.0);
        }
        let [cx, cy, w, h] = values;
        let mut b = BBox::new(cx, cy, w, h);
        let c = b.corners();
        // Only rebuild when a corner leaves the frame so in-frame values stay exact.
        if c.x0 < 0.0 || c.y0 < 0.0 || c.x1 > 1.0 || c.y1 > 1.0 {
            b = c.clamp(1.0, 1.0).to_bbox();
        }
        if b.w <= 0.0 || b.h <= 0.0 {
            return Err(err(line_no, "box has zero area inside the frame".into()));
        }
        boxes.push(GroundTruthBox {
            image_id: image_id.to_string(),
            class_id,
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
        });
    }
    Ok((boxes, warnings))
}

/// Loads `<image_id>.txt` annotations from `dir`.
///
/// With `image_ids`, exactly those frames are returned and a missing file
/// means the frame has no boxes. Without it, every `.txt` file is loaded.
pub fn load_ground_truth(dir: &Path, image_ids: Option<&[String]>) -> Result<BTreeMap<String, Vec<GroundTruthBox>>> {
    if !dir.is_dir() {
        return Err(Error::io(
            format!("ground-truth directory {}", dir.display()),
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let files: Vec<(String, PathBuf)> = match image_ids {
        Some(ids) => ids
            .iter()
            .map(|id| (id.clone(), dir.join(format!("{id}.txt"))))
            .collect(),
        None => {
            let mut found = Vec::new();
            let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
            for entry in entries {
                let path = entry
                    .map_err(|e| Error::io(format!("reading {}", dir.display()), e))?
                    .path();
                if path.extension().is_some_and(|e| e == "txt") {
                    // Label-name list written by common annotation tools.
                    if path.file_name().is_some_and(|n| n == "classes.txt") {
                        continue;
                    }
                    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                        found.push((stem.to_string(), path.clone()));
                    }
                }
            }
            found.sort();
            found
        }
    };

    let mut out = BTreeMap::new();
    for (id, path) in files {
        let boxes = if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let (boxes, warnings) = parse_annotation(&id, &text, &path)?;
            for w in warnings {
                log::warn!("{w}");
            }
            boxes
        } else {
            Vec::new()
        };
        out.insert(id, boxes);
    }
    Ok(out)
}
