use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp"];

/// A frame on disk. `image_id` is the file stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    pub image_id: String,
    pub path: PathBuf,
    /// Position in the sequence: the trailing number of the stem when every
    /// frame has one, otherwise the listing position.
    pub index: u64,
}

/// Trailing decimal digits of a file stem, e.g. `clip_00042` -> 42.
pub fn frame_index_from_stem(stem: &str) -> Option<u64> {
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    stem[stem.len() - digits..].parse().ok()
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Frames of a directory in sequence order, or of an explicit list in the
/// order given. Listed frames must have strictly increasing indices.
pub fn list_frames(dir: Option<&Path>, list: Option<&[PathBuf]>) -> Result<Vec<FrameRecord>> {
    let (paths, sort) = match (dir, list) {
        (_, Some(list)) => (list.to_vec(), false),
        (Some(dir), None) => {
            let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
            let mut paths = Vec::new();
            for entry in entries {
                let path = entry
                    .map_err(|e| Error::io(format!("reading {}", dir.display()), e))?
                    .path();
                if path.is_file() && is_image(&path) {
                    paths.push(path);
                }
            }
            paths.sort();
            (paths, true)
        }
        (None, None) => return Ok(Vec::new()),
    };

    let stems: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string())
        .collect();
    let numbered: Option<Vec<u64>> = stems.iter().map(|s| frame_index_from_stem(s)).collect();
    let mut frames: Vec<FrameRecord> = paths
        .into_iter()
        .zip(stems)
        .enumerate()
        .map(|(pos, (path, image_id))| FrameRecord {
            index: numbered.as_ref().map_or(pos as u64, |n| n[pos]),
            image_id,
            path,
        })
        .collect();
    if sort {
        frames.sort_by_key(|f| f.index);
    }
    for pair in frames.windows(2) {
        if pair[1].index <= pair[0].index {
            return Err(Error::FrameOrder {
                previous: pair[0].index,
                next: pair[1].index,
            });
        }
    }
    Ok(frames)
}
