use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use handsoff_core::darknet::parse_config_with_warnings;
use handsoff_core::data_io::{list_frames, FrameRecord, IMAGE_EXTENSIONS};
use handsoff_core::engine::CompileOptions;
use handsoff_core::{load_weights, CompiledNetwork, Detection, Detector, DetectorConfig, ResizeMode, RgbImage};
use rayon::prelude::*;

use crate::args::{FrameArgs, ModelArgs};
use crate::UsageError;

/// Frames decoded and detected per parallel batch. Bounds memory on long
/// sequences while keeping every worker busy.
const BATCH_PER_THREAD: usize = 4;

pub fn load_model(args: &ModelArgs) -> Result<(Arc<CompiledNetwork>, DetectorConfig)> {
    let text = fs::read_to_string(&args.cfg).with_context(|| format!("reading {}", args.cfg.display()))?;
    let (spec, warnings) =
        parse_config_with_warnings(&text).with_context(|| format!("parsing {}", args.cfg.display()))?;
    for w in warnings {
        log::warn!("{}: {w}", args.cfg.display());
    }
    let bytes = fs::read(&args.weights).with_context(|| format!("reading {}", args.weights.display()))?;
    let net = load_weights(&spec, &bytes).with_context(|| format!("loading {}", args.weights.display()))?;
    let plan = CompiledNetwork::new(net, CompileOptions::default())?;
    let config = DetectorConfig {
        conf_threshold: args.conf_thresh,
        nms_threshold: args.nms_thresh,
        resize: if args.letterbox {
            ResizeMode::Letterbox
        } else {
            ResizeMode::Direct
        },
    };
    Ok((Arc::new(plan), config))
}

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string()
}

fn read_list(path: &Path) -> Result<Vec<PathBuf>> {
    let lines: Vec<String> = if path == Path::new("-") {
        io::stdin()
            .lock()
            .lines()
            .collect::<io::Result<_>>()
            .context("reading frame list from stdin")?
    } else {
        fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(str::to_string)
            .collect()
    };
    Ok(lines
        .iter()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(PathBuf::from)
        .collect())
}

/// Frames for `detect` and `bench`: a directory in file-name order, a single
/// image, or a list in the order given. Frame numbering is not checked.
pub fn unordered_frames(args: &FrameArgs) -> Result<Vec<FrameRecord>> {
    let paths = match (&args.input, &args.list) {
        (_, Some(list)) => read_list(list)?,
        (Some(input), None) if input.is_dir() => {
            let mut paths = Vec::new();
            for entry in fs::read_dir(input).with_context(|| format!("reading {}", input.display()))? {
                let path = entry?.path();
                if path.is_file() && is_image(&path) {
                    paths.push(path);
                }
            }
            paths.sort();
            paths
        }
        (Some(input), None) if input.is_file() => vec![input.clone()],
        (Some(input), None) => bail!("input {} does not exist", input.display()),
        (None, None) => return Err(UsageError("one of --input or --list is required".into()).into()),
    };
    Ok(paths
        .into_iter()
        .enumerate()
        .map(|(index, path)| FrameRecord {
            image_id: stem(&path),
            path,
            index: index as u64,
        })
        .collect())
}

/// Frames for `stream`: numbered by the trailing digits of each name and
/// required to be strictly increasing.
pub fn ordered_frames(args: &FrameArgs) -> Result<Vec<FrameRecord>> {
    match (&args.input, &args.list) {
        (_, Some(list)) => Ok(list_frames(None, Some(&read_list(list)?))?),
        (Some(input), None) if input.is_dir() => Ok(list_frames(Some(input), None)?),
        (Some(input), None) => bail!("input {} is not a directory", input.display()),
        (None, None) => Err(UsageError("one of --input or --list is required".into()).into()),
    }
}

pub fn read_image(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)
        .with_context(|| format!("decoding {}", path.display()))?
        .to_rgb8();
    Ok(RgbImage::new(
        img.width() as usize,
        img.height() as usize,
        img.into_raw(),
    )?)
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.as_bytes().to_vec())
        .context("overlay buffer size")?;
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

/// Runs the detector over `frames` on the current rayon pool, one detector
/// per worker, and hands results to `sink` in frame order.
pub fn detect_frames(
    plan: &Arc<CompiledNetwork>,
    config: DetectorConfig,
    frames: &[FrameRecord],
    mut sink: impl FnMut(&FrameRecord, &RgbImage, Vec<Detection>) -> Result<()>,
) -> Result<()> {
    let batch = rayon::current_num_threads() * BATCH_PER_THREAD;
    for chunk in frames.chunks(batch.max(1)) {
        let results: Vec<Result<(RgbImage, Vec<Detection>)>> = chunk
            .par_iter()
            .map_init(
                || Detector::new(Arc::clone(plan), config),
                |det, frame| {
                    let img = read_image(&frame.path)?;
                    let dets = det
                        .detect(&img)
                        .with_context(|| format!("detecting in {}", frame.path.display()))?;
                    Ok((img, dets))
                },
            )
            .collect();
        for (frame, result) in chunk.iter().zip(results) {
            let (img, dets) = result?;
            sink(frame, &img, dets)?;
        }
    }
    Ok(())
}
