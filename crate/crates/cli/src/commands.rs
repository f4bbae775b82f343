use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use handsoff_core::darknet::{inspect_spec, parse_config_with_warnings, REFERENCE_CONFIG};
use handsoff_core::data_io::{load_ground_truth, read_detections, render_overlay, write_detections, DetectionRecord};
use handsoff_core::metrics::{evaluate, pr_csv, ScoredBox, TruthBox};
use handsoff_core::{
    benchmark, load_weights, BBox, BenchConfig, Debounce, Detector, EvalConfig, EventAggregator, Interpolation,
    RgbImage,
};

use crate::args::{BenchArgs, DetectArgs, EvalArgs, InspectArgs, StreamArgs};
use crate::frames::{detect_frames, load_model, ordered_frames, read_image, unordered_frames, write_png};

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            ))
        }
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn detect(a: DetectArgs) -> Result<()> {
    let (plan, config) = load_model(&a.model)?;
    let frames = unordered_frames(&a.frames)?;
    if frames.is_empty() {
        log::warn!("no frames found; writing an empty detections file");
    }
    if let Some(dir) = &a.render {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut out = open_output(a.output.as_deref())?;
    let mut total = 0;
    detect_frames(&plan, config, &frames, |frame, img, dets| {
        if let Some(dir) = &a.render {
            let overlay = render_overlay(img, &dets, None);
            write_png(
                &dir.join(format!("{}{}.png", frame.image_id, a.render_suffix)),
                &overlay,
            )?;
        }
        total += dets.len();
        let records: Vec<DetectionRecord> = dets
            .into_iter()
            .map(|detection| DetectionRecord {
                image_id: frame.image_id.clone(),
                detection,
            })
            .collect();
        Ok(write_detections(&records, &mut out)?)
    })?;
    out.flush()?;
    log::info!("{total} detections in {} frames", frames.len());
    Ok(())
}

/// Locates `<id>.<ext>` under `dir` and reads its dimensions.
fn frame_size(dir: &Path, id: &str) -> Result<(usize, usize)> {
    for ext in handsoff_core::data_io::IMAGE_EXTENSIONS {
        for ext in [ext.to_string(), ext.to_ascii_uppercase()] {
            let path = dir.join(format!("{id}.{ext}"));
            if path.is_file() {
                let (w, h) = image::image_dimensions(&path).with_context(|| format!("reading {}", path.display()))?;
                return Ok((w as usize, h as usize));
            }
        }
    }
    bail!("no frame named {id} in {} to take the image size from", dir.display())
}

/// `curve.csv` -> `curve.class1.csv`.
fn class_path(path: &Path, class_id: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pr");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.class{class_id}.{ext}"),
        None => format!("{stem}.class{class_id}"),
    };
    path.with_file_name(name)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let file = File::open(&a.detections).with_context(|| format!("opening {}", a.detections.display()))?;
    let records =
        read_detections(BufReader::new(file)).with_context(|| format!("reading {}", a.detections.display()))?;
    let annotations = load_ground_truth(&a.gt, None)?;

    let det_ids: BTreeSet<&str> = records.iter().map(|r| r.image_id.as_str()).collect();
    if !records.is_empty() && !det_ids.iter().any(|id| annotations.contains_key(*id)) {
        bail!(
            "no image_id in {} has an annotation file in {}",
            a.detections.display(),
            a.gt.display()
        );
    }
    let unannotated: Vec<&str> = det_ids
        .iter()
        .copied()
        .filter(|id| !annotations.contains_key(*id))
        .collect();
    if !unannotated.is_empty() {
        log::warn!(
            "{} frames with detections have no annotation file (first: {}); scoring them as frames without boxes",
            unannotated.len(),
            unannotated[0]
        );
    }

    let mut truth: BTreeMap<String, Vec<TruthBox>> = BTreeMap::new();
    for (id, boxes) in &annotations {
        let pixels = if boxes.is_empty() {
            Vec::new()
        } else {
            let (w, h) = match (a.image_size, &a.input) {
                (Some(size), _) => size,
                (None, Some(dir)) => frame_size(dir, id)?,
                (None, None) => unreachable!("clap requires --input or --image-size"),
            };
            boxes.iter().map(|b| b.to_pixels(w, h)).collect()
        };
        truth.insert(id.clone(), pixels);
    }
    for id in unannotated {
        truth.insert(id.to_string(), Vec::new());
    }

    let dets: Vec<ScoredBox> = records
        .iter()
        .map(|r| {
            let d = &r.detection;
            ScoredBox {
                image_id: r.image_id.clone(),
                class_id: d.class_id,
                bbox: BBox::new(d.cx as f64, d.cy as f64, d.w as f64, d.h as f64),
                confidence: d.confidence as f64,
            }
        })
        .collect();
    let config = EvalConfig {
        iou_threshold: a.iou,
        interpolation: if a.eleven_point {
            Interpolation::ElevenPoint
        } else {
            Interpolation::AllPoint
        },
    };
    let (report, matched) = evaluate(&dets, &truth, config)?;
    print!("{report}");

    if let Some(path) = &a.pr_csv {
        let scored: Vec<_> = report.classes.iter().filter(|c| c.ap.is_some()).collect();
        for c in &scored {
            let target = if scored.len() == 1 {
                path.clone()
            } else {
                class_path(path, c.class_id)
            };
            fs::write(&target, pr_csv(&c.points)).with_context(|| format!("writing {}", target.display()))?;
        }
    }
    if let Some(path) = &a.matches {
        let mut out = open_output(Some(path))?;
        for m in &matched {
            writeln!(out, "{}", serde_json::to_string(m)?)?;
        }
        out.flush()?;
    }
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn stream(a: StreamArgs) -> Result<()> {
    let (plan, config) = load_model(&a.model)?;
    let frames = ordered_frames(&a.frames)?;
    if frames.is_empty() {
        log::warn!("no frames found; no events to report");
    }
    let mut agg = EventAggregator::new(Debounce {
        open_after: a.debounce_open as usize,
        close_after: a.debounce_close as usize,
    });
    let mut out = open_output(a.output.as_deref())?;
    let mut events = 0;
    detect_frames(&plan, config, &frames, |frame, _, dets| {
        if let Some(ev) = agg.push(frame.index, &dets) {
            writeln!(out, "{}", serde_json::to_string(&ev)?)?;
            events += 1;
        }
        Ok(())
    })?;
    if let Some(ev) = agg.finish() {
        writeln!(out, "{}", serde_json::to_string(&ev)?)?;
        events += 1;
    }
    out.flush()?;
    log::info!("{events} events over {} frames", frames.len());
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let (plan, config) = load_model(&a.model)?;
    let images: Vec<RgbImage> = if a.frames.input.is_none() && a.frames.list.is_none() {
        let (w, h) = plan.input_size();
        vec![RgbImage::filled(w, h, [128, 128, 128])?]
    } else {
        let frames = unordered_frames(&a.frames)?;
        if frames.is_empty() {
            bail!("no frames found to benchmark on");
        }
        frames.iter().map(|f| read_image(&f.path)).collect::<Result<_>>()?
    };
    let mut detector = Detector::new(plan, config);
    let report = benchmark(
        &mut detector,
        &images,
        BenchConfig {
            warmup: a.warmup as usize,
            runs: a.runs as usize,
        },
    )?;
    let json = serde_json::to_string(&report)?;
    print!("{report}");
    println!("{json}");
    if let Some(path) = &a.json {
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let (text, origin) = match &a.cfg {
        Some(p) => (
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (REFERENCE_CONFIG.to_string(), "reference network".to_string()),
    };
    let (spec, warnings) = parse_config_with_warnings(&text).with_context(|| format!("parsing {origin}"))?;
    for w in warnings {
        log::warn!("{origin}: {w}");
    }
    let table = match &a.weights {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let net = load_weights(&spec, &bytes).with_context(|| format!("loading {}", p.display()))?;
            handsoff_core::darknet::inspect(&net)
        }
        None => inspect_spec(&spec)?,
    };
    print!("{table}");
    Ok(())
}
