//! Reference implementations used as test oracles. Each one is written for
//! clarity rather than speed and shares no code with the library beyond
//! plain data types.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use handsoff_core::geometry::BBox;
use handsoff_core::metrics::{ScoredBox, TruthBox};
use handsoff_core::postprocess::Detection;
use handsoff_core::tensor::{BatchNorm, ConvParams, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

// ------------------------------------------------------------------ tensors

pub fn random_tensor(rng: &mut impl Rng, shape: Shape, scale: f32) -> Tensor {
    Tensor::from_fn(shape, |_, _, _| rng.random_range(-scale..scale))
}

pub fn random_conv(
    rng: &mut impl Rng,
    in_c: usize,
    out_c: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> ConvParams {
    ConvParams {
        out_channels: out_c,
        in_channels: in_c,
        kernel_size: k,
        stride,
        padding,
        weights: (0..out_c * in_c * k * k).map(|_| rng.random_range(-1.0..1.0)).collect(),
        bias: (0..out_c).map(|_| rng.random_range(-1.0..1.0)).collect(),
        batchnorm: None,
    }
}

pub fn random_batchnorm(rng: &mut impl Rng, channels: usize) -> BatchNorm {
    BatchNorm {
        gamma: (0..channels).map(|_| rng.random_range(0.2..2.0)).collect(),
        beta: (0..channels).map(|_| rng.random_range(-1.0..1.0)).collect(),
        running_mean: (0..channels).map(|_| rng.random_range(-1.0..1.0)).collect(),
        running_variance: (0..channels).map(|_| rng.random_range(0.05..3.0)).collect(),
        epsilon: 1e-5,
    }
}

/// Seven nested loops in f64, straight from the definition.
pub fn naive_conv(input: &Tensor, p: &ConvParams) -> Vec<f64> {
    let (c_in, h, w) = (input.channels(), input.height(), input.width());
    let k = p.kernel_size;
    let oh = (h + 2 * p.padding - k) / p.stride + 1;
    let ow = (w + 2 * p.padding - k) / p.stride + 1;
    let mut out = vec![0.0f64; p.out_channels * oh * ow];
    for o in 0..p.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = p.bias[o] as f64;
                for c in 0..c_in {
                    for dy in 0..k {
                        for dx in 0..k {
                            let iy = (y * p.stride + dy) as isize - p.padding as isize;
                            let ix = (x * p.stride + dx) as isize - p.padding as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let wv = p.weights[((o * c_in + c) * k + dy) * k + dx] as f64;
                            acc += wv * input.get(c, iy as usize, ix as usize) as f64;
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    out
}

/// `max |a - b| / max |b|`, with the denominator floored at 1e-12.
pub fn max_rel_err(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((*x as f64 - y).abs())) / scale
}

// ---------------------------------------------------------------- geometry

pub fn iou_oracle(a: &BBox, b: &BBox) -> f64 {
    let (ax0, ax1) = (a.cx - a.w / 2.0, a.cx + a.w / 2.0);
    let (ay0, ay1) = (a.cy - a.h / 2.0, a.cy + a.h / 2.0);
    let (bx0, bx1) = (b.cx - b.w / 2.0, b.cx + b.w / 2.0);
    let (by0, by1) = (b.cy - b.h / 2.0, b.cy + b.h / 2.0);
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.w * a.h + b.w * b.h - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

// --------------------------------------------------------------------- nms

pub fn random_detections(rng: &mut impl Rng, max: usize, classes: usize) -> Vec<Detection> {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| {
            // Coarse confidences so ties actually occur.
            let confidence = rng.random_range(1..=8) as f32 / 8.0;
            Detection {
                cx: rng.random_range(0.0..40.0),
                cy: rng.random_range(0.0..40.0),
                w: rng.random_range(2.0..20.0),
                h: rng.random_range(2.0..20.0),
                objectness: confidence,
                class_score: 1.0,
                confidence,
                class_id: rng.random_range(0..classes),
            }
        })
        .collect()
}

/// Exhaustive search for the greedy fixed point. A subset `S` is the greedy
/// result iff every box is in `S` exactly when no higher-priority member of
/// `S` of the same class overlaps it beyond the threshold. Exactly one
/// subset qualifies; it is returned as input indices in priority order.
pub fn nms_subset_oracle(dets: &[Detection], threshold: f64) -> Vec<usize> {
    let n = dets.len();
    assert!(n <= 16);
    let before = |a: usize, b: usize| {
        dets[a].confidence > dets[b].confidence || (dets[a].confidence == dets[b].confidence && a < b)
    };
    let conflicts = |a: usize, b: usize| {
        dets[a].class_id == dets[b].class_id && iou_oracle(&dets[a].bbox(), &dets[b].bbox()) > threshold
    };
    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        let member = |i: usize| mask & (1 << i) != 0;
        let consistent = (0..n).all(|i| {
            let blocked = (0..n).any(|j| j != i && member(j) && before(j, i) && conflicts(j, i));
            member(i) == !blocked
        });
        if consistent {
            found.push(mask);
        }
    }
    assert_eq!(found.len(), 1, "greedy fixed point must be unique");
    let mut keep: Vec<usize> = (0..n).filter(|&i| found[0] & (1 << i) != 0).collect();
    keep.sort_by(|&a, &b| {
        if before(a, b) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });
    keep
}

// ------------------------------------------------------------------ scenes

pub struct Scene {
    pub dets: Vec<ScoredBox>,
    pub truth: BTreeMap<String, Vec<TruthBox>>,
}

fn jitter(rng: &mut impl Rng, b: &BBox, amount: f64) -> BBox {
    BBox::new(
        b.cx + rng.random_range(-amount..amount) * b.w,
        b.cy + rng.random_range(-amount..amount) * b.h,
        b.w * rng.random_range(1.0 - amount..1.0 + amount),
        b.h * rng.random_range(1.0 - amount..1.0 + amount),
    )
}

/// Images with a handful of boxes, detections near some of them plus
/// clutter. Confidences come from a small grid so ties occur.
pub fn random_scene(rng: &mut impl Rng, images: usize, classes: usize) -> Scene {
    let mut dets = Vec::new();
    let mut truth = BTreeMap::new();
    for i in 0..images {
        let id = format!("img{i:03}");
        // At least one box overall so every collection has a defined AP.
        let n_gt = rng.random_range(usize::from(i == 0)..4);
        let gts: Vec<TruthBox> = (0..n_gt)
            .map(|_| TruthBox {
                class_id: rng.random_range(0..classes),
                bbox: BBox::new(
                    rng.random_range(20.0..80.0),
                    rng.random_range(20.0..80.0),
                    rng.random_range(8.0..30.0),
                    rng.random_range(8.0..30.0),
                ),
            })
            .collect();
        for g in &gts {
            for _ in 0..rng.random_range(0..3) {
                let class_id = if rng.random_bool(0.9) {
                    g.class_id
                } else {
                    rng.random_range(0..classes)
                };
                dets.push(ScoredBox {
                    image_id: id.clone(),
                    class_id,
                    bbox: jitter(rng, &g.bbox, 0.3),
                    confidence: rng.random_range(1..=20) as f64 / 20.0,
                });
            }
        }
        for _ in 0..rng.random_range(0..3) {
            dets.push(ScoredBox {
                image_id: id.clone(),
                class_id: rng.random_range(0..classes),
                bbox: BBox::new(
                    rng.random_range(0.0..100.0),
                    rng.random_range(0.0..100.0),
                    rng.random_range(4.0..30.0),
                    rng.random_range(4.0..30.0),
                ),
                confidence: rng.random_range(1..=20) as f64 / 20.0,
            });
        }
        truth.insert(id, gts);
    }
    // Interleave images in the input.
    for i in (1..dets.len()).rev() {
        let j = rng.random_range(0..=i);
        dets.swap(i, j);
    }
    Scene { dets, truth }
}

/// TP flags in input order: detections visited by descending confidence,
/// then image id, then input position; each claims the best-overlapping
/// unclaimed same-class box of its image (first on ties) if it reaches the
/// threshold.
pub fn match_oracle(scene: &Scene, threshold: f64) -> Vec<bool> {
    let d = &scene.dets;
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| {
        d[b].confidence
            .partial_cmp(&d[a].confidence)
            .unwrap()
            .then_with(|| d[a].image_id.cmp(&d[b].image_id))
            .then(a.cmp(&b))
    });
    let mut claimed: BTreeMap<(String, usize), bool> = BTreeMap::new();
    let mut tp = vec![false; d.len()];
    for i in order {
        let gts = scene.truth.get(&d[i].image_id).map(Vec::as_slice).unwrap_or(&[]);
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt.class_id != d[i].class_id || claimed.contains_key(&(d[i].image_id.clone(), g)) {
                continue;
            }
            let o = iou_oracle(&d[i].bbox, &gt.bbox);
            if best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        if let Some((g, o)) = best {
            if o >= threshold {
                claimed.insert((d[i].image_id.clone(), g), true);
                tp[i] = true;
            }
        }
    }
    tp
}

/// All-point AP by sweeping every distinct confidence as a threshold and
/// recounting from scratch, then integrating the upper envelope of
/// precision over the distinct recall levels.
pub fn ap_sweep_oracle(labeled: &[(f64, bool)], total_gt: usize) -> f64 {
    if total_gt == 0 {
        return 0.0;
    }
    let mut thresholds: Vec<f64> = labeled.iter().map(|l| l.0).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let curve: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let kept: Vec<&(f64, bool)> = labeled.iter().filter(|l| l.0 >= t).collect();
            let tp = kept.iter().filter(|l| l.1).count() as f64;
            (tp / total_gt as f64, tp / kept.len() as f64)
        })
        .collect();
    let mut recalls: Vec<f64> = curve.iter().map(|c| c.0).collect();
    recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    recalls.dedup();
    let mut area = 0.0;
    let mut prev = 0.0;
    for r in recalls {
        let best = curve.iter().filter(|c| c.0 >= r).map(|c| c.1).fold(0.0, f64::max);
        area += (r - prev) * best;
        prev = r;
    }
    area
}

// ------------------------------------------------------------------ events

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSpan {
    pub start: usize,
    pub end: usize,
}

/// Event spans from run-length structure: a positive run of at least
/// `open` frames starts an event; later runs join it while the negative gap
/// before them is shorter than `close`.
pub fn event_oracle(pattern: &[bool], open: usize, close: usize) -> Vec<EventSpan> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < pattern.len() {
        if pattern[i] {
            let start = i;
            while i < pattern.len() && pattern[i] {
                i += 1;
            }
            runs.push((start, i - 1));
        } else {
            i += 1;
        }
    }
    let mut events = Vec::new();
    let mut current: Option<EventSpan> = None;
    for (start, end) in runs {
        if let Some(ev) = current.as_mut() {
            if start - ev.end - 1 < close {
                ev.end = end;
                continue;
            }
            events.push(current.take().unwrap());
        }
        if end - start + 1 >= open {
            current = Some(EventSpan { start, end });
        }
    }
    events.extend(current);
    events
}

pub fn parse_pattern(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

// ---------------------------------------------------------------- networks

/// Config text for a random valid graph, tracking shapes by hand. Ends each
/// of one to three stages with a 1x1 convolution and a yolo section.
pub fn random_network_cfg(rng: &mut impl Rng) -> String {
    let width = 4 * rng.random_range(2..=6);
    let height = 4 * rng.random_range(2..=6);
    let channels = rng.random_range(1..=4);
    let classes = rng.random_range(1..=3);
    let masks_per_head = rng.random_range(1..=3);
    let heads = rng.random_range(1..=3);
    let anchors = masks_per_head * heads;

    let mut text = format!("[net]\nwidth={width}\nheight={height}\nchannels={channels}\n\n");
    // (channels, height, width) of every layer so far.
    let mut shapes: Vec<(usize, usize, usize)> = Vec::new();
    let cur = |shapes: &Vec<(usize, usize, usize)>| *shapes.last().unwrap_or(&(channels, height, width));
    let mut mask_next = 0;
    for _ in 0..heads {
        for _ in 0..rng.random_range(1..=5) {
            let (c, h, w) = cur(&shapes);
            let idx = shapes.len();
            match rng.random_range(0..4) {
                0 | 1 => {
                    let size = [1, 3][rng.random_range(0..2)];
                    let stride = if h >= 4 && w >= 4 && rng.random_bool(0.3) { 2 } else { 1 };
                    let filters = rng.random_range(1..=6);
                    let bn = rng.random_bool(0.5) as u8;
                    let act = ["leaky", "linear"][rng.random_range(0..2)];
                    let pad = size / 2;
                    text += &format!(
                        "[convolutional]\nbatch_normalize={bn}\nfilters={filters}\nsize={size}\nstride={stride}\npad=1\nactivation={act}\n\n"
                    );
                    shapes.push((
                        filters,
                        (h + 2 * pad - size) / stride + 1,
                        (w + 2 * pad - size) / stride + 1,
                    ));
                }
                2 => {
                    let same: Vec<usize> = (0..idx.saturating_sub(1)).filter(|&j| shapes[j] == (c, h, w)).collect();
                    if same.is_empty() || idx == 0 {
                        text += "[upsample]\nstride=2\n\n";
                        shapes.push((c, h * 2, w * 2));
                    } else {
                        let j = same[rng.random_range(0..same.len())];
                        let from = if rng.random_bool(0.5) {
                            format!("{}", j as i64 - idx as i64)
                        } else {
                            j.to_string()
                        };
                        text += &format!("[shortcut]\nfrom={from}\nactivation=linear\n\n");
                        shapes.push((c, h, w));
                    }
                }
                _ => {
                    if idx == 0 {
                        text += "[upsample]\nstride=1\n\n";
                        shapes.push((c, h, w));
                        continue;
                    }
                    let same: Vec<usize> = (0..idx).filter(|&j| (shapes[j].1, shapes[j].2) == (h, w)).collect();
                    let mut picked = vec![idx - 1];
                    if rng.random_bool(0.5) {
                        picked.push(same[rng.random_range(0..same.len())]);
                    }
                    let refs: Vec<String> = picked
                        .iter()
                        .map(|&j| {
                            if rng.random_bool(0.5) {
                                format!("{}", j as i64 - idx as i64)
                            } else {
                                j.to_string()
                            }
                        })
                        .collect();
                    text += &format!("[route]\nlayers={}\n\n", refs.join(","));
                    shapes.push((picked.iter().map(|&j| shapes[j].0).sum(), h, w));
                }
            }
        }
        let (_, h, w) = cur(&shapes);
        let depth = masks_per_head * (5 + classes);
        text += &format!("[convolutional]\nfilters={depth}\nsize=1\nstride=1\npad=1\nactivation=linear\n\n");
        shapes.push((depth, h, w));
        let mask: Vec<String> = (mask_next..mask_next + masks_per_head).map(|m| m.to_string()).collect();
        mask_next += masks_per_head;
        let anchor_list: Vec<String> = (0..anchors).map(|a| format!("{},{}", 3 + 2 * a, 4 + 3 * a)).collect();
        text += &format!(
            "[yolo]\nmask={}\nanchors={}\nclasses={classes}\nnum={anchors}\n\n",
            mask.join(","),
            anchor_list.join(", ")
        );
        shapes.push((depth, h, w));
    }
    text
}

/// Little-endian weights file for `floats` parameters under a version
/// 0.2.0 header.
pub fn weights_bytes(floats: impl IntoIterator<Item = f32>) -> Vec<u8> {
    let mut out = Vec::new();
    for v in [0i32, 2, 0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&0u64.to_le_bytes());
    for f in floats {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}
