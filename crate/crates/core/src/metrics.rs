//! Detection evaluation: IoU matching, precision/recall over confidence
//! thresholds, average precision and its mean over classes.
//!
//! Detections are matched greedily in descending confidence; each ground-truth
//! box can be claimed once, so duplicates count as false positives. AP is the
//! area under the precision envelope (all-point interpolation) unless the
//! 11-point variant is requested.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    AllPoint,
    ElevenPoint,
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interpolation::AllPoint => "all-point",
            Interpolation::ElevenPoint => "11-point",
        })
    }
}

/// A detection to score, in the same coordinate frame as its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBox {
    pub image_id: String,
    pub class_id: usize,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthBox {
    pub class_id: usize,
    pub bbox: BBox,
}

/// Match outcome for one detection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedDetection {
    /// Position in the input slice.
    pub index: usize,
    pub image_id: String,
    pub class_id: usize,
    pub confidence: f64,
    pub true_positive: bool,
    /// Index of the claimed ground-truth box within its image.
    pub gt_index: Option<usize>,
    pub iou: f64,
}

/// Labels every detection TP or FP. The result is ordered by descending
/// confidence, then image id, then input position.
pub fn match_detections(
    dets: &[ScoredBox],
    truth: &BTreeMap<String, Vec<TruthBox>>,
    iou_threshold: f64,
) -> Vec<MatchedDetection> {
    let mut by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_image.entry(d.image_id.as_str()).or_default().push(i);
    }
    let empty = Vec::new();
    let groups: Vec<(&str, Vec<usize>)> = by_image.into_iter().collect();
    let mut matched: Vec<MatchedDetection> = groups
        .into_par_iter()
        .flat_map_iter(|(image, mut idx)| {
            let gts = truth.get(image).unwrap_or(&empty);
            idx.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence).then(a.cmp(&b)));
            let mut claimed = vec![false; gts.len()];
            idx.into_iter()
                .map(|i| {
                    let d = &dets[i];
                    let best = gts
                        .iter()
                        .enumerate()
                        .filter(|(g, gt)| !claimed[*g] && gt.class_id == d.class_id)
                        .map(|(g, gt)| (g, iou(&d.bbox, &gt.bbox)))
                        .fold(None::<(usize, f64)>, |best, cur| match best {
                            Some(b) if b.1 >= cur.1 => Some(b),
                            _ => Some(cur),
                        });
                    let (gt_index, overlap) = match best {
                        Some((g, o)) if o >= iou_threshold => {
                            claimed[g] = true;
                            (Some(g), o)
                        }
                        Some((_, o)) => (None, o),
                        None => (None, 0.0),
                    };
                    MatchedDetection {
                        index: i,
                        image_id: d.image_id.clone(),
                        class_id: d.class_id,
                        confidence: d.confidence,
                        true_positive: gt_index.is_some(),
                        gt_index,
                        iou: overlap,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    matched.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.image_id.cmp(&b.image_id))
            .then(a.index.cmp(&b.index))
    });
    matched
}

/// Precision and recall of all detections with confidence at or above
/// `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub ap: f64,
    pub points: Vec<PrPoint>,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// AP of `(confidence, is_tp)` pairs against `total_gt` ground-truth boxes.
/// `None` when there is neither ground truth nor any detection.
pub fn average_precision(labeled: &[(f64, bool)], total_gt: usize, mode: Interpolation) -> Option<ApResult> {
    if total_gt == 0 && labeled.is_empty() {
        return None;
    }
    let mut sorted = labeled.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &(conf, is_tp)) in sorted.iter().enumerate() {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = sorted.get(k + 1).is_none_or(|next| next.0 != conf);
        if group_ends {
            points.push(PrPoint {
                threshold: conf,
                precision: tp as f64 / (tp + fp) as f64,
                recall: if total_gt == 0 {
                    0.0
                } else {
                    tp as f64 / total_gt as f64
                },
            });
        }
    }

    let ap = if total_gt == 0 {
        0.0
    } else {
        match mode {
            Interpolation::AllPoint => {
                let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
                for k in (0..envelope.len().saturating_sub(1)).rev() {
                    envelope[k] = envelope[k].max(envelope[k + 1]);
                }
                // Integrate per run of equal envelope height so that a flat
                // curve gives exactly `recall * precision`.
                let mut area = 0.0;
                let mut run_start = 0.0;
                for k in 0..points.len() {
                    if envelope.get(k + 1) != Some(&envelope[k]) {
                        area += (points[k].recall - run_start) * envelope[k];
                        run_start = points[k].recall;
                    }
                }
                area
            }
            Interpolation::ElevenPoint => {
                (0..=10)
                    .map(|t| {
                        let r = t as f64 / 10.0;
                        points
                            .iter()
                            .filter(|p| p.recall >= r)
                            .map(|p| p.precision)
                            .fold(0.0, f64::max)
                    })
                    .sum::<f64>()
                    / 11.0
            }
        }
    };

    Some(ApResult {
        ap,
        points,
        true_positives: tp,
        false_positives: fp,
    })
}

/// Mean over the classes whose AP is defined. Values are summed in sorted
/// order so the result does not depend on class order.
pub fn mean_average_precision(aps: &[Option<f64>]) -> Result<f64> {
    let mut defined: Vec<f64> = aps.iter().flatten().copied().collect();
    defined.sort_by(f64::total_cmp);
    if defined.is_empty() {
        return Err(Error::Evaluation("no class has a defined AP".into()));
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class_id: usize,
    pub ap: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub total_gt: usize,
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub interpolation: Interpolation,
    pub images: usize,
    pub detections: usize,
    pub classes: Vec<ClassReport>,
    pub map: f64,
}

impl EvalReport {
    pub fn true_positives(&self) -> usize {
        self.classes.iter().map(|c| c.true_positives).sum()
    }

    pub fn false_positives(&self) -> usize {
        self.classes.iter().map(|c| c.false_positives).sum()
    }

    pub fn total_gt(&self) -> usize {
        self.classes.iter().map(|c| c.total_gt).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub interpolation: Interpolation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            interpolation: Interpolation::AllPoint,
        }
    }
}

/// Matches, then scores every class present in either input.
pub fn evaluate(
    dets: &[ScoredBox],
    truth: &BTreeMap<String, Vec<TruthBox>>,
    config: EvalConfig,
) -> Result<(EvalReport, Vec<MatchedDetection>)> {
    let matched = match_detections(dets, truth, config.iou_threshold);
    let classes: BTreeSet<usize> = dets
        .iter()
        .map(|d| d.class_id)
        .chain(truth.values().flatten().map(|t| t.class_id))
        .collect();
    let mut reports = Vec::new();
    for class_id in classes {
        let labeled: Vec<(f64, bool)> = matched
            .iter()
            .filter(|m| m.class_id == class_id)
            .map(|m| (m.confidence, m.true_positive))
            .collect();
        let total_gt = truth.values().flatten().filter(|t| t.class_id == class_id).count();
        let result = average_precision(&labeled, total_gt, config.interpolation);
        let (ap, tp, fp, points) = match result {
            Some(r) => (Some(r.ap), r.true_positives, r.false_positives, r.points),
            None => (None, 0, 0, Vec::new()),
        };
        reports.push(ClassReport {
            class_id,
            ap,
            true_positives: tp,
            false_positives: fp,
            total_gt,
            points,
        });
    }
    let map = mean_average_precision(&reports.iter().map(|r| r.ap).collect::<Vec<_>>())?;
    let images: BTreeSet<&str> = truth
        .keys()
        .map(String::as_str)
        .chain(dets.iter().map(|d| d.image_id.as_str()))
        .collect();
    let report = EvalReport {
        iou_threshold: config.iou_threshold,
        interpolation: config.interpolation,
        images: images.len(),
        detections: dets.len(),
        classes: reports,
        map,
    };
    Ok((report, matched))
}

/// PR points as CSV, `threshold,precision,recall`, six decimals.
pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in points {
        writeln!(out, "{:.6},{:.6},{:.6}", p.threshold, p.precision, p.recall).unwrap();
    }
    out
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "IoU threshold: {:.2}  interpolation: {}",
            self.iou_threshold, self.interpolation
        )?;
        writeln!(
            f,
            "images: {}  detections: {}  ground truth: {}",
            self.images,
            self.detections,
            self.total_gt()
        )?;
        writeln!(f, "TP: {}  FP: {}", self.true_positives(), self.false_positives())?;
        writeln!(f, "{:<8}{:>8}{:>8}{:>8}{:>8}", "class", "AP/%", "TP", "FP", "GT")?;
        for c in &self.classes {
            let ap =
                c.ap.map_or_else(|| "n/a".to_string(), |ap| format!("{:.2}", ap * 100.0));
            writeln!(
                f,
                "{:<8}{:>8}{:>8}{:>8}{:>8}",
                c.class_id, ap, c.true_positives, c.false_positives, c.total_gt
            )?;
        }
        if let [only] = self.classes.as_slice() {
            if let Some(ap) = only.ap {
                writeln!(f, "AP: {:.2}%", ap * 100.0)?;
            }
        }
        writeln!(f, "mAP: {:.2}%", self.map * 100.0)
    }
}
