//! Frame-to-detections composition and latency measurement.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::engine::{preprocess, CompiledNetwork, Engine, ResizeMode};
use crate::error::{Error, Result};
use crate::postprocess::{decode, map_to_source, nms, Detection, DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_THRESHOLD};
use crate::raster::RgbImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub conf_threshold: f32,
    pub nms_threshold: f32,
    pub resize: ResizeMode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            nms_threshold: DEFAULT_NMS_THRESHOLD,
            resize: ResizeMode::Direct,
        }
    }
}

/// Wall-clock seconds spent in each stage of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub preprocess: f64,
    pub forward: f64,
    pub postprocess: f64,
}

/// preprocess -> forward -> decode -> nms -> map to frame pixels.
#[derive(Debug)]
pub struct Detector {
    engine: Engine,
    config: DetectorConfig,
}

impl Detector {
    pub fn new(plan: Arc<CompiledNetwork>, config: DetectorConfig) -> Self {
        Self {
            engine: Engine::new(plan),
            config,
        }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>> {
        self.detect_timed(image).map(|(d, _)| d)
    }

    pub fn detect_timed(&mut self, image: &RgbImage) -> Result<(Vec<Detection>, StageTimes)> {
        let (w, h) = self.engine.plan().input_size();
        let t0 = Instant::now();
        let (input, record) = preprocess(image, w, h, self.config.resize)?;
        let t1 = Instant::now();
        let heads = self.engine.forward(&input)?;
        let t2 = Instant::now();
        let mut candidates = Vec::new();
        for head in &heads {
            candidates.extend(decode(head, self.config.conf_threshold)?);
        }
        let dets: Vec<Detection> = nms(&candidates, self.config.nms_threshold)
            .iter()
            .filter_map(|d| map_to_source(d, &record))
            .collect();
        let t3 = Instant::now();
        let times = StageTimes {
            preprocess: (t1 - t0).as_secs_f64(),
            forward: (t2 - t1).as_secs_f64(),
            postprocess: (t3 - t2).as_secs_f64(),
        };
        Ok((dets, times))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub warmup: usize,
    pub runs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { warmup: 3, runs: 50 }
    }
}

/// Summary of per-run latencies, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Population standard deviation.
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl StageStats {
    pub fn from_samples(samples_ms: &[f64]) -> Self {
        assert!(!samples_ms.is_empty());
        let n = samples_ms.len() as f64;
        let mean = samples_ms.iter().sum::<f64>() / n;
        let var = samples_ms.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        } else {
            sorted[mid]
        };
        Self {
            mean_ms: mean,
            median_ms: median,
            std_ms: var.sqrt(),
            min_ms: sorted[0],
            max_ms: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub runs: usize,
    pub warmup: usize,
    pub frames: usize,
    pub preprocess: StageStats,
    pub forward: StageStats,
    pub postprocess: StageStats,
    pub end_to_end: StageStats,
    /// `1000 / end_to_end.mean_ms`.
    pub fps: f64,
}

/// Times `config.runs` frames after `config.warmup` untimed ones, cycling
/// through `frames`.
pub fn benchmark(detector: &mut Detector, frames: &[RgbImage], config: BenchConfig) -> Result<LatencyReport> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one frame".into()));
    }
    if config.runs == 0 {
        return Err(Error::InvalidArgument("benchmark needs at least one run".into()));
    }
    for k in 0..config.warmup {
        detector.detect_timed(&frames[k % frames.len()])?;
    }
    let mut samples: [Vec<f64>; 4] = Default::default();
    for k in 0..config.runs {
        let (_, t) = detector.detect_timed(&frames[k % frames.len()])?;
        let ms = [t.preprocess, t.forward, t.postprocess].map(|s| s * 1e3);
        for (dst, v) in samples.iter_mut().zip(ms) {
            dst.push(v);
        }
        samples[3].push(ms.iter().sum());
    }
    let [pre, fwd, post, total] = samples.map(|s| StageStats::from_samples(&s));
    Ok(LatencyReport {
        runs: config.runs,
        warmup: config.warmup,
        frames: frames.len(),
        preprocess: pre,
        forward: fwd,
        postprocess: post,
        fps: if total.mean_ms > 0.0 {
            1e3 / total.mean_ms
        } else {
            f64::INFINITY
        },
        end_to_end: total,
    })
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "runs: {}  warmup: {}  frames: {}",
            self.runs, self.warmup, self.frames
        )?;
        writeln!(f, "{:<12}{:>12}{:>12}{:>12}", "stage", "mean ms", "median ms", "std ms")?;
        for (name, s) in [
            ("preprocess", &self.preprocess),
            ("forward", &self.forward),
            ("postprocess", &self.postprocess),
            ("end-to-end", &self.end_to_end),
        ] {
            writeln!(
                f,
                "{name:<12}{:>12.4}{:>12.4}{:>12.4}",
                s.mean_ms, s.median_ms, s.std_ms
            )?;
        }
        writeln!(f, "fps: {:.2}", self.fps)
    }
}
