//! Seeded inputs shared by the benchmarks.

use std::sync::Arc;

use handsoff_core::darknet::{load_weights, parse_config, LayerKind, REFERENCE_CONFIG};
use handsoff_core::engine::CompileOptions;
use handsoff_core::metrics::{ScoredBox, TruthBox};
use handsoff_core::tensor::{ConvParams, Shape, Tensor};
use handsoff_core::{BBox, CompiledNetwork, Detection, NetworkSpec, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: Shape) -> Tensor {
    Tensor::new(
        shape,
        (0..shape.len()).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
    )
    .unwrap()
}

pub fn random_conv(rng: &mut impl Rng, in_c: usize, out_c: usize, k: usize, stride: usize) -> ConvParams {
    let bound = (3.0 / (in_c * k * k) as f32).sqrt();
    ConvParams {
        out_channels: out_c,
        in_channels: in_c,
        kernel_size: k,
        stride,
        padding: k / 2,
        weights: (0..out_c * in_c * k * k)
            .map(|_| rng.random_range(-bound..bound))
            .collect(),
        bias: (0..out_c).map(|_| rng.random_range(-0.1..0.1)).collect(),
        batchnorm: None,
    }
}

/// A weights byte stream for `spec` with fan-in scaled random values.
pub fn random_weights(spec: &NetworkSpec, seed: u64) -> Vec<u8> {
    let mut r = rng(seed);
    let shapes = spec.infer_shapes().unwrap();
    let mut bytes = Vec::with_capacity(20 + 4 * spec.parameter_count().unwrap());
    for v in [0i32, 2, 0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(&0u64.to_le_bytes());
    let mut push = |v: f32| bytes.extend_from_slice(&v.to_le_bytes());
    for layer in &spec.layers {
        if let LayerKind::Convolutional {
            filters,
            size,
            batch_normalize,
            ..
        } = layer.kind
        {
            let in_c = if layer.index == 0 {
                spec.input_channels
            } else {
                shapes[layer.index - 1].channels
            };
            if batch_normalize {
                (0..filters).for_each(|_| push(r.random_range(-0.1..0.1)));
                (0..filters).for_each(|_| push(r.random_range(0.5..1.5)));
                (0..filters).for_each(|_| push(r.random_range(-0.1..0.1)));
                (0..filters).for_each(|_| push(r.random_range(0.5..2.0)));
            } else {
                (0..filters).for_each(|_| push(r.random_range(-0.1..0.1)));
            }
            let bound = (3.0 / (in_c * size * size) as f32).sqrt();
            (0..filters * in_c * size * size).for_each(|_| push(r.random_range(-bound..bound)));
        }
    }
    bytes
}

/// The reference network with random weights, compiled.
pub fn reference_network(seed: u64) -> Arc<CompiledNetwork> {
    let spec = parse_config(REFERENCE_CONFIG).unwrap();
    let net = load_weights(&spec, &random_weights(&spec, seed)).unwrap();
    Arc::new(CompiledNetwork::new(net, CompileOptions::default()).unwrap())
}

pub fn random_frame(rng: &mut impl Rng, width: usize, height: usize) -> RgbImage {
    RgbImage::from_fn(width, height, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap()
}

/// `n` overlapping detections clustered around a few centers, as NMS sees
/// them after a dense decode.
pub fn clustered_detections(rng: &mut impl Rng, n: usize) -> Vec<Detection> {
    let centers: Vec<(f32, f32)> = (0..8)
        .map(|_| (rng.random_range(50.0..350.0), rng.random_range(50.0..350.0)))
        .collect();
    (0..n)
        .map(|_| {
            let (x, y) = centers[rng.random_range(0..centers.len())];
            let confidence = rng.random_range(0.25f32..1.0);
            Detection {
                cx: x + rng.random_range(-10.0..10.0),
                cy: y + rng.random_range(-10.0..10.0),
                w: rng.random_range(30.0..60.0),
                h: rng.random_range(30.0..60.0),
                objectness: confidence,
                class_score: 1.0,
                confidence,
                class_id: 0,
            }
        })
        .collect()
}

/// Detections and ground truth over `images` frames.
pub fn eval_scene(
    rng: &mut impl Rng,
    images: usize,
) -> (Vec<ScoredBox>, std::collections::BTreeMap<String, Vec<TruthBox>>) {
    let mut dets = Vec::new();
    let mut truth = std::collections::BTreeMap::new();
    for i in 0..images {
        let id = format!("frame_{i:05}");
        let gts: Vec<TruthBox> = (0..rng.random_range(0..4))
            .map(|_| TruthBox {
                class_id: 0,
                bbox: BBox::new(
                    rng.random_range(50.0..590.0),
                    rng.random_range(50.0..430.0),
                    rng.random_range(20.0..90.0),
                    rng.random_range(20.0..90.0),
                ),
            })
            .collect();
        for g in &gts {
            for _ in 0..rng.random_range(1..3) {
                dets.push(ScoredBox {
                    image_id: id.clone(),
                    class_id: 0,
                    bbox: BBox::new(
                        g.bbox.cx + rng.random_range(-8.0..8.0),
                        g.bbox.cy + rng.random_range(-8.0..8.0),
                        g.bbox.w,
                        g.bbox.h,
                    ),
                    confidence: rng.random_range(0.0..1.0),
                });
            }
        }
        truth.insert(id, gts);
    }
    (dets, truth)
}
