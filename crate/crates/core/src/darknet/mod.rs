//! Darknet network descriptions (`.cfg`) and weight files (`.weights`).

mod config;
mod inspect;
mod weights;

use std::fmt;

pub use config::{parse_config, parse_config_with_warnings, ConfigWarning, REFERENCE_CONFIG};
pub use inspect::{inspect, inspect_spec};
pub use weights::{load_weights, ParameterizedNetwork, WeightsHeader};

use crate::error::{Error, Result};
use crate::tensor::{Shape, DEFAULT_LEAKY_SLOPE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Linear,
    Leaky { slope: f32 },
}

impl Activation {
    pub fn leaky() -> Self {
        Activation::Leaky {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Convolutional {
        filters: usize,
        size: usize,
        stride: usize,
        /// Zero padding in pixels on every side.
        padding: usize,
        batch_normalize: bool,
        activation: Activation,
    },
    /// Adds the output of `from` to the previous layer's output.
    Shortcut {
        from: usize,
        activation: Activation,
    },
    /// Concatenates the outputs of `layers` along channels.
    Route {
        layers: Vec<usize>,
    },
    Upsample {
        stride: usize,
    },
    /// Detection head over the previous layer's output; `mask` selects anchors.
    YoloHead {
        mask: Vec<usize>,
    },
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Convolutional { .. } => "convolutional",
            LayerKind::Shortcut { .. } => "shortcut",
            LayerKind::Route { .. } => "route",
            LayerKind::Upsample { .. } => "upsample",
            LayerKind::YoloHead { .. } => "yolo",
        }
    }

    /// Earlier layers this layer reads besides its immediate predecessor.
    pub fn references(&self) -> &[usize] {
        match self {
            LayerKind::Shortcut { from, .. } => std::slice::from_ref(from),
            LayerKind::Route { layers } => layers,
            _ => &[],
        }
    }

    /// Whether the layer consumes the previous layer's output.
    pub fn reads_previous(&self) -> bool {
        !matches!(self, LayerKind::Route { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub index: usize,
    pub kind: LayerKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_width: usize,
    pub input_height: usize,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
    /// `(width, height)` anchor priors in network-input pixels, shared by all heads.
    pub anchors: Vec<(f32, f32)>,
    pub classes: usize,
}

/// Static description of one detection head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSpec {
    pub layer: usize,
    pub grid_height: usize,
    pub grid_width: usize,
    pub depth: usize,
    pub anchors: Vec<(f32, f32)>,
}

impl NetworkSpec {
    pub fn input_shape(&self) -> Shape {
        Shape::new(self.input_channels, self.input_height, self.input_width)
    }

    /// Attribute count per anchor slot: box (4) + objectness + class scores.
    pub fn slot_depth(&self) -> usize {
        5 + self.classes
    }

    /// Output shape of every layer, in order. Fails on the first layer whose
    /// inputs are inconsistent.
    pub fn infer_shapes(&self) -> Result<Vec<Shape>> {
        let mut shapes: Vec<Shape> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let i = layer.index;
            let prev = if i == 0 { self.input_shape() } else { shapes[i - 1] };
            for &r in layer.kind.references() {
                if r >= i {
                    return Err(Error::ForwardReference {
                        layer: i,
                        target: r as i64,
                    });
                }
            }
            let shape = match &layer.kind {
                LayerKind::Convolutional {
                    filters,
                    size,
                    stride,
                    padding,
                    ..
                } => {
                    let out = |n: usize| (n + 2 * padding).checked_sub(*size).map(|span| span / stride + 1);
                    match (out(prev.height), out(prev.width)) {
                        (Some(h), Some(w)) => Shape::new(*filters, h, w),
                        _ => {
                            return Err(Error::ShapeMismatch {
                                layer: i,
                                expected: format!("input of at least {size}x{size} after padding"),
                                actual: prev.to_string(),
                            })
                        }
                    }
                }
                LayerKind::Shortcut { from, .. } => {
                    let other = shapes[*from];
                    if other != prev {
                        return Err(Error::ShapeMismatch {
                            layer: i,
                            expected: prev.to_string(),
                            actual: format!("{other} from layer {from}"),
                        });
                    }
                    prev
                }
                LayerKind::Route { layers } => {
                    let first = shapes[layers[0]];
                    let mut channels = 0;
                    for &l in layers {
                        let s = shapes[l];
                        if (s.height, s.width) != (first.height, first.width) {
                            return Err(Error::ShapeMismatch {
                                layer: i,
                                expected: format!("{}x{} spatial size", first.height, first.width),
                                actual: format!("{}x{} from layer {l}", s.height, s.width),
                            });
                        }
                        channels += s.channels;
                    }
                    Shape::new(channels, first.height, first.width)
                }
                LayerKind::Upsample { stride } => Shape::new(prev.channels, prev.height * stride, prev.width * stride),
                LayerKind::YoloHead { mask } => {
                    let expected = mask.len() * self.slot_depth();
                    if prev.channels != expected {
                        return Err(Error::HeadDepth {
                            layer: i,
                            masks: mask.len(),
                            classes: self.classes,
                            expected,
                            actual: prev.channels,
                        });
                    }
                    prev
                }
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }

    /// Detection heads in network order.
    pub fn heads(&self) -> Result<Vec<HeadSpec>> {
        let shapes = self.infer_shapes()?;
        Ok(self
            .layers
            .iter()
            .filter_map(|l| match &l.kind {
                LayerKind::YoloHead { mask } => {
                    let s = shapes[l.index];
                    Some(HeadSpec {
                        layer: l.index,
                        grid_height: s.height,
                        grid_width: s.width,
                        depth: s.channels,
                        anchors: mask.iter().map(|&m| self.anchors[m]).collect(),
                    })
                }
                _ => None,
            })
            .collect())
    }

    /// Float count each layer reads from a weights file.
    pub fn layer_parameter_counts(&self) -> Result<Vec<usize>> {
        let shapes = self.infer_shapes()?;
        Ok(self
            .layers
            .iter()
            .map(|l| match &l.kind {
                LayerKind::Convolutional {
                    filters,
                    size,
                    batch_normalize,
                    ..
                } => {
                    let in_c = if l.index == 0 {
                        self.input_channels
                    } else {
                        shapes[l.index - 1].channels
                    };
                    let per_channel = if *batch_normalize { 4 } else { 1 };
                    filters * per_channel + filters * in_c * size * size
                }
                _ => 0,
            })
            .collect())
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self.layer_parameter_counts()?.iter().sum())
    }
}

impl fmt::Display for NetworkSpec {
    /// Canonical config text; [`parse_config`] reads it back to an equal spec.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        config::write_config(self, f)
    }
}
