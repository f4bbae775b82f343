//! Layer-graph execution: frames in, detection-head tensors out.

mod preprocess;

use std::sync::Arc;

pub use preprocess::{preprocess, PreprocessRecord, ResizeMode};

use crate::darknet::{Activation, HeadSpec, LayerKind, ParameterizedNetwork};
use crate::error::{Error, Result};
use crate::tensor::{
    add, apply_batchnorm, concat_channels, conv2d_with_scratch, leaky_relu_in_place, upsample_nearest, ConvParams,
    ShapeError, Tensor,
};

/// Raw output of one detection head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    /// `depth x grid_height x grid_width`.
    pub tensor: Tensor,
    pub layer: usize,
    pub anchors: Vec<(f32, f32)>,
    pub classes: usize,
    /// Network-input pixels per grid cell, horizontally and vertically.
    pub stride_x: f32,
    pub stride_y: f32,
}

impl HeadOutput {
    pub fn grid_height(&self) -> usize {
        self.tensor.height()
    }

    pub fn grid_width(&self) -> usize {
        self.tensor.width()
    }

    pub fn depth(&self) -> usize {
        self.tensor.channels()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompileOptions {
    /// Fold batch normalization into convolution weights ahead of time.
    pub fold_batchnorm: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { fold_batchnorm: true }
    }
}

/// Execution plan over immutable parameters; share it between engines with
/// an [`Arc`].
#[derive(Debug)]
pub struct CompiledNetwork {
    net: ParameterizedNetwork,
    convs: Vec<Option<ConvParams>>,
    /// Last layer that reads each output by explicit reference (route or
    /// shortcut source), if any. The immediate successor gets it directly.
    last_ref: Vec<Option<usize>>,
    heads: Vec<HeadSpec>,
}

impl CompiledNetwork {
    pub fn new(net: ParameterizedNetwork, options: CompileOptions) -> Result<Self> {
        let spec = net.spec();
        let n = spec.layers.len();
        let convs = (0..n)
            .map(|i| {
                net.conv_params(i).map(|p| {
                    if options.fold_batchnorm {
                        p.fold_batchnorm()
                    } else {
                        p.clone()
                    }
                })
            })
            .collect();
        let mut last_ref: Vec<Option<usize>> = vec![None; n];
        for layer in &spec.layers {
            for &r in layer.kind.references() {
                last_ref[r] = Some(layer.index);
            }
        }
        let heads = spec.heads()?;
        Ok(Self {
            net,
            convs,
            last_ref,
            heads,
        })
    }

    pub fn network(&self) -> &ParameterizedNetwork {
        &self.net
    }

    pub fn heads(&self) -> &[HeadSpec] {
        &self.heads
    }

    pub fn input_size(&self) -> (usize, usize) {
        let s = self.net.spec();
        (s.input_width, s.input_height)
    }
}

/// Upper bound on [`ForwardStats::peak_live`] for the shipped reference
/// configuration. The two backbone taps wait for the route joins while a
/// residual block stores its output just before releasing its source.
pub const REFERENCE_PEAK_LIVE: usize = 4;

/// Instrumentation from the most recent forward pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardStats {
    /// Most layer outputs retained at once for later layers.
    pub peak_live: usize,
}

/// One executor over a shared [`CompiledNetwork`]. Holds scratch buffers, so
/// each thread needs its own.
#[derive(Debug)]
pub struct Engine {
    plan: Arc<CompiledNetwork>,
    scratch: Vec<f32>,
    stats: ForwardStats,
}

fn at_layer(layer: usize) -> impl Fn(ShapeError) -> Error {
    move |e| Error::ShapeMismatch {
        layer,
        expected: e.expected,
        actual: e.actual,
    }
}

impl Engine {
    pub fn new(plan: Arc<CompiledNetwork>) -> Self {
        Self {
            plan,
            scratch: Vec::new(),
            stats: ForwardStats::default(),
        }
    }

    pub fn plan(&self) -> &Arc<CompiledNetwork> {
        &self.plan
    }

    pub fn last_stats(&self) -> ForwardStats {
        self.stats
    }

    /// Runs every layer and returns the head inputs in network order.
    pub fn forward(&mut self, input: &Tensor) -> Result<Vec<HeadOutput>> {
        let plan = Arc::clone(&self.plan);
        let spec = plan.net.spec();
        if input.shape() != spec.input_shape() {
            return Err(Error::ShapeMismatch {
                layer: 0,
                expected: format!("network input {}", spec.input_shape()),
                actual: input.shape().to_string(),
            });
        }

        let n = spec.layers.len();
        let mut slots: Vec<Option<Tensor>> = vec![None; n];
        let mut live = 0usize;
        let mut peak = 0usize;
        let mut heads = Vec::with_capacity(plan.heads.len());
        let mut head_specs = plan.heads.iter();
        let mut prev: Option<Tensor> = None;

        for layer in &spec.layers {
            let i = layer.index;
            let input_of_prev = || -> &Tensor { prev.as_ref().unwrap_or(input) };
            let out = match &layer.kind {
                LayerKind::Convolutional { activation, .. } => {
                    let params = plan.convs[i].as_ref().expect("convolution parameters present");
                    let x = input_of_prev();
                    if x.channels() != params.in_channels {
                        return Err(Error::ChannelMismatch {
                            layer: i,
                            expected: params.in_channels,
                            actual: x.channels(),
                        });
                    }
                    let mut y = conv2d_with_scratch(x, params, &mut self.scratch).map_err(at_layer(i))?;
                    if let Some(bn) = &params.batchnorm {
                        y = apply_batchnorm(&y, bn).map_err(at_layer(i))?;
                    }
                    activate(&mut y, activation);
                    y
                }
                LayerKind::Shortcut { from, activation } => {
                    let other = slots[*from].as_ref().expect("shortcut source retained");
                    let mut y = add(input_of_prev(), other).map_err(at_layer(i))?;
                    activate(&mut y, activation);
                    y
                }
                LayerKind::Route { layers } => {
                    let parts: Vec<&Tensor> = layers
                        .iter()
                        .map(|&l| slots[l].as_ref().expect("route source retained"))
                        .collect();
                    concat_channels(&parts).map_err(at_layer(i))?
                }
                LayerKind::Upsample { stride } => upsample_nearest(input_of_prev(), *stride),
                LayerKind::YoloHead { .. } => {
                    let x = input_of_prev().clone();
                    let head = head_specs.next().expect("head spec per yolo layer");
                    if x.channels() != head.depth {
                        return Err(Error::HeadDepth {
                            layer: i,
                            masks: head.anchors.len(),
                            classes: spec.classes,
                            expected: head.depth,
                            actual: x.channels(),
                        });
                    }
                    heads.push(HeadOutput {
                        stride_x: spec.input_width as f32 / x.width() as f32,
                        stride_y: spec.input_height as f32 / x.height() as f32,
                        tensor: x.clone(),
                        layer: i,
                        anchors: head.anchors.clone(),
                        classes: spec.classes,
                    });
                    x
                }
            };

            if plan.last_ref[i].is_some() {
                slots[i] = Some(out.clone());
                live += 1;
            }
            peak = peak.max(live);
            for &r in layer.kind.references() {
                if plan.last_ref[r] == Some(i) && slots[r].take().is_some() {
                    live -= 1;
                }
            }
            prev = Some(out);
        }

        self.stats = ForwardStats { peak_live: peak };
        Ok(heads)
    }
}

fn activate(t: &mut Tensor, activation: &Activation) {
    if let Activation::Leaky { slope } = activation {
        leaky_relu_in_place(t, *slope);
    }
}
