use super::{LayerKind, NetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{BatchNorm, ConvParams, Shape, DEFAULT_BN_EPSILON};

/// Leading block of a weights file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightsHeader {
    pub major: i32,
    pub minor: i32,
    pub revision: i32,
    pub images_seen: u64,
}

impl WeightsHeader {
    /// Versions from 0.2 on store `images_seen` as 64 bits.
    pub fn wide_counter(major: i32, minor: i32) -> bool {
        major as i64 * 10 + minor as i64 >= 2
    }

    pub fn byte_len(&self) -> usize {
        if Self::wide_counter(self.major, self.minor) {
            20
        } else {
            16
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let int = |i: usize| {
            bytes
                .get(i * 4..i * 4 + 4)
                .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
        };
        let (Some(major), Some(minor), Some(revision)) = (int(0), int(1), int(2)) else {
            return Err(Error::TruncatedHeader {
                needed: 16,
                available: bytes.len(),
            });
        };
        let images_seen = if Self::wide_counter(major, minor) {
            match bytes.get(12..20) {
                Some(b) => u64::from_le_bytes(b.try_into().unwrap()),
                None => {
                    return Err(Error::TruncatedHeader {
                        needed: 20,
                        available: bytes.len(),
                    })
                }
            }
        } else {
            match bytes.get(12..16) {
                Some(b) => u32::from_le_bytes(b.try_into().unwrap()) as u64,
                None => {
                    return Err(Error::TruncatedHeader {
                        needed: 16,
                        available: bytes.len(),
                    })
                }
            }
        };
        Ok(Self {
            major,
            minor,
            revision,
            images_seen,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20);
        out.extend_from_slice(&self.major.to_le_bytes());
        out.extend_from_slice(&self.minor.to_le_bytes());
        out.extend_from_slice(&self.revision.to_le_bytes());
        if Self::wide_counter(self.major, self.minor) {
            out.extend_from_slice(&self.images_seen.to_le_bytes());
        } else {
            out.extend_from_slice(&(self.images_seen as u32).to_le_bytes());
        }
        out
    }
}

/// A validated network with parameters for every convolutional layer.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct ParameterizedNetwork {
    spec: NetworkSpec,
    header: Option<WeightsHeader>,
    shapes: Vec<Shape>,
    conv: Vec<Option<ConvParams>>,
}

impl ParameterizedNetwork {
    /// Builds a network from in-memory parameters, one entry per layer
    /// (`Some` exactly for convolutional layers).
    pub fn from_params(spec: NetworkSpec, conv: Vec<Option<ConvParams>>) -> Result<Self> {
        let shapes = spec.infer_shapes()?;
        if conv.len() != spec.layers.len() {
            return Err(Error::InvalidTensor(format!(
                "{} parameter slots for {} layers",
                conv.len(),
                spec.layers.len()
            )));
        }
        for (layer, params) in spec.layers.iter().zip(&conv) {
            let i = layer.index;
            let in_c = if i == 0 {
                spec.input_channels
            } else {
                shapes[i - 1].channels
            };
            match (&layer.kind, params) {
                (
                    LayerKind::Convolutional {
                        filters,
                        size,
                        stride,
                        padding,
                        batch_normalize,
                        ..
                    },
                    Some(p),
                ) => {
                    let expected = (*filters, in_c, *size, *stride, *padding, *batch_normalize);
                    let actual = (
                        p.out_channels,
                        p.in_channels,
                        p.kernel_size,
                        p.stride,
                        p.padding,
                        p.batchnorm.is_some(),
                    );
                    if expected != actual {
                        return Err(Error::ShapeMismatch {
                            layer: i,
                            expected: format!("(out, in, k, stride, pad, bn) = {expected:?}"),
                            actual: format!("{actual:?}"),
                        });
                    }
                    p.validate().map_err(|e| Error::ShapeMismatch {
                        layer: i,
                        expected: e.expected,
                        actual: e.actual,
                    })?;
                    check_variance(i, p)?;
                }
                (LayerKind::Convolutional { .. }, None) => {
                    return Err(Error::InvalidTensor(format!(
                        "layer {i}: missing convolution parameters"
                    )))
                }
                (_, Some(_)) => {
                    return Err(Error::InvalidTensor(format!(
                        "layer {i}: parameters given for a non-convolutional layer"
                    )))
                }
                (_, None) => {}
            }
        }
        Ok(Self {
            spec,
            header: None,
            shapes,
            conv,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn header(&self) -> Option<&WeightsHeader> {
        self.header.as_ref()
    }

    /// Output shape of each layer.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn conv_params(&self, layer: usize) -> Option<&ConvParams> {
        self.conv.get(layer).and_then(Option::as_ref)
    }

    /// Count of stored parameter floats.
    pub fn parameter_count(&self) -> usize {
        self.conv
            .iter()
            .flatten()
            .map(|p| p.weights.len() + p.bias.len() + if p.batchnorm.is_some() { 3 * p.out_channels } else { 0 })
            .sum()
    }
}

fn check_variance(layer: usize, p: &ConvParams) -> Result<()> {
    if let Some(bn) = &p.batchnorm {
        if let Some((channel, &value)) = bn
            .running_variance
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v < 0.0)
        {
            return Err(Error::NegativeVariance { layer, channel, value });
        }
    }
    Ok(())
}

/// Reads a darknet weights file for `spec`. Every byte must be consumed.
///
/// Per convolutional layer, in order: with batch norm `beta, gamma,
/// running_mean, running_variance`, otherwise `bias` (each `filters` floats),
/// then the kernel. All values are little-endian `f32`.
pub fn load_weights(spec: &NetworkSpec, bytes: &[u8]) -> Result<ParameterizedNetwork> {
    let header = WeightsHeader::parse(bytes)?;
    let header_len = header.byte_len();
    let counts = spec.layer_parameter_counts()?;
    let shapes = spec.infer_shapes()?;

    let body = &bytes[header_len..];
    let needed: usize = counts.iter().sum::<usize>() * 4;
    if body.len() < needed {
        let mut offset = 0;
        let layer = counts
            .iter()
            .position(|&c| {
                offset += c * 4;
                offset > body.len()
            })
            .unwrap_or(0);
        return Err(Error::TruncatedWeights {
            layer,
            missing: needed - body.len(),
        });
    }
    if body.len() > needed {
        return Err(Error::TrailingBytes {
            surplus: body.len() - needed,
        });
    }

    let mut cursor = FloatCursor { bytes: body, pos: 0 };
    let mut conv = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        let LayerKind::Convolutional {
            filters,
            size,
            stride,
            padding,
            batch_normalize,
            ..
        } = layer.kind
        else {
            conv.push(None);
            continue;
        };
        let i = layer.index;
        let in_channels = if i == 0 {
            spec.input_channels
        } else {
            shapes[i - 1].channels
        };
        let (bias, batchnorm) = if batch_normalize {
            let beta = cursor.take(filters);
            let gamma = cursor.take(filters);
            let running_mean = cursor.take(filters);
            let running_variance = cursor.take(filters);
            let bn = BatchNorm {
                gamma,
                beta,
                running_mean,
                running_variance,
                epsilon: DEFAULT_BN_EPSILON,
            };
            (vec![0.0; filters], Some(bn))
        } else {
            (cursor.take(filters), None)
        };
        let weights = cursor.take(filters * in_channels * size * size);
        let params = ConvParams {
            out_channels: filters,
            in_channels,
            kernel_size: size,
            stride,
            padding,
            weights,
            bias,
            batchnorm,
        };
        check_variance(i, &params)?;
        conv.push(Some(params));
    }
    debug_assert_eq!(cursor.pos, body.len());

    Ok(ParameterizedNetwork {
        spec: spec.clone(),
        header: Some(header),
        shapes,
        conv,
    })
}

struct FloatCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl FloatCursor<'_> {
    fn take(&mut self, n: usize) -> Vec<f32> {
        let end = self.pos + n * 4;
        let out = self.bytes[self.pos..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        self.pos = end;
        out
    }
}
