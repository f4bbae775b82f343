use super::{Shape, ShapeError, Tensor};

/// Inference-time batch normalization parameters, one entry per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_variance: Vec<f32>,
    pub epsilon: f32,
}

impl BatchNorm {
    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, channels: usize) -> Result<(), ShapeError> {
        let lens = [
            self.gamma.len(),
            self.beta.len(),
            self.running_mean.len(),
            self.running_variance.len(),
        ];
        if lens.iter().any(|&l| l != channels) {
            return Err(ShapeError::new(
                "batchnorm",
                format!("{channels} entries per parameter array"),
                format!("{lens:?}"),
            ));
        }
        Ok(())
    }

    /// Per-channel `(scale, shift)` such that `bn(x) = scale * x + shift`.
    pub fn affine(&self) -> Vec<(f32, f32)> {
        (0..self.channels())
            .map(|c| {
                let scale = self.gamma[c] / (self.running_variance[c] + self.epsilon).sqrt();
                (scale, self.beta[c] - scale * self.running_mean[c])
            })
            .collect()
    }
}

/// Square-kernel convolution parameters.
///
/// `weights` is ordered `(out_channel, in_channel, kernel_row, kernel_col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub batchnorm: Option<BatchNorm>,
}

impl ConvParams {
    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_size * self.kernel_size
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        if self.out_channels == 0 || self.in_channels == 0 || self.kernel_size == 0 || self.stride == 0 {
            return Err(ShapeError::new(
                "conv2d",
                "positive channels, kernel size and stride",
                format!(
                    "out={} in={} k={} stride={}",
                    self.out_channels, self.in_channels, self.kernel_size, self.stride
                ),
            ));
        }
        if self.weights.len() != self.weight_count() {
            return Err(ShapeError::new(
                "conv2d",
                format!("{} weights", self.weight_count()),
                format!("{} weights", self.weights.len()),
            ));
        }
        if self.bias.len() != self.out_channels {
            return Err(ShapeError::new(
                "conv2d",
                format!("{} biases", self.out_channels),
                format!("{} biases", self.bias.len()),
            ));
        }
        if let Some(bn) = &self.batchnorm {
            bn.check(self.out_channels)?;
        }
        Ok(())
    }

    /// Output shape for an input of `height` x `width`, if the window fits.
    pub fn output_shape(&self, height: usize, width: usize) -> Option<Shape> {
        let out = |n: usize| {
            let span = (n + 2 * self.padding).checked_sub(self.kernel_size)?;
            Some(span / self.stride + 1)
        };
        Some(Shape::new(self.out_channels, out(height)?, out(width)?))
    }

    /// Folds batch normalization into the kernel and bias. The result has no
    /// batch-norm stage and computes the same function up to rounding.
    pub fn fold_batchnorm(&self) -> ConvParams {
        let Some(bn) = &self.batchnorm else {
            return self.clone();
        };
        let per_out = self.in_channels * self.kernel_size * self.kernel_size;
        let mut weights = self.weights.clone();
        let mut bias = self.bias.clone();
        for (o, (scale, shift)) in bn.affine().into_iter().enumerate() {
            for w in &mut weights[o * per_out..(o + 1) * per_out] {
                *w *= scale;
            }
            bias[o] = bias[o] * scale + shift;
        }
        ConvParams {
            weights,
            bias,
            batchnorm: None,
            ..self.clone()
        }
    }
}

/// Convolution followed by bias; batch normalization, if present on `params`,
/// is not applied here (see [`apply_batchnorm`]).
pub fn conv2d(input: &Tensor, params: &ConvParams) -> Result<Tensor, ShapeError> {
    let mut scratch = Vec::new();
    conv2d_with_scratch(input, params, &mut scratch)
}

/// [`conv2d`] reusing `scratch` for the patch matrix.
pub fn conv2d_with_scratch(input: &Tensor, params: &ConvParams, scratch: &mut Vec<f32>) -> Result<Tensor, ShapeError> {
    params.validate()?;
    if input.channels() != params.in_channels {
        return Err(ShapeError::new(
            "conv2d",
            format!("{} input channels", params.in_channels),
            format!("{} input channels", input.channels()),
        ));
    }
    let out_shape = params.output_shape(input.height(), input.width()).ok_or_else(|| {
        ShapeError::new(
            "conv2d",
            format!("input of at least {0}x{0} after padding", params.kernel_size),
            input.shape(),
        )
    })?;

    let k = params.kernel_size;
    let rows = params.in_channels * k * k;
    let cols = out_shape.plane();

    let mut out = Vec::with_capacity(out_shape.len());
    for &b in &params.bias {
        out.extend(std::iter::repeat_n(b, cols));
    }

    let pointwise = k == 1 && params.stride == 1 && params.padding == 0;
    let patches: &[f32] = if pointwise {
        input.data()
    } else {
        im2col(input, params, out_shape, scratch);
        scratch
    };

    // out[M x N] += weights[M x K] * patches[K x N], all row-major.
    let (m, kk, n) = (params.out_channels, rows, cols);
    // SAFETY: slices are sized m*kk, kk*n and m*n with the row/column strides
    // given, so every access sgemm makes is in bounds.
    unsafe {
        matrixmultiply::sgemm(
            m,
            kk,
            n,
            1.0,
            params.weights.as_ptr(),
            kk as isize,
            1,
            patches.as_ptr(),
            n as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Tensor::new(out_shape, out)
}

/// Lays out every receptive field as a column: row `(c*k + dy)*k + dx`,
/// column `oy*out_w + ox`. Padding reads as zero.
fn im2col(input: &Tensor, params: &ConvParams, out_shape: Shape, buf: &mut Vec<f32>) {
    let k = params.kernel_size;
    let (h, w) = (input.height() as isize, input.width() as isize);
    let (oh, ow) = (out_shape.height, out_shape.width);
    let pad = params.padding as isize;
    let stride = params.stride as isize;
    let cols = oh * ow;

    buf.clear();
    buf.resize(params.in_channels * k * k * cols, 0.0);

    for c in 0..params.in_channels {
        let plane = input.channel(c);
        for dy in 0..k {
            for dx in 0..k {
                let row = (c * k + dy) * k + dx;
                let dst = &mut buf[row * cols..(row + 1) * cols];
                for oy in 0..oh {
                    let iy = oy as isize * stride + dy as isize - pad;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    let src_row = &plane[(iy * w) as usize..((iy + 1) * w) as usize];
                    let dst_row = &mut dst[oy * ow..(oy + 1) * ow];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = ox as isize * stride + dx as isize - pad;
                        if (0..w).contains(&ix) {
                            *d = src_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
}

pub fn apply_batchnorm(input: &Tensor, bn: &BatchNorm) -> Result<Tensor, ShapeError> {
    bn.check(input.channels())?;
    let plane = input.shape().plane();
    let mut data = input.data().to_vec();
    for (c, (g, b, m, v)) in bn_entries(bn).enumerate() {
        let denom = (v + bn.epsilon).sqrt();
        for x in &mut data[c * plane..(c + 1) * plane] {
            *x = g * (*x - m) / denom + b;
        }
    }
    Tensor::new(input.shape(), data)
}

fn bn_entries(bn: &BatchNorm) -> impl Iterator<Item = (f32, f32, f32, f32)> + '_ {
    bn.gamma
        .iter()
        .zip(&bn.beta)
        .zip(&bn.running_mean)
        .zip(&bn.running_variance)
        .map(|(((&g, &b), &m), &v)| (g, b, m, v))
}
