use super::{Shape, ShapeError, Tensor};

pub fn leaky_relu(input: &Tensor, slope: f32) -> Tensor {
    let mut out = input.clone();
    leaky_relu_in_place(&mut out, slope);
    out
}

pub fn leaky_relu_in_place(t: &mut Tensor, slope: f32) {
    debug_assert!((0.0..1.0).contains(&slope));
    for v in t.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

/// Nearest-neighbour upsampling: `out[c, y, x] = in[c, y / f, x / f]`.
pub fn upsample_nearest(input: &Tensor, factor: usize) -> Tensor {
    assert!(factor >= 1, "upsample factor must be positive");
    if factor == 1 {
        return input.clone();
    }
    let s = input.shape();
    let out_shape = Shape::new(s.channels, s.height * factor, s.width * factor);
    let mut data = Vec::with_capacity(out_shape.len());
    for c in 0..s.channels {
        let plane = input.channel(c);
        for y in 0..out_shape.height {
            let src = &plane[(y / factor) * s.width..(y / factor + 1) * s.width];
            for &v in src {
                data.extend(std::iter::repeat_n(v, factor));
            }
        }
    }
    Tensor { shape: out_shape, data }
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, ShapeError> {
    if a.shape() != b.shape() {
        return Err(ShapeError::new("add", a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Ok(Tensor { shape: a.shape(), data })
}

/// Stacks tensors along the channel axis, in order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor, ShapeError> {
    let Some(first) = parts.first() else {
        return Err(ShapeError::new("concat_channels", "at least one part", "none"));
    };
    let (h, w) = (first.height(), first.width());
    let mut channels = 0;
    for p in parts {
        if (p.height(), p.width()) != (h, w) {
            return Err(ShapeError::new(
                "concat_channels",
                format!("spatial size {h}x{w}"),
                format!("{}x{}", p.height(), p.width()),
            ));
        }
        channels += p.channels();
    }
    let mut data = Vec::with_capacity(channels * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Ok(Tensor {
        shape: Shape::new(channels, h, w),
        data,
    })
}
