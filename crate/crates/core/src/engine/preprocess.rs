use crate::error::{Error, Result};
use crate::raster::RgbImage;
use crate::tensor::{Shape, Tensor};

/// Fill value for letterbox padding.
const LETTERBOX_FILL: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResizeMode {
    /// Stretch the frame to the network size.
    #[default]
    Direct,
    /// Preserve aspect ratio and pad the remainder.
    Letterbox,
}

/// Geometry of a preprocessed frame, needed to map boxes back to it.
///
/// A network-space coordinate `x` maps to `(x - pad_x) / scale_x` in the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessRecord {
    pub source_width: usize,
    pub source_height: usize,
    pub network_width: usize,
    pub network_height: usize,
    pub mode: ResizeMode,
    pub scale_x: f64,
    pub scale_y: f64,
    pub pad_x: f64,
    pub pad_y: f64,
}

impl PreprocessRecord {
    pub fn new(source: (usize, usize), network: (usize, usize), mode: ResizeMode) -> Self {
        let (sw, sh) = source;
        let (nw, nh) = network;
        match mode {
            ResizeMode::Direct => Self {
                source_width: sw,
                source_height: sh,
                network_width: nw,
                network_height: nh,
                mode,
                scale_x: nw as f64 / sw as f64,
                scale_y: nh as f64 / sh as f64,
                pad_x: 0.0,
                pad_y: 0.0,
            },
            ResizeMode::Letterbox => {
                let (iw, ih) = letterbox_inner(source, network);
                Self {
                    source_width: sw,
                    source_height: sh,
                    network_width: nw,
                    network_height: nh,
                    mode,
                    scale_x: iw as f64 / sw as f64,
                    scale_y: ih as f64 / sh as f64,
                    pad_x: ((nw - iw) / 2) as f64,
                    pad_y: ((nh - ih) / 2) as f64,
                }
            }
        }
    }
}

/// Size of the resized frame inside the letterbox.
fn letterbox_inner((sw, sh): (usize, usize), (nw, nh): (usize, usize)) -> (usize, usize) {
    let scale = (nw as f64 / sw as f64).min(nh as f64 / sh as f64);
    let iw = ((sw as f64 * scale).round() as usize).clamp(1, nw);
    let ih = ((sh as f64 * scale).round() as usize).clamp(1, nh);
    (iw, ih)
}

/// Converts an RGB frame to a `3 x height x width` tensor in `[0, 1]`,
/// resampled bilinearly with pixel-center alignment.
pub fn preprocess(
    image: &RgbImage,
    width: usize,
    height: usize,
    mode: ResizeMode,
) -> Result<(Tensor, PreprocessRecord)> {
    if image.width() == 0 || image.height() == 0 || width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    let record = PreprocessRecord::new((image.width(), image.height()), (width, height), mode);
    let shape = Shape::new(3, height, width);
    let tensor = match mode {
        ResizeMode::Direct => {
            let mut t = Tensor::zeros(shape);
            resize_into(image, &mut t, (0, 0), (width, height));
            t
        }
        ResizeMode::Letterbox => {
            let mut t = Tensor::filled(shape, LETTERBOX_FILL);
            let inner = letterbox_inner((image.width(), image.height()), (width, height));
            resize_into(image, &mut t, (record.pad_x as usize, record.pad_y as usize), inner);
            t
        }
    };
    Ok((tensor, record))
}

/// Source sample positions and weights along one axis.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, (pos - i0 as f64) as f32)
        })
        .collect()
}

fn resize_into(image: &RgbImage, out: &mut Tensor, (ox, oy): (usize, usize), (w, h): (usize, usize)) {
    let xs = axis_taps(image.width(), w);
    let ys = axis_taps(image.height(), h);
    let bytes = image.as_bytes();
    let stride = image.width() * 3;
    let px = |x: usize, y: usize, c: usize| bytes[y * stride + x * 3 + c] as f32 / 255.0;
    for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
            for c in 0..3 {
                let top = px(x0, y0, c) * (1.0 - fx) + px(x1, y0, c) * fx;
                let bottom = px(x0, y1, c) * (1.0 - fx) + px(x1, y1, c) * fx;
                out.set(c, oy + y, ox + x, top * (1.0 - fy) + bottom * fy);
            }
        }
    }
}
