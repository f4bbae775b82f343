use std::fmt::Write;

use super::{Activation, LayerKind, NetworkSpec, ParameterizedNetwork, WeightsHeader};
use crate::error::Result;
use crate::tensor::Shape;

/// One row per layer (index, kind, output shape as `h x w x c`, parameter
/// count, details) followed by a totals line.
pub fn inspect(net: &ParameterizedNetwork) -> String {
    let counts: Vec<usize> = (0..net.spec().layers.len())
        .map(|i| {
            net.conv_params(i).map_or(0, |p| {
                p.weights.len() + p.bias.len() + p.batchnorm.as_ref().map_or(0, |_| 3 * p.out_channels)
            })
        })
        .collect();
    render(net.spec(), net.shapes(), &counts, net.header())
}

/// Like [`inspect`], with parameter counts derived from the description alone.
pub fn inspect_spec(spec: &NetworkSpec) -> Result<String> {
    let shapes = spec.infer_shapes()?;
    let counts = spec.layer_parameter_counts()?;
    Ok(render(spec, &shapes, &counts, None))
}

fn render(spec: &NetworkSpec, shapes: &[Shape], counts: &[usize], header: Option<&WeightsHeader>) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:>5}  {:<14} {:>18}  {:>10}  details",
        "layer", "kind", "output (h x w x c)", "params"
    )
    .unwrap();
    let mut total = 0usize;
    for ((layer, shape), &params) in spec.layers.iter().zip(shapes).zip(counts) {
        total += params;
        let details = match &layer.kind {
            LayerKind::Convolutional {
                size,
                stride,
                batch_normalize,
                activation,
                ..
            } => format!(
                "{size}x{size}/{stride}{}{}",
                if *batch_normalize { " bn" } else { "" },
                match activation {
                    Activation::Linear => " linear".to_string(),
                    Activation::Leaky { slope } => format!(" leaky({slope})"),
                }
            ),
            LayerKind::Shortcut { from, .. } => format!("from {from}"),
            LayerKind::Route { layers } => format!(
                "layers {}",
                layers.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
            ),
            LayerKind::Upsample { stride } => format!("x{stride}"),
            LayerKind::YoloHead { mask } => {
                let anchors: Vec<String> = mask
                    .iter()
                    .map(|&m| {
                        let (w, h) = spec.anchors[m];
                        format!("{w}x{h}")
                    })
                    .collect();
                format!("anchors {}", anchors.join(" "))
            }
        };
        writeln!(
            out,
            "{:>5}  {:<14} {:>18}  {:>10}  {}",
            layer.index,
            layer.kind.name(),
            format!("{}x{}x{}", shape.height, shape.width, shape.channels),
            params,
            details
        )
        .unwrap();
    }
    write!(out, "total: {} layers, {} parameters", spec.layers.len(), total).unwrap();
    if let Some(h) = header {
        write!(
            out,
            ", weights v{}.{}.{} ({} bytes)",
            h.major,
            h.minor,
            h.revision,
            h.byte_len() + 4 * total
        )
        .unwrap();
    }
    out.push('\n');
    out
}
