use std::collections::BTreeMap;
use std::fmt;

use super::{Activation, LayerKind, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

/// Three-head single-class network at 416x416 with the nine standard anchors.
pub const REFERENCE_CONFIG: &str = include_str!("../../assets/yolov3-handshake.cfg");

const DEFAULT_INPUT_SIZE: usize = 416;

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn required(&mut self, key: &'static str) -> Result<(usize, String)> {
        self.take(key).ok_or_else(|| Error::MissingKey {
            section: self.name.clone(),
            line: self.line,
            key,
        })
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            Some((line, v)) => parse_num(line, key, &v),
            None => Ok(default),
        }
    }

    fn required_usize(&mut self, key: &'static str) -> Result<usize> {
        let (line, v) = self.required(key)?;
        parse_num(line, key, &v)
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(line, format!("`{key}` has invalid value `{value}`")))
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(line, key, s))
        .collect()
}

fn positive(line: usize, key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(Error::config(line, format!("`{key}` must be positive")))
    } else {
        Ok(v)
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config(line_no, format!("unterminated section header `{line}`")))?;
            sections.push(Section {
                name: name.trim().to_ascii_lowercase(),
                line: line_no,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(line_no, format!("expected `key=value`, found `{line}`")));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::config(line_no, "empty key"));
        }
        let Some(section) = sections.last_mut() else {
            return Err(Error::config(line_no, "key outside of any section"));
        };
        section
            .entries
            .insert(key.to_string(), (line_no, value.trim().to_string()));
    }
    Ok(sections)
}

fn parse_activation(section: &mut Section) -> Result<Activation> {
    let slope = match section.take("slope") {
        Some((line, v)) => {
            let s: f32 = parse_num(line, "slope", &v)?;
            if !(0.0..1.0).contains(&s) {
                return Err(Error::config(line, format!("slope {s} outside [0, 1)")));
            }
            Some((line, s))
        }
        None => None,
    };
    let activation = match section.take("activation") {
        None => Activation::Linear,
        Some((line, name)) => match name.as_str() {
            "linear" => Activation::Linear,
            "leaky" => Activation::leaky(),
            "relu" => Activation::Leaky { slope: 0.0 },
            other => return Err(Error::config(line, format!("unsupported activation `{other}`"))),
        },
    };
    match (activation, slope) {
        (Activation::Leaky { .. }, Some((_, s))) => Ok(Activation::Leaky { slope: s }),
        (Activation::Linear, Some((line, _))) => Err(Error::config(line, "`slope` given for a linear activation")),
        (a, _) => Ok(a),
    }
}

/// Resolves a darknet layer reference: negative values are relative to
/// `index`, non-negative ones absolute. Only strictly earlier layers are valid.
fn resolve(index: usize, raw: i64) -> Result<usize> {
    let target = if raw < 0 { index as i64 + raw } else { raw };
    if target < 0 || target >= index as i64 {
        return Err(Error::ForwardReference { layer: index, target });
    }
    Ok(target as usize)
}

/// A non-fatal parse finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses and validates a network description, logging warnings.
pub fn parse_config(text: &str) -> Result<NetworkSpec> {
    let (spec, warnings) = parse_config_with_warnings(text)?;
    for w in warnings {
        log::warn!("config {w}");
    }
    Ok(spec)
}

pub fn parse_config_with_warnings(text: &str) -> Result<(NetworkSpec, Vec<ConfigWarning>)> {
    let mut sections = split_sections(text)?;
    let mut warnings = Vec::new();

    let (mut width, mut height, mut channels) = (DEFAULT_INPUT_SIZE, DEFAULT_INPUT_SIZE, 3);
    let mut start = 0;
    if let Some(first) = sections.first_mut() {
        if matches!(first.name.as_str(), "net" | "network") {
            width = positive(first.line, "width", first.usize_or("width", width)?)?;
            height = positive(first.line, "height", first.usize_or("height", height)?)?;
            channels = positive(first.line, "channels", first.usize_or("channels", channels)?)?;
            warn_leftovers(first, &mut warnings);
            start = 1;
        }
    }

    let mut layers = Vec::new();
    let mut anchors: Option<(usize, Vec<(f32, f32)>)> = None;
    let mut classes: Option<(usize, usize)> = None;

    for section in sections.iter_mut().skip(start) {
        let index = layers.len();
        let kind = match section.name.as_str() {
            "convolutional" | "conv" => {
                let filters = section.required_usize("filters")?;
                let size = section.required_usize("size")?;
                let stride = section.usize_or("stride", 1)?;
                let line = section.line;
                positive(line, "filters", filters)?;
                positive(line, "size", size)?;
                positive(line, "stride", stride)?;
                let pad_flag = section.usize_or("pad", 0)?;
                let padding = match section.take("padding") {
                    Some((l, v)) => parse_num(l, "padding", &v)?,
                    None if pad_flag != 0 => size / 2,
                    None => 0,
                };
                let batch_normalize = section.usize_or("batch_normalize", 0)? != 0;
                let activation = parse_activation(section)?;
                LayerKind::Convolutional {
                    filters,
                    size,
                    stride,
                    padding,
                    batch_normalize,
                    activation,
                }
            }
            "shortcut" => {
                let (line, v) = section.required("from")?;
                let raw: i64 = parse_num(line, "from", &v)?;
                let from = resolve(index, raw)?;
                let activation = parse_activation(section)?;
                LayerKind::Shortcut { from, activation }
            }
            "route" => {
                let (line, v) = section.required("layers")?;
                let raw: Vec<i64> = parse_list(line, "layers", &v)?;
                if raw.is_empty() {
                    return Err(Error::config(line, "`layers` is empty"));
                }
                let layers = raw.into_iter().map(|r| resolve(index, r)).collect::<Result<Vec<_>>>()?;
                LayerKind::Route { layers }
            }
            "upsample" => {
                let stride = section.usize_or("stride", 2)?;
                LayerKind::Upsample {
                    stride: positive(section.line, "stride", stride)?,
                }
            }
            "yolo" => {
                let (mline, mask) = section.required("mask")?;
                let mask: Vec<usize> = parse_list(mline, "mask", &mask)?;
                let (aline, raw) = section.required("anchors")?;
                let values: Vec<f32> = parse_list(aline, "anchors", &raw)?;
                if values.is_empty() || values.len() % 2 != 0 {
                    return Err(Error::config(aline, "`anchors` must hold width,height pairs"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::config(aline, "anchor sizes must be positive"));
                }
                let pairs: Vec<(f32, f32)> = values.chunks(2).map(|p| (p[0], p[1])).collect();
                if mask.is_empty() {
                    return Err(Error::config(mline, "`mask` is empty"));
                }
                if let Some(&bad) = mask.iter().find(|&&m| m >= pairs.len()) {
                    return Err(Error::config(
                        mline,
                        format!("mask index {bad} exceeds {} anchors", pairs.len()),
                    ));
                }
                if let Some((l, num)) = section.take("num") {
                    let num: usize = parse_num(l, "num", &num)?;
                    if num != pairs.len() {
                        return Err(Error::config(
                            l,
                            format!("num={num} but {} anchors are listed", pairs.len()),
                        ));
                    }
                }
                match &anchors {
                    Some((first_line, a)) if *a != pairs => {
                        return Err(Error::config(
                            aline,
                            format!("anchors differ from those declared at line {first_line}"),
                        ))
                    }
                    Some(_) => {}
                    None => anchors = Some((aline, pairs)),
                }
                let (cline, c) = section.required("classes")?;
                let c = positive(cline, "classes", parse_num(cline, "classes", &c)?)?;
                match classes {
                    Some((first_line, prev)) if prev != c => {
                        return Err(Error::config(
                            cline,
                            format!("classes={c} differs from classes={prev} at line {first_line}"),
                        ))
                    }
                    Some(_) => {}
                    None => classes = Some((cline, c)),
                }
                LayerKind::YoloHead { mask }
            }
            "net" | "network" => {
                return Err(Error::config(section.line, "[net] must be the first section"));
            }
            other => {
                return Err(Error::config(section.line, format!("unknown section kind [{other}]")));
            }
        };
        warn_leftovers(section, &mut warnings);
        layers.push(LayerSpec { index, kind });
    }

    if layers.is_empty() {
        return Err(Error::config(text.lines().count().max(1), "network has no layers"));
    }

    let classes = match classes {
        Some((line, c)) => {
            if c != 1 {
                warnings.push(ConfigWarning {
                    line,
                    message: format!("classes={c}; this toolkit targets single-class detection"),
                });
            }
            c
        }
        None => 1,
    };
    let spec = NetworkSpec {
        input_width: width,
        input_height: height,
        input_channels: channels,
        layers,
        anchors: anchors.map(|(_, a)| a).unwrap_or_default(),
        classes,
    };
    spec.infer_shapes()?;
    Ok((spec, warnings))
}

fn warn_leftovers(section: &mut Section, warnings: &mut Vec<ConfigWarning>) {
    for (key, (line, _)) in std::mem::take(&mut section.entries) {
        warnings.push(ConfigWarning {
            line,
            message: format!("ignoring key `{key}` in [{}]", section.name),
        });
    }
}

fn write_activation(a: &Activation, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match a {
        Activation::Linear => writeln!(f, "activation=linear"),
        Activation::Leaky { slope } => writeln!(f, "activation=leaky\nslope={slope}"),
    }
}

pub(super) fn write_config(spec: &NetworkSpec, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    writeln!(
        f,
        "[net]\nwidth={}\nheight={}\nchannels={}",
        spec.input_width, spec.input_height, spec.input_channels
    )?;
    let anchors = spec
        .anchors
        .iter()
        .map(|(w, h)| format!("{w},{h}"))
        .collect::<Vec<_>>()
        .join(", ");
    for layer in &spec.layers {
        writeln!(f)?;
        let i = layer.index as i64;
        match &layer.kind {
            LayerKind::Convolutional {
                filters,
                size,
                stride,
                padding,
                batch_normalize,
                activation,
            } => {
                writeln!(f, "[convolutional]")?;
                if *batch_normalize {
                    writeln!(f, "batch_normalize=1")?;
                }
                writeln!(f, "filters={filters}\nsize={size}\nstride={stride}\npadding={padding}")?;
                write_activation(activation, f)?;
            }
            LayerKind::Shortcut { from, activation } => {
                writeln!(f, "[shortcut]\nfrom={}", *from as i64 - i)?;
                write_activation(activation, f)?;
            }
            LayerKind::Route { layers } => {
                let rel: Vec<String> = layers.iter().map(|&l| (l as i64 - i).to_string()).collect();
                writeln!(f, "[route]\nlayers={}", rel.join(","))?;
            }
            LayerKind::Upsample { stride } => writeln!(f, "[upsample]\nstride={stride}")?,
            LayerKind::YoloHead { mask } => {
                let mask: Vec<String> = mask.iter().map(ToString::to_string).collect();
                writeln!(
                    f,
                    "[yolo]\nmask={}\nanchors={anchors}\nclasses={}\nnum={}",
                    mask.join(","),
                    spec.classes,
                    spec.anchors.len()
                )?;
            }
        }
    }
    Ok(())
}
