use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "handsoff", version, about = "Handshake detection and evaluation toolkit")]
pub struct Cli {
    /// Worker threads for frame-level parallelism [default: all cores]
    #[arg(long, global = true, env = "HANDSOFF_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    /// Only print errors
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the detector over frames and write JSON-lines detections
    Detect(DetectArgs),
    /// Score detections against ground truth
    Eval(EvalArgs),
    /// Detect over an ordered frame sequence and emit interaction events
    Stream(StreamArgs),
    /// Time the pipeline stages
    Bench(BenchArgs),
    /// Print the layer table of a network
    Inspect(InspectArgs),
}

fn unit_interval(s: &str) -> Result<f32, String> {
    let v: f32 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn iou_threshold(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn image_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("`{s}` is not WIDTHxHEIGHT"))?;
    match (w.parse::<usize>(), h.parse::<usize>()) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(format!("`{s}` is not WIDTHxHEIGHT")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Darknet network configuration
    #[arg(long, env = "HANDSOFF_CFG")]
    pub cfg: PathBuf,

    /// Darknet weights file
    #[arg(long, env = "HANDSOFF_WEIGHTS")]
    pub weights: PathBuf,

    /// Minimum confidence (objectness x class score)
    #[arg(long, env = "HANDSOFF_CONF_THRESH", default_value = "0.25", value_parser = unit_interval)]
    pub conf_thresh: f32,

    /// IoU above which NMS suppresses the weaker box
    #[arg(long, env = "HANDSOFF_NMS_THRESH", default_value = "0.45", value_parser = unit_interval)]
    pub nms_thresh: f32,

    /// Aspect-preserving resize with gray padding instead of a plain stretch
    #[arg(long, env = "HANDSOFF_LETTERBOX")]
    pub letterbox: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FrameArgs {
    /// Frame directory or a single image
    #[arg(long, env = "HANDSOFF_INPUT", conflicts_with = "list")]
    pub input: Option<PathBuf>,

    /// File listing frame paths one per line, `-` for stdin
    #[arg(long)]
    pub list: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub frames: FrameArgs,

    /// Detections file; stdout when omitted
    #[arg(long, short, env = "HANDSOFF_OUTPUT")]
    pub output: Option<PathBuf>,

    /// Write one overlay image per frame into this directory
    #[arg(long, env = "HANDSOFF_RENDER")]
    pub render: Option<PathBuf>,

    /// Appended to the frame name of each overlay
    #[arg(long, env = "HANDSOFF_RENDER_SUFFIX", default_value = "_overlay")]
    pub render_suffix: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of `<image_id>.txt` annotations
    #[arg(long, env = "HANDSOFF_GT")]
    pub gt: PathBuf,

    /// JSON-lines detections as written by `detect`
    #[arg(long, env = "HANDSOFF_DETECTIONS")]
    pub detections: PathBuf,

    /// Frame directory, used to read each frame's size
    #[arg(long, env = "HANDSOFF_INPUT", required_unless_present = "image_size")]
    pub input: Option<PathBuf>,

    /// Size shared by every frame, e.g. 1280x720
    #[arg(long, env = "HANDSOFF_IMAGE_SIZE", value_parser = image_size)]
    pub image_size: Option<(usize, usize)>,

    /// IoU needed for a detection to count as a true positive
    #[arg(long, env = "HANDSOFF_IOU", default_value = "0.5", value_parser = iou_threshold)]
    pub iou: f64,

    /// Use 11-point interpolation instead of all-point
    #[arg(long, env = "HANDSOFF_ELEVEN_POINT")]
    pub eleven_point: bool,

    /// Write the precision/recall curve as CSV
    #[arg(long, env = "HANDSOFF_PR_CSV")]
    pub pr_csv: Option<PathBuf>,

    /// Write per-detection match decisions as JSON-lines
    #[arg(long)]
    pub matches: Option<PathBuf>,

    /// Write the report as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub frames: FrameArgs,

    /// Consecutive frames with a detection needed to open an event
    #[arg(long, env = "HANDSOFF_DEBOUNCE_OPEN", default_value = "3", value_parser = clap::value_parser!(u32).range(1..))]
    pub debounce_open: u32,

    /// Consecutive empty frames needed to close an event
    #[arg(long, env = "HANDSOFF_DEBOUNCE_CLOSE", default_value = "5", value_parser = clap::value_parser!(u32).range(1..))]
    pub debounce_close: u32,

    /// Events file; stdout when omitted
    #[arg(long, short, env = "HANDSOFF_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Frames to cycle through; a gray frame of the network size when omitted
    #[command(flatten)]
    pub frames: FrameArgs,

    /// Timed runs
    #[arg(long, env = "HANDSOFF_RUNS", default_value = "50", value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,

    /// Untimed runs before measuring
    #[arg(long, env = "HANDSOFF_WARMUP", default_value = "3")]
    pub warmup: u32,

    /// Also write the JSON report to this file
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Network configuration; the built-in reference network when omitted
    #[arg(long, env = "HANDSOFF_CFG")]
    pub cfg: Option<PathBuf>,

    /// Check a weights file against the configuration as well
    #[arg(long, env = "HANDSOFF_WEIGHTS")]
    pub weights: Option<PathBuf>,
}
