use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use graspforge_core::dataset::{preprocess, Modality, Preprocessed, Sample, Source};
use graspforge_core::geometry::{
    extract_grasps, ExtractParams, GraspRecord, Image2, DEFAULT_HEIGHT_RATIO,
};
use graspforge_core::model::load_checkpoint;

use crate::manifest::{ensure_run_dir, now_rfc3339, write_manifest};
use crate::{viz, CliError};

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// RGB image (png).
    #[arg(long)]
    pub rgb: Option<PathBuf>,
    /// Depth image: 32-bit float tiff in meters, or 16-bit png in mm.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    /// Minimum pixel distance between reported grasps.
    #[arg(long, default_value_t = 2.0)]
    pub min_distance: f64,
    /// Gripper-opening normalization in pixels (default: half input size).
    #[arg(long)]
    pub w_max: Option<f64>,
    #[arg(long, default_value = "runs/infer")]
    pub out: PathBuf,
}

pub fn read_depth_file(path: &Path) -> Result<Image2<f32>, CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tiff") | Some("tif") => {
            Ok(graspforge_core::dataset::read_depth_tiff(path)?)
        }
        Some("png") => {
            let img = image::open(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
                .to_luma16();
            let data = img.pixels().map(|p| p.0[0] as f32 / 1000.0).collect();
            Ok(Image2::from_vec(
                img.width() as usize,
                img.height() as usize,
                data,
            ))
        }
        _ => Err(CliError::usage(format!(
            "unsupported depth format: {} (use .tiff or 16-bit .png)",
            path.display()
        ))),
    }
}

pub fn run(args: &InferArgs) -> Result<(), CliError> {
    let started = now_rfc3339();
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let channels = model.config().input_channels;
    let modality = match channels {
        1 => Modality::D,
        3 => Modality::Rgb,
        _ => Modality::Rgbd,
    };
    let rgb = match &args.rgb {
        Some(p) => Some(
            image::open(p)
                .map_err(|e| CliError::data(format!("{}: {e}", p.display())))?
                .to_rgb8(),
        ),
        None => None,
    };
    let depth = match &args.depth {
        Some(p) => Some(read_depth_file(p)?),
        None => None,
    };
    if modality.needs_rgb() && rgb.is_none() {
        return Err(CliError::config(format!(
            "checkpoint expects the {modality} modality; provide --rgb"
        )));
    }
    if modality.needs_depth() && depth.is_none() {
        return Err(CliError::config(format!(
            "checkpoint expects the {modality} modality; provide --depth"
        )));
    }
    ensure_run_dir(&args.out)?;

    let sample = Sample {
        id: "infer".into(),
        object_id: "infer".into(),
        source: Source::Synthetic,
        rgb,
        depth,
        rectangles: vec![],
    };
    let size = model.config().input_size;
    let pre: Preprocessed = preprocess(&sample, size, modality)?;
    let input = Preprocessed::batch_tensor(&[&pre]);
    let out = model.forward_eval(&input)?;
    let maps = out.to_maps(0);
    let params = ExtractParams {
        w_max: args.w_max.unwrap_or(size as f64 / 2.0),
        ..ExtractParams::default()
    };
    let grasps = extract_grasps(&maps, args.top_k, args.min_distance, &params);
    log::info!("{} grasp(s) above threshold", grasps.len());

    let mut jsonl = std::io::BufWriter::new(std::fs::File::create(args.out.join("grasps.jsonl"))?);
    for g in &grasps {
        serde_json::to_writer(&mut jsonl, &GraspRecord::from(g))?;
        jsonl.write_all(b"\n")?;
    }
    jsonl.flush()?;

    let mut base = match &pre.sample.rgb {
        Some(rgb) => rgb.clone(),
        None => viz::depth_as_rgb(pre.sample.depth.as_ref().expect("some channel present")),
    };
    let rects: Vec<_> = grasps
        .iter()
        .map(|g| g.to_rectangle(DEFAULT_HEIGHT_RATIO))
        .collect();
    viz::draw_rectangles(&mut base, &rects);
    base.save(args.out.join("overlay.png"))
        .map_err(|e| CliError::internal(e.to_string()))?;
    let (q, a, w) = viz::heatmaps(&maps);
    q.save(args.out.join("quality.png"))
        .map_err(|e| CliError::internal(e.to_string()))?;
    a.save(args.out.join("angle.png"))
        .map_err(|e| CliError::internal(e.to_string()))?;
    w.save(args.out.join("width.png"))
        .map_err(|e| CliError::internal(e.to_string()))?;

    let config = serde_json::json!({
        "checkpoint": args.checkpoint,
        "rgb": args.rgb,
        "depth": args.depth,
        "top_k": args.top_k,
        "min_distance": args.min_distance,
        "w_max": params.w_max,
    });
    write_manifest(&args.out, "infer", config, &[], started)
}
