pub mod bench;
pub mod eval;
pub mod infer;
pub mod rerun;
pub mod simulate;
pub mod synth;
pub mod train;

use std::path::PathBuf;

use clap::Args;
use graspforge_core::dataset::{SplitMode, SplitSpec};
use graspforge_core::train::DatasetSpec;

use crate::CliError;

/// Dataset selection flags shared by train and eval.
#[derive(Args, Clone, Debug)]
pub struct DatasetArgs {
    /// Dataset kind: synthetic, synthetic-dir, cornell or jacquard.
    #[arg(long, default_value = "synthetic")]
    pub dataset: String,
    /// Root directory for cornell/jacquard/synthetic-dir datasets.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Synthetic: number of scenes to generate.
    #[arg(long, default_value_t = 640)]
    pub synth_count: usize,
    /// Synthetic: maximum objects per scene.
    #[arg(long, default_value_t = 3)]
    pub synth_objects: usize,
    /// Synthetic: scene-generator seed.
    #[arg(long, default_value_t = 9000)]
    pub synth_seed: u64,
}

impl DatasetArgs {
    pub fn to_spec(&self) -> Result<DatasetSpec, CliError> {
        let need_dir = |name: &str| {
            self.data_dir.clone().ok_or_else(|| {
                CliError::usage(format!("--data-dir is required for --dataset {name}"))
            })
        };
        match self.dataset.as_str() {
            "synthetic" => Ok(DatasetSpec::Synthetic {
                count: self.synth_count,
                max_objects: self.synth_objects,
                seed: self.synth_seed,
            }),
            "synthetic-dir" => Ok(DatasetSpec::SyntheticDir {
                root: need_dir("synthetic-dir")?,
            }),
            "cornell" => Ok(DatasetSpec::Cornell {
                root: need_dir("cornell")?,
            }),
            "jacquard" => Ok(DatasetSpec::Jacquard {
                root: need_dir("jacquard")?,
            }),
            other => Err(CliError::usage(format!(
                "unknown dataset {other:?} (use synthetic, synthetic-dir, cornell or jacquard)"
            ))),
        }
    }
}

/// Split selection flags shared by train and eval.
#[derive(Args, Clone, Debug)]
pub struct SplitArgs {
    /// Split mode: iw (image-wise) or ow (object-wise).
    #[arg(long, default_value = "iw")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

impl SplitArgs {
    pub fn to_spec(&self) -> Result<SplitSpec, CliError> {
        let mode = match self.split.as_str() {
            "iw" | "image-wise" => SplitMode::ImageWise,
            "ow" | "object-wise" => SplitMode::ObjectWise,
            other => {
                return Err(CliError::usage(format!(
                    "unknown split {other:?} (use iw or ow)"
                )))
            }
        };
        Ok(SplitSpec {
            mode,
            fold: self.fold,
            num_folds: self.folds,
            seed: self.split_seed,
        })
    }
}

pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    let seeds: Result<Vec<u64>, _> = spec.split(',').map(|s| s.trim().parse::<u64>()).collect();
    let seeds = seeds.map_err(|e| CliError::usage(format!("bad --seed list {spec:?}: {e}")))?;
    if seeds.is_empty() {
        return Err(CliError::usage("--seed list is empty"));
    }
    Ok(seeds)
}
