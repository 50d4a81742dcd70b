//! Simulated stand-in for the pick-and-place control chain: hand-eye
//! calibration from point correspondences, an analytic antipodal-closure
//! check on convex tabletop objects, and clutter trials driving a trained
//! model through the full image-to-robot transform chain.
//!
//! Contact is analytic geometry on the table plane, not dynamics.

mod calibration;
mod pick;
mod trial;

pub use calibration::{solve_calibration, CalibrationResult, CalibrationSet};
pub use pick::{plan_pick, sim_scene_from_synth, GripperParams, PickFailure, PickResult, SimObject, SimScene, WorkspaceBounds};
pub use trial::{run_clutter_trial, AttemptRecord, TrialConfig, TrialReport};

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("degenerate calibration geometry: {0}")]
    DegenerateGeometry(String),
    #[error("grasp position ({0:.3}, {1:.3}, {2:.3}) is outside the workspace")]
    OutOfWorkspace(f64, f64, f64),
    #[error("trial scene size {scene} does not match the model input size {model}")]
    SceneSizeMismatch { scene: usize, model: usize },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

pub(crate) fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}
