//! Clutter trials: render, infer, transform, attempt, remove.

use serde::Serialize;

use super::pick::{plan_pick, sim_scene_from_synth, GripperParams, SimScene};
use super::SimError;
use crate::dataset::{preprocess, render_scene, synth_scene, Modality, Preprocessed, SynthScene};
use crate::geometry::{
    camera_to_robot, extract_grasps, image_to_camera, ExtractParams, GraspRecord,
    HandEyeTransform,
};
use crate::model::Model;

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub seed: u64,
    pub num_objects: usize,
    pub max_attempts: usize,
    pub modality: Modality,
    pub hand_eye: HandEyeTransform,
    pub gripper: GripperParams,
}

impl TrialConfig {
    pub fn new(seed: u64, num_objects: usize, max_attempts: usize) -> Self {
        TrialConfig {
            seed,
            num_objects,
            max_attempts,
            modality: Modality::Rgbd,
            hand_eye: default_hand_eye(),
            gripper: GripperParams::default(),
        }
    }
}

/// Camera mounted top-down over the table: x stays, y and z flip, with
/// the robot origin under the camera at table level.
pub fn default_hand_eye() -> HandEyeTransform {
    let rotation = nalgebra::Matrix3::new(
        1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, //
        0.0, 0.0, -1.0,
    );
    let translation = nalgebra::Vector3::new(0.35, -0.12, crate::dataset::TABLE_DEPTH_M);
    HandEyeTransform::new(rotation, translation).expect("proper rotation")
}

#[derive(Clone, Debug, Serialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub grasp: Option<GraspRecord>,
    pub success: bool,
    pub failure: Option<String>,
    pub removed_object: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub objects_total: usize,
    pub attempts: usize,
    pub successes: usize,
    pub objects_remaining: usize,
    pub success_rate: f64,
    pub per_attempt: Vec<AttemptRecord>,
}

/// Runs one seeded pick-until-empty trial with a trained model.
///
/// Loop: render the remaining objects, infer the top grasp, lift it
/// through the image-camera-robot chain, attempt the pick, and remove the
/// object on success. Terminates when the scene empties or `max_attempts`
/// is exhausted. Reports are reproducible given (seed, checkpoint).
pub fn run_clutter_trial(model: &Model<f32>, cfg: &TrialConfig) -> Result<TrialReport, SimError> {
    let size = model.config().input_size;
    let mut scene: SynthScene = synth_scene(cfg.seed, size, cfg.num_objects);
    let objects_total = scene.objects.len();
    let extract = ExtractParams {
        w_max: crate::dataset::synth_w_max_px(size),
        ..ExtractParams::default()
    };
    let mut report = TrialReport {
        seed: cfg.seed,
        objects_total,
        attempts: 0,
        successes: 0,
        objects_remaining: objects_total,
        success_rate: 0.0,
        per_attempt: Vec::new(),
    };
    while !scene.objects.is_empty() && report.attempts < cfg.max_attempts {
        report.attempts += 1;
        let (rgb, depth) = render_scene(&scene.objects, size);
        scene.sample.rgb = Some(rgb);
        scene.sample.depth = Some(depth);
        scene.sample.rectangles.clear();

        let pre: Preprocessed = preprocess(&scene.sample, size, cfg.modality)?;
        let input = Preprocessed::batch_tensor(&[&pre]);
        let maps = model.forward_eval(&input)?.to_maps(0);
        let grasps = extract_grasps(&maps, 1, 2.0, &extract);
        let Some(top) = grasps.first() else {
            report.per_attempt.push(AttemptRecord {
                attempt: report.attempts,
                grasp: None,
                success: false,
                failure: Some("no grasp above threshold".into()),
                removed_object: None,
            });
            continue;
        };
        // Depth lookup happens in the scene's own frame (no crop: the
        // sample is already square at model resolution).
        let depth_img = scene.sample.depth.as_ref().expect("rendered above");
        let cam = image_to_camera(top, depth_img, &scene.intrinsics)?;
        let robot = camera_to_robot(&cam, &cfg.hand_eye);
        let sim: SimScene = sim_scene_from_synth(&scene, &cfg.hand_eye, cfg.gripper);
        let pick = plan_pick(&robot, &sim)?;
        let removed = pick.success.then_some(pick.object_index).flatten();
        report.per_attempt.push(AttemptRecord {
            attempt: report.attempts,
            grasp: Some(GraspRecord::with_robot(top, &robot)),
            success: pick.success,
            failure: pick.failure.map(|f| f.reason().to_string()),
            removed_object: removed,
        });
        if pick.success {
            report.successes += 1;
            scene.objects.remove(pick.object_index.expect("success has an index"));
        }
    }
    report.objects_remaining = scene.objects.len();
    report.success_rate = if report.attempts > 0 {
        report.successes as f64 / report.attempts as f64
    } else {
        0.0
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn empty_scene_terminates_immediately() {
        let model = Model::<f32>::build(&ModelConfig::desk(4, 32), 3).unwrap();
        // num_objects is clamped to >= 1 by synth_scene, so emulate the
        // empty scene by removing everything up front
        let cfg = TrialConfig::new(5, 1, 4);
        let size = model.config().input_size;
        let mut scene = synth_scene(cfg.seed, size, 1);
        scene.objects.clear();
        // run the loop body condition directly through the public API:
        // a max_attempts of 0 also yields a zero-attempt report
        let cfg0 = TrialConfig {
            max_attempts: 0,
            ..cfg
        };
        let report = run_clutter_trial(&model, &cfg0).unwrap();
        assert_eq!(report.attempts, 0);
        assert_eq!(report.successes, 0);
        assert_eq!(report.success_rate, 0.0);
    }

    #[test]
    fn accounting_holds_with_an_untrained_model() {
        let model = Model::<f32>::build(&ModelConfig::desk(4, 32), 3).unwrap();
        let cfg = TrialConfig::new(11, 3, 6);
        let report = run_clutter_trial(&model, &cfg).unwrap();
        assert!(report.attempts <= 6);
        assert!(report.successes <= report.attempts);
        assert_eq!(
            report.objects_remaining + report.successes,
            report.objects_total
        );
        assert_eq!(report.per_attempt.len(), report.attempts);
    }

    #[test]
    fn trials_are_reproducible() {
        let model = Model::<f32>::build(&ModelConfig::desk(4, 32), 3).unwrap();
        let cfg = TrialConfig::new(21, 2, 5);
        let a = run_clutter_trial(&model, &cfg).unwrap();
        let b = run_clutter_trial(&model, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
