//! Analytic antipodal-closure check for a parallel-jaw pick.

use serde::Serialize;

use super::{v3, SimError};
use crate::dataset::SynthScene;
use crate::geometry::{camera_to_pixel, HandEyeTransform, RobotGrasp};

/// Parallel-jaw gripper limits.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GripperParams {
    pub max_opening_m: f64,
    pub finger_thickness_m: f64,
}

impl Default for GripperParams {
    fn default() -> Self {
        GripperParams {
            max_opening_m: crate::dataset::GRIPPER_MAX_OPENING_M,
            finger_thickness_m: 0.01,
        }
    }
}

/// Axis-aligned workspace box in the robot frame.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WorkspaceBounds {
    pub min: (f64, f64, f64),
    pub max: (f64, f64, f64),
}

impl WorkspaceBounds {
    pub fn contains(&self, p: &nalgebra::Vector3<f64>) -> bool {
        p.x >= self.min.0
            && p.y >= self.min.1
            && p.z >= self.min.2
            && p.x <= self.max.0
            && p.y <= self.max.1
            && p.z <= self.max.2
    }
}

/// Convex object outline on the table plane, robot frame, meters.
#[derive(Clone, Debug)]
pub struct SimObject {
    pub polygon_m: Vec<(f64, f64)>,
    pub top_z_m: f64,
}

/// Scene the pick planner reasons about.
#[derive(Clone, Debug)]
pub struct SimScene {
    pub objects: Vec<SimObject>,
    pub gripper: GripperParams,
    pub workspace: WorkspaceBounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PickFailure {
    /// The closing segment crosses no object.
    NoContact,
    /// The closing segment straddles more than one object.
    MultipleObjects,
    /// No antipodal closure at this pose: contact-edge normals do not
    /// oppose the closing direction, or a finger lands inside an object.
    NonAntipodalContact,
    /// Required opening exceeds the gripper maximum.
    ExceedsGripper,
}

impl PickFailure {
    pub fn reason(&self) -> &'static str {
        match self {
            PickFailure::NoContact => "no contact",
            PickFailure::MultipleObjects => "straddles multiple objects",
            PickFailure::NonAntipodalContact => "non-antipodal contact",
            PickFailure::ExceedsGripper => "exceeds gripper",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PickResult {
    pub success: bool,
    pub failure: Option<PickFailure>,
    /// Index of the object the closing line straddles, when exactly one.
    pub object_index: Option<usize>,
    /// Pre-grasp pose: the grasp pose lifted for the approach.
    pub approach: RobotGrasp,
}

const APPROACH_CLEARANCE_M: f64 = 0.10;
/// Contact normals must oppose the closing direction within this angle,
/// mirroring the rectangle metric's orientation gate.
const ANTIPODAL_TOLERANCE_RAD: f64 = std::f64::consts::PI / 6.0;

/// Entry/exit parameters of the segment p0 + t*(p1-p0) through a convex
/// polygon, with the edge index deciding each bound.
fn segment_polygon_span(
    p0: (f64, f64),
    d: (f64, f64),
    poly: &[(f64, f64)],
) -> Option<(f64, usize, f64, usize)> {
    let n = poly.len();
    let cx = poly.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let cy = poly.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut e_enter = 0usize;
    let mut e_exit = 0usize;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        // outward normal: perpendicular pointing away from the centroid
        let (ex, ey) = (b.0 - a.0, b.1 - a.1);
        let len = (ex * ex + ey * ey).sqrt();
        let mut nx = -ey / len;
        let mut ny = ex / len;
        if nx * (cx - a.0) + ny * (cy - a.1) > 0.0 {
            nx = -nx;
            ny = -ny;
        }
        let denom = nx * d.0 + ny * d.1;
        let dist = nx * (p0.0 - a.0) + ny * (p0.1 - a.1);
        if denom.abs() < 1e-12 {
            if dist > 0.0 {
                return None; // runs parallel outside this face
            }
            continue;
        }
        let t = -dist / denom;
        if denom < 0.0 {
            // entering through this face
            if t > t_enter {
                t_enter = t;
                e_enter = i;
            }
        } else if t < t_exit {
            t_exit = t;
            e_exit = i;
        }
    }
    (t_enter < t_exit).then_some((t_enter, e_enter, t_exit, e_exit))
}

fn outward_normal(poly: &[(f64, f64)], edge: usize) -> (f64, f64) {
    let n = poly.len();
    let a = poly[edge];
    let b = poly[(edge + 1) % n];
    let cx = poly.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let cy = poly.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (ex, ey) = (b.0 - a.0, b.1 - a.1);
    let len = (ex * ex + ey * ey).sqrt();
    let (mut nx, mut ny) = (-ey / len, ex / len);
    if nx * (cx - a.0) + ny * (cy - a.1) > 0.0 {
        nx = -nx;
        ny = -ny;
    }
    (nx, ny)
}

/// Success requires: the closing segment straddles exactly one object,
/// both contact-edge outward normals oppose the closing direction within
/// 30 degrees, and the opening fits the gripper.
pub fn plan_pick(g: &RobotGrasp, scene: &SimScene) -> Result<PickResult, SimError> {
    if !scene.workspace.contains(&g.position) {
        return Err(SimError::OutOfWorkspace(
            g.position.x,
            g.position.y,
            g.position.z,
        ));
    }
    let approach = RobotGrasp {
        position: v3(
            g.position.x,
            g.position.y,
            g.position.z + APPROACH_CLEARANCE_M,
        ),
        ..*g
    };
    let fail = |failure: PickFailure, object_index: Option<usize>| PickResult {
        success: false,
        failure: Some(failure),
        object_index,
        approach,
    };

    if g.width_r > scene.gripper.max_opening_m {
        return Ok(fail(PickFailure::ExceedsGripper, None));
    }

    let dir = (g.theta_r.cos(), g.theta_r.sin());
    let half = g.width_r / 2.0;
    let p0 = (g.position.x - dir.0 * half, g.position.y - dir.1 * half);
    let seg = (dir.0 * g.width_r, dir.1 * g.width_r);

    const EPS: f64 = 1e-9;
    let mut straddled: Vec<(usize, usize, usize)> = Vec::new();
    for (idx, obj) in scene.objects.iter().enumerate() {
        match segment_polygon_span(p0, seg, &obj.polygon_m) {
            None => continue,
            Some((t0, e0, t1, e1)) => {
                if t1 <= EPS || t0 >= 1.0 - EPS {
                    continue; // polygon beyond a finger tip
                }
                if t0 <= EPS || t1 >= 1.0 - EPS {
                    // a finger position falls inside the object: no closure
                    return Ok(fail(PickFailure::NonAntipodalContact, Some(idx)));
                }
                straddled.push((idx, e0, e1));
            }
        }
    }
    match straddled.len() {
        0 => Ok(fail(PickFailure::NoContact, None)),
        1 => {
            let (idx, e0, e1) = straddled[0];
            let poly = &scene.objects[idx].polygon_m;
            let n_in = outward_normal(poly, e0);
            let n_out = outward_normal(poly, e1);
            let cos_gate = ANTIPODAL_TOLERANCE_RAD.cos();
            // entry face pushes back against +dir, exit face against -dir
            let entry_ok = -(n_in.0 * dir.0 + n_in.1 * dir.1) >= cos_gate;
            let exit_ok = n_out.0 * dir.0 + n_out.1 * dir.1 >= cos_gate;
            if entry_ok && exit_ok {
                Ok(PickResult {
                    success: true,
                    failure: None,
                    object_index: Some(idx),
                    approach,
                })
            } else {
                Ok(fail(PickFailure::NonAntipodalContact, Some(idx)))
            }
        }
        _ => Ok(fail(PickFailure::MultipleObjects, None)),
    }
}

/// Lifts a synthetic scene into robot-frame pick geometry: each polygon
/// vertex backprojects at its object's top depth, then moves through the
/// hand-eye transform.
pub fn sim_scene_from_synth(
    scene: &SynthScene,
    hand_eye: &HandEyeTransform,
    gripper: GripperParams,
) -> SimScene {
    let k = &scene.intrinsics;
    let objects = scene
        .objects
        .iter()
        .map(|obj| {
            let z = obj.top_depth_m;
            let polygon_m: Vec<(f64, f64)> = obj
                .polygon
                .iter()
                .map(|&(px, py)| {
                    let cam = v3((px - k.cx) * z / k.fx, (py - k.cy) * z / k.fy, z);
                    let rob = hand_eye.apply(&cam);
                    (rob.x, rob.y)
                })
                .collect();
            let top = hand_eye.apply(&v3(0.0, 0.0, z));
            SimObject {
                polygon_m,
                top_z_m: top.z,
            }
        })
        .collect();
    // Bound the workspace by the table footprint with generous margins.
    let corner = |px: f64, py: f64| {
        let cam = v3(
            (px - k.cx) * scene.table_depth_m / k.fx,
            (py - k.cy) * scene.table_depth_m / k.fy,
            scene.table_depth_m,
        );
        hand_eye.apply(&cam)
    };
    let size = scene.sample.dims().0 as f64;
    let c0 = corner(0.0, 0.0);
    let c1 = corner(size, size);
    let min = (
        c0.x.min(c1.x) - 0.5,
        c0.y.min(c1.y) - 0.5,
        c0.z.min(c1.z) - 0.5,
    );
    let max = (
        c0.x.max(c1.x) + 0.5,
        c0.y.max(c1.y) + 0.5,
        c0.z.max(c1.z) + 0.5,
    );
    SimScene {
        objects,
        gripper,
        workspace: WorkspaceBounds { min, max },
    }
}

/// Projects a robot-frame point back to scene pixels; test helper for the
/// chain-consistency checks.
pub fn robot_to_pixel(
    p: &nalgebra::Vector3<f64>,
    hand_eye: &HandEyeTransform,
    k: &crate::geometry::CameraIntrinsics,
) -> (f64, f64) {
    let cam = hand_eye.inverse().apply(p);
    camera_to_pixel(&cam, k)
}
