//! Image -> camera -> robot transform chain.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{wrap_angle, GeometryError, Image2, PixelGrasp};

/// Pinhole camera parameters. `depth_scale` converts stored depth units
/// to meters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.fx > 0.0 && self.fy > 0.0 && self.depth_scale > 0.0 {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(format!("{self:?}")))
        }
    }
}

/// Grasp pose lifted into the camera's 3-D frame.
#[derive(Clone, Copy, Debug)]
pub struct CameraGrasp {
    pub position: Vector3<f64>,
    pub theta: f64,
    pub width_m: f64,
    pub quality: f64,
}

/// Grasp pose in the robot frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RobotGrasp {
    pub position: Vector3<f64>,
    pub theta_r: f64,
    pub width_r: f64,
    pub quality: f64,
}

/// Rigid camera-to-robot transform from hand-eye calibration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HandEyeTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl HandEyeTransform {
    /// Validates orthonormality (R^T R = I within 1e-9) and det = +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let gram = rotation.transpose() * rotation;
        let err = (gram - Matrix3::identity()).norm();
        if err > 1e-9 {
            return Err(GeometryError::InvalidRotation(format!(
                "R^T R deviates from I by {err:.2e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidRotation(format!(
                "determinant {det} is not +1"
            )));
        }
        Ok(HandEyeTransform {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        HandEyeTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        HandEyeTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn compose(&self, inner: &Self) -> Self {
        HandEyeTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }
}

/// Lifts an image-frame grasp into the camera frame using the depth at
/// its pixel: z = depth * depth_scale, X = (x - cx) z / fx,
/// Y = (y - cy) z / fy. The pixel width converts to meters through the
/// same local depth.
pub fn image_to_camera(
    g: &PixelGrasp,
    depth: &Image2<f32>,
    k: &CameraIntrinsics,
) -> Result<CameraGrasp, GeometryError> {
    k.validate()?;
    let xi = g.x.round();
    let yi = g.y.round();
    if !depth.contains(xi, yi) {
        return Err(GeometryError::InvalidDepth {
            x: g.x,
            y: g.y,
            depth: f64::NAN,
        });
    }
    let raw = depth.get(xi as usize, yi as usize) as f64;
    if !(raw > 0.0) || !raw.is_finite() {
        return Err(GeometryError::InvalidDepth {
            x: g.x,
            y: g.y,
            depth: raw,
        });
    }
    let z = raw * k.depth_scale;
    Ok(CameraGrasp {
        position: Vector3::new((g.x - k.cx) * z / k.fx, (g.y - k.cy) * z / k.fy, z),
        theta: g.theta,
        width_m: g.width * z / k.fx,
        quality: g.quality,
    })
}

/// Exact pinhole projection of a camera-frame point back to pixels.
pub fn camera_to_pixel(p: &Vector3<f64>, k: &CameraIntrinsics) -> (f64, f64) {
    (p.x * k.fx / p.z + k.cx, p.y * k.fy / p.z + k.cy)
}

/// Moves a camera-frame grasp into the robot frame. The closing
/// direction rotates with the transform; its bearing in the robot x-y
/// plane becomes the new grasp angle, re-wrapped into (-pi/2, pi/2].
/// Assumes the transform keeps the closing direction out of the robot
/// z-axis (a camera looking at the work plane).
pub fn camera_to_robot(g: &CameraGrasp, t: &HandEyeTransform) -> RobotGrasp {
    let closing = Vector3::new(g.theta.cos(), g.theta.sin(), 0.0);
    let turned = t.rotation() * closing;
    RobotGrasp {
        position: t.apply(&g.position),
        theta_r: wrap_angle(turned.y.atan2(turned.x)),
        width_r: g.width_m,
        quality: g.quality,
    }
}
