//! Grasp representation math: the double-angle codec, rectangle and
//! point forms, per-pixel grasp maps, the rectangle evaluation metric and
//! the image-to-camera-to-robot transform chain.
//!
//! Pixel coordinates are continuous: pixel (x, y) samples the plane at
//! exactly (x, y). All functions here are pure.

mod iou;
mod maps;
mod transform;

pub use iou::{metric_match, rect_iou, ANGLE_GATE_RAD, IOU_THRESHOLD};
pub use maps::{extract_grasps, render_target_maps, ExtractParams, GraspMaps};
pub use transform::{
    camera_to_pixel, camera_to_robot, image_to_camera, CameraGrasp, CameraIntrinsics,
    HandEyeTransform, RobotGrasp,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("angle codec input (0, 0) is degenerate")]
    DegenerateAngleInput,
    #[error("degenerate rectangle: {0}")]
    DegenerateRectangle(String),
    #[error("invalid depth {depth} at pixel ({x:.1}, {y:.1})")]
    InvalidDepth { x: f64, y: f64, depth: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("hand-eye rotation is not a proper rotation: {0}")]
    InvalidRotation(String),
}

/// Wraps an angle to (-pi/2, pi/2], the canonical range under the
/// pi-periodic symmetry of antipodal grasps. In-range values pass
/// through untouched.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -FRAC_PI_2 && theta <= FRAC_PI_2 {
        return theta;
    }
    let t = theta.rem_euclid(PI);
    if t > FRAC_PI_2 {
        t - PI
    } else {
        t
    }
}

/// Circular distance between two grasp angles, modulo pi.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Double-angle encoding: theta -> (cos 2*theta, sin 2*theta).
///
/// Antipodal grasps are identical under a pi rotation, so the doubled
/// angle is continuous and unique across the +-pi/2 seam.
pub fn encode_angle(theta: f64) -> (f64, f64) {
    ((2.0 * theta).cos(), (2.0 * theta).sin())
}

/// Inverse of [`encode_angle`]: 0.5 * atan2(sin2t, cos2t) in (-pi/2, pi/2].
pub fn decode_angle(cos2t: f64, sin2t: f64) -> Result<f64, GeometryError> {
    if cos2t == 0.0 && sin2t == 0.0 {
        return Err(GeometryError::DegenerateAngleInput);
    }
    Ok(0.5 * sin2t.atan2(cos2t))
}

/// Point-form grasp in image coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelGrasp {
    pub x: f64,
    pub y: f64,
    /// Radians in [-pi/2, pi/2]; the gripper closes along this direction.
    pub theta: f64,
    /// Gripper opening in pixels.
    pub width: f64,
    /// Score in [0, 1].
    pub quality: f64,
}

impl PixelGrasp {
    /// Equivalent rectangle: width along the closing axis, height
    /// (finger span) a fixed ratio of the width.
    pub fn to_rectangle(&self, height_ratio: f64) -> GraspRectangle {
        GraspRectangle {
            center: (self.x, self.y),
            theta: self.theta,
            width: self.width,
            height: height_ratio * self.width,
        }
    }
}

/// Default finger-span to opening ratio for the rectangle metric.
pub const DEFAULT_HEIGHT_RATIO: f64 = 0.5;

/// Oriented rectangle: width spans the closing direction (gripper
/// opening), height the perpendicular finger span.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspRectangle {
    pub center: (f64, f64),
    pub theta: f64,
    pub width: f64,
    pub height: f64,
}

impl GraspRectangle {
    pub fn new(center: (f64, f64), theta: f64, width: f64, height: f64) -> Self {
        GraspRectangle {
            center,
            theta,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.width > 0.0
            && self.height > 0.0
            && self.width.is_finite()
            && self.height.is_finite()
            && self.center.0.is_finite()
            && self.center.1.is_finite()
            && self.theta.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GeometryError::DegenerateRectangle(format!("{self:?}")))
        }
    }

    /// Unit vector along the closing direction (width axis).
    pub fn width_axis(&self) -> (f64, f64) {
        (self.theta.cos(), self.theta.sin())
    }

    /// Unit vector along the finger span (height axis).
    pub fn height_axis(&self) -> (f64, f64) {
        (-self.theta.sin(), self.theta.cos())
    }

    /// The four vertices in order: corners 0-1 and 2-3 bound the width
    /// edges (parallel to the closing direction), 1-2 and 3-0 the finger
    /// plates.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (ux, uy) = self.width_axis();
        let (vx, vy) = self.height_axis();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let (cx, cy) = self.center;
        [
            (cx - ux * hw - vx * hh, cy - uy * hw - vy * hh),
            (cx + ux * hw - vx * hh, cy + uy * hw - vy * hh),
            (cx + ux * hw + vx * hh, cy + uy * hw + vy * hh),
            (cx - ux * hw + vx * hh, cy - uy * hw + vy * hh),
        ]
    }

    /// Reconstructs (center, theta, width, height) from four ordered
    /// vertices as produced by [`GraspRectangle::corners`]. Theta comes
    /// back wrapped to (-pi/2, pi/2].
    pub fn from_corners(pts: &[(f64, f64); 4]) -> Result<Self, GeometryError> {
        let cx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
        let cy = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
        let wx = pts[1].0 - pts[0].0;
        let wy = pts[1].1 - pts[0].1;
        let hx = pts[2].0 - pts[1].0;
        let hy = pts[2].1 - pts[1].1;
        let width = (wx * wx + wy * wy).sqrt();
        let height = (hx * hx + hy * hy).sqrt();
        if width <= 0.0 || height <= 0.0 || !width.is_finite() || !height.is_finite() {
            return Err(GeometryError::DegenerateRectangle(format!(
                "zero-length edge from corners {pts:?}"
            )));
        }
        // Adjacent edges of a rectangle are orthogonal.
        let dot = (wx * hx + wy * hy) / (width * height);
        if dot.abs() > 1e-6 {
            return Err(GeometryError::DegenerateRectangle(format!(
                "corners are not rectangular (cos angle {dot:.2e})"
            )));
        }
        Ok(GraspRectangle {
            center: (cx, cy),
            theta: wrap_angle(wy.atan2(wx)),
            width,
            height,
        })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Rectangle scaled and shifted by an affine similarity
    /// (rotation `rot` about `pivot`, scale `s`, then translation).
    pub fn transformed(&self, pivot: (f64, f64), rot: f64, s: f64, shift: (f64, f64)) -> Self {
        let (sin, cos) = rot.sin_cos();
        let dx = self.center.0 - pivot.0;
        let dy = self.center.1 - pivot.1;
        GraspRectangle {
            center: (
                pivot.0 + s * (dx * cos - dy * sin) + shift.0,
                pivot.1 + s * (dx * sin + dy * cos) + shift.1,
            ),
            theta: wrap_angle(self.theta + rot),
            width: self.width * s,
            height: self.height * s,
        }
    }
}

/// Dense 2-D buffer with row-major storage, indexed (x, y).
#[derive(Clone, Debug, PartialEq)]
pub struct Image2<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Image2<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Image2 {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height);
        Image2 {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }
}

/// One grasp as a JSON-lines record; robot-frame fields are present only
/// after the transform chain has run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraspRecord {
    pub x: f64,
    pub y: f64,
    pub theta_rad: f64,
    pub width_px: f64,
    pub quality: f64,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    pub robot: Option<RobotFields>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobotFields {
    #[serde(rename = "X")]
    pub x_m: f64,
    #[serde(rename = "Y")]
    pub y_m: f64,
    #[serde(rename = "Z")]
    pub z_m: f64,
    pub theta_r_rad: f64,
    pub width_m: f64,
}

impl From<&PixelGrasp> for GraspRecord {
    fn from(g: &PixelGrasp) -> Self {
        GraspRecord {
            x: g.x,
            y: g.y,
            theta_rad: g.theta,
            width_px: g.width,
            quality: g.quality,
            robot: None,
        }
    }
}

impl GraspRecord {
    pub fn with_robot(g: &PixelGrasp, r: &RobotGrasp) -> Self {
        GraspRecord {
            robot: Some(RobotFields {
                x_m: r.position.x,
                y_m: r.position.y,
                z_m: r.position.z,
                theta_r_rad: r.theta_r,
                width_m: r.width_r,
            }),
            ..GraspRecord::from(g)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_angle_reference_points() {
        let (c, s) = encode_angle(0.0);
        assert_eq!((c, s), (1.0, 0.0));
        let (c, s) = encode_angle(std::f64::consts::FRAC_PI_4);
        assert!(c.abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
        // antipodal symmetry: both ends of the range encode identically
        let (c1, s1) = encode_angle(FRAC_PI_2);
        let (c2, s2) = encode_angle(-FRAC_PI_2);
        assert!((c1 - c2).abs() < 1e-12 && (s1 - s2).abs() < 1e-12);
        assert!((c1 + 1.0).abs() < 1e-12 && s1.abs() < 1e-12);
    }

    #[test]
    fn decode_angle_reference_points() {
        assert_eq!(decode_angle(1.0, 0.0).unwrap(), 0.0);
        assert!((decode_angle(0.0, 1.0).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(matches!(
            decode_angle(0.0, 0.0),
            Err(GeometryError::DegenerateAngleInput)
        ));
    }

    #[test]
    fn codec_roundtrip_sweep() {
        // interior of the range round-trips to machine precision
        let n = 10_001;
        for i in 0..n {
            let theta = -FRAC_PI_2 + (i as f64 + 0.5) / (n as f64 + 1.0) * PI;
            let (c, s) = encode_angle(theta);
            let back = decode_angle(c, s).unwrap();
            assert!(
                (back - theta).abs() < 1e-12,
                "theta {theta} came back as {back}"
            );
        }
    }

    #[test]
    fn wrap_angle_range_and_symmetry() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(FRAC_PI_2) - FRAC_PI_2).abs() < 1e-15);
        assert!((wrap_angle(-FRAC_PI_2) - FRAC_PI_2).abs() < 1e-15);
        assert!((wrap_angle(PI + 0.1) - 0.1).abs() < 1e-12);
        // 89 deg vs -89 deg differ by 2 deg under the pi-circular distance
        let a = 89f64.to_radians();
        let b = (-89f64).to_radians();
        assert!((angle_distance(a, b) - 2f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn rectangle_corner_roundtrip() {
        let r = GraspRectangle::new((12.5, -3.0), 0.7, 40.0, 21.0);
        let back = GraspRectangle::from_corners(&r.corners()).unwrap();
        assert!((back.center.0 - r.center.0).abs() < 1e-9);
        assert!((back.center.1 - r.center.1).abs() < 1e-9);
        assert!((back.theta - r.theta).abs() < 1e-9);
        assert!((back.width - r.width).abs() < 1e-9);
        assert!((back.height - r.height).abs() < 1e-9);
    }

    #[test]
    fn to_rectangle_defaults() {
        let g = PixelGrasp {
            x: 50.0,
            y: 60.0,
            theta: 0.0,
            width: 100.0,
            quality: 1.0,
        };
        let r = g.to_rectangle(DEFAULT_HEIGHT_RATIO);
        assert_eq!(r.width, 100.0);
        assert_eq!(r.height, 50.0);
        // axis-aligned corners
        let cs = r.corners();
        assert!((cs[0].0 - 0.0).abs() < 1e-12 && (cs[0].1 - 35.0).abs() < 1e-12);
        assert!((cs[2].0 - 100.0).abs() < 1e-12 && (cs[2].1 - 85.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_corners_match_explicit_rotation() {
        let r0 = GraspRectangle::new((10.0, 10.0), 0.0, 8.0, 4.0);
        let r90 = GraspRectangle::new((10.0, 10.0), FRAC_PI_2, 8.0, 4.0);
        let rot = |p: (f64, f64)| -> (f64, f64) {
            // rotate 90 degrees about the center
            (10.0 - (p.1 - 10.0), 10.0 + (p.0 - 10.0))
        };
        for (a, b) in r0.corners().iter().zip(r90.corners()) {
            let ra = rot(*a);
            assert!((ra.0 - b.0).abs() < 1e-12 && (ra.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn from_corners_rejects_skew() {
        let pts = [(0.0, 0.0), (4.0, 0.0), (5.0, 3.0), (1.0, 3.0)];
        assert!(GraspRectangle::from_corners(&pts).is_err());
    }

    #[test]
    fn grasp_record_json_fields() {
        let g = PixelGrasp {
            x: 1.0,
            y: 2.0,
            theta: 0.5,
            width: 30.0,
            quality: 0.9,
        };
        let line = serde_json::to_string(&GraspRecord::from(&g)).unwrap();
        assert!(line.contains("\"theta_rad\":0.5"));
        assert!(line.contains("\"width_px\":30.0"));
        assert!(!line.contains("width_m"));
    }
}
