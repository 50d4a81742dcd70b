//! Rigid camera-to-robot calibration from 3-D point correspondences.

use nalgebra::{Matrix3, Vector3};

use super::SimError;
use crate::geometry::HandEyeTransform;

/// Matched (camera-frame, robot-frame) point pairs.
#[derive(Clone, Debug, Default)]
pub struct CalibrationSet {
    pub pairs: Vec<(Vector3<f64>, Vector3<f64>)>,
}

#[derive(Clone, Debug)]
pub struct CalibrationResult {
    pub transform: HandEyeTransform,
    /// Root-mean-square residual of the fitted transform, meters.
    pub residual_rms: f64,
}

/// Least-squares rigid transform via the orthogonal Procrustes solution:
/// SVD of the cross-covariance, with a determinant guard so the result is
/// a proper rotation even for 180-degree configurations.
pub fn solve_calibration(set: &CalibrationSet) -> Result<CalibrationResult, SimError> {
    let n = set.pairs.len();
    if n < 3 {
        return Err(SimError::DegenerateGeometry(format!(
            "need at least 3 correspondences, got {n}"
        )));
    }
    let inv_n = 1.0 / n as f64;
    let c_mean: Vector3<f64> = set.pairs.iter().map(|(c, _)| c).sum::<Vector3<f64>>() * inv_n;
    let r_mean: Vector3<f64> = set.pairs.iter().map(|(_, r)| r).sum::<Vector3<f64>>() * inv_n;

    let mut cross = Matrix3::<f64>::zeros();
    let mut spread = Matrix3::<f64>::zeros();
    for (c, r) in &set.pairs {
        let dc = c - c_mean;
        let dr = r - r_mean;
        cross += dc * dr.transpose();
        spread += dc * dc.transpose();
    }

    // Collinear camera points leave the rotation about their axis free.
    let spread_svd = spread.svd(false, false);
    let s = spread_svd.singular_values;
    if s[1] <= s[0].max(1e-12) * 1e-9 {
        return Err(SimError::DegenerateGeometry(
            "calibration points are collinear".into(),
        ));
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let d = (v_t.transpose() * u.transpose()).determinant();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum()));
    let rotation = v_t.transpose() * fix * u.transpose();
    let translation = r_mean - rotation * c_mean;
    let transform = HandEyeTransform::new(rotation, translation)?;

    let mut sq = 0.0;
    for (c, r) in &set.pairs {
        sq += (transform.apply(c) - r).norm_squared();
    }
    Ok(CalibrationResult {
        transform,
        residual_rms: (sq * inv_n).sqrt(),
    })
}
