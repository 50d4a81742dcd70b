//! Oriented-rectangle IoU via exact convex polygon clipping, and the
//! rectangle evaluation metric built on it.

use super::{angle_distance, GeometryError, GraspRectangle};

/// A prediction must overlap a ground-truth rectangle by strictly more
/// than this IoU.
pub const IOU_THRESHOLD: f64 = 0.25;
/// And differ in orientation by strictly less than this angle.
pub const ANGLE_GATE_RAD: f64 = std::f64::consts::PI / 6.0;

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn signed_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        acc += p.0 * q.1 - q.0 * p.1;
    }
    acc / 2.0
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    signed_area(poly).abs()
}

/// Sutherland-Hodgman: clips `subject` against every edge of the convex
/// polygon `clip`. Orientation of either polygon does not matter.
fn clip_convex(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let orient = signed_area(clip).signum();
    if orient == 0.0 {
        return Vec::new();
    }
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let inside = |p: (f64, f64)| cross(a, b, p) * orient >= 0.0;
        let mut prev = *input.last().unwrap();
        for &cur in &input {
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in != prev_in {
                // Edge crossing: intersect segment prev->cur with line a->b.
                let d_prev = cross(a, b, prev);
                let d_cur = cross(a, b, cur);
                let t = d_prev / (d_prev - d_cur);
                output.push((
                    prev.0 + t * (cur.0 - prev.0),
                    prev.1 + t * (cur.1 - prev.1),
                ));
            }
            if cur_in {
                output.push(cur);
            }
            prev = cur;
        }
    }
    output
}

/// Exact intersection-over-union of two oriented rectangles.
pub fn rect_iou(a: &GraspRectangle, b: &GraspRectangle) -> Result<f64, GeometryError> {
    a.validate()?;
    b.validate()?;
    let pa = a.corners();
    let pb = b.corners();
    let inter = polygon_area(&clip_convex(&pa, &pb));
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return Err(GeometryError::DegenerateRectangle(
            "union of rectangles has zero area".into(),
        ));
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// The rectangle metric: a prediction counts as a valid grasp when some
/// ground-truth rectangle overlaps it by IoU > 0.25 and differs in
/// orientation (mod pi) by < 30 degrees. Both inequalities are strict;
/// ties sit on a measure-zero boundary.
pub fn metric_match(pred: &GraspRectangle, truths: &[GraspRectangle]) -> bool {
    truths.iter().any(|t| {
        angle_distance(pred.theta, t.theta) < ANGLE_GATE_RAD
            && rect_iou(pred, t).map(|iou| iou > IOU_THRESHOLD).unwrap_or(false)
    })
}
