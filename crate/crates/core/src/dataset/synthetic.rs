//! Synthetic tabletop scenes with analytic grasp ground truth.
//!
//! Scenes place non-overlapping convex shapes (bars, square plates,
//! flat-sided disks) on a flat table viewed top-down by a pinhole camera.
//! Every pair of anti-parallel polygon edges whose gap fits the gripper
//! yields ground-truth grasp rectangles, so labels need no annotator and
//! no network.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{read_annotations, write_annotations, DatasetError, Sample, Source};
use crate::geometry::{wrap_angle, CameraIntrinsics, GraspRectangle, Image2};

/// Table plane distance from the camera, meters.
pub const TABLE_DEPTH_M: f64 = 0.8;
/// Maximum antipodal gripper opening, meters.
pub const GRIPPER_MAX_OPENING_M: f64 = 0.15;

/// Pinhole model for synthetic scenes: the half-image gripper span at
/// table depth equals the physical maximum opening.
pub fn synth_intrinsics(image_size: usize) -> CameraIntrinsics {
    let s = image_size as f64;
    CameraIntrinsics {
        fx: s / 2.0 * TABLE_DEPTH_M / GRIPPER_MAX_OPENING_M,
        fy: s / 2.0 * TABLE_DEPTH_M / GRIPPER_MAX_OPENING_M,
        cx: s / 2.0,
        cy: s / 2.0,
        depth_scale: 1.0,
    }
}

/// Maximum graspable opening in pixels at table depth.
pub fn synth_w_max_px(image_size: usize) -> f64 {
    image_size as f64 / 2.0
}

/// One convex obstacle: a polygon in pixel coordinates with a flat top.
#[derive(Clone, Debug)]
pub struct SceneObject {
    pub polygon: Vec<(f64, f64)>,
    /// Depth of the top face, meters (table minus object height).
    pub top_depth_m: f64,
    pub color: [u8; 3],
}

impl SceneObject {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        point_in_convex(&self.polygon, (x, y))
    }
}

/// A rendered scene: the dataset sample plus the geometry that produced
/// it, sufficient for the pick simulation to check grasps analytically.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub sample: Sample,
    pub objects: Vec<SceneObject>,
    pub intrinsics: CameraIntrinsics,
    pub table_depth_m: f64,
}

fn point_in_convex(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        if c.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

/// Separating-axis test with a margin: true when the convex polygons are
/// at least `margin` apart along some edge normal.
fn convex_separated(a: &[(f64, f64)], b: &[(f64, f64)], margin: f64) -> bool {
    let axes = |poly: &[(f64, f64)]| -> Vec<(f64, f64)> {
        (0..poly.len())
            .map(|i| {
                let p = poly[i];
                let q = poly[(i + 1) % poly.len()];
                let (dx, dy) = (q.0 - p.0, q.1 - p.1);
                let len = (dx * dx + dy * dy).sqrt();
                (-dy / len, dx / len)
            })
            .collect()
    };
    for axis in axes(a).into_iter().chain(axes(b)) {
        let proj = |poly: &[(f64, f64)]| -> (f64, f64) {
            let vals = poly.iter().map(|p| p.0 * axis.0 + p.1 * axis.1);
            vals.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, v| {
                (acc.0.min(v), acc.1.max(v))
            })
        };
        let (a_lo, a_hi) = proj(a);
        let (b_lo, b_hi) = proj(b);
        if b_lo - a_hi >= margin || a_lo - b_hi >= margin {
            return true;
        }
    }
    false
}

fn polygon_of(kind: usize, cx: f64, cy: f64, phi: f64, size: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let rot = |pts: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        let (s, c) = phi.sin_cos();
        pts.into_iter()
            .map(|(x, y)| (cx + x * c - y * s, cy + x * s + y * c))
            .collect()
    };
    match kind {
        // bar: long and thin, one clearly graspable axis
        0 => {
            let half_l = size * rng.gen_range(0.21..0.31);
            let half_t = size * rng.gen_range(0.05..0.09);
            rot(vec![
                (-half_l, -half_t),
                (half_l, -half_t),
                (half_l, half_t),
                (-half_l, half_t),
            ])
        }
        // square plate: two graspable axes
        1 => {
            let half = size * rng.gen_range(0.08..0.12);
            rot(vec![(-half, -half), (half, -half), (half, half), (-half, half)])
        }
        // disk with flats: regular octagon, four antipodal edge pairs
        _ => {
            let r = size * rng.gen_range(0.10..0.14);
            let n = 8;
            rot((0..n)
                .map(|i| {
                    let a = (i as f64 + 0.5) / n as f64 * std::f64::consts::TAU;
                    (r * a.cos(), r * a.sin())
                })
                .collect())
        }
    }
}

/// Ground-truth rectangles for one convex polygon: every pair of
/// anti-parallel edges whose gap plus clearance fits `w_max_px` produces
/// grasps along the overlap of the two edges.
pub fn analytic_grasps(polygon: &[(f64, f64)], w_max_px: f64) -> Vec<GraspRectangle> {
    let n = polygon.len();
    let mut out = Vec::new();
    let edge = |i: usize| -> ((f64, f64), (f64, f64)) { (polygon[i], polygon[(i + 1) % n]) };
    for i in 0..n {
        for j in i + 1..n {
            let (p0, p1) = edge(i);
            let (q0, q1) = edge(j);
            let di = {
                let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
                let l = (dx * dx + dy * dy).sqrt();
                (dx / l, dy / l)
            };
            let dj = {
                let (dx, dy) = (q1.0 - q0.0, q1.1 - q0.1);
                let l = (dx * dx + dy * dy).sqrt();
                (dx / l, dy / l)
            };
            // anti-parallel edges of a convex polygon face each other
            if (di.0 * dj.0 + di.1 * dj.1 + 1.0).abs() > 1e-6 {
                continue;
            }
            // gap along the common normal
            let gap = ((q0.0 - p0.0) * -di.1 + (q0.1 - p0.1) * di.0).abs();
            let clearance = (0.25 * gap).clamp(3.0, 10.0);
            let grasp_width = gap + clearance;
            if grasp_width > w_max_px * 0.98 || gap < 2.0 {
                continue;
            }
            // overlap of the two edges projected on the edge direction
            let t = |p: (f64, f64)| p.0 * di.0 + p.1 * di.1;
            let (a_lo, a_hi) = (t(p0).min(t(p1)), t(p0).max(t(p1)));
            let (b_lo, b_hi) = (t(q0).min(t(q1)), t(q0).max(t(q1)));
            let lo = a_lo.max(b_lo);
            let hi = a_hi.min(b_hi);
            if hi - lo < 5.0 {
                continue;
            }
            // midpoint between the two supporting lines, at the overlap
            let mid_of = |s: f64| -> (f64, f64) {
                let on_i = (p0.0 + di.0 * (s - t(p0)), p0.1 + di.1 * (s - t(p0)));
                let on_j_t = q0.0 * di.0 + q0.1 * di.1;
                let on_j = (q0.0 + di.0 * (s - on_j_t), q0.1 + di.1 * (s - on_j_t));
                ((on_i.0 + on_j.0) / 2.0, (on_i.1 + on_j.1) / 2.0)
            };
            let theta = wrap_angle((-di.0).atan2(di.1)); // normal direction
            let span = hi - lo;
            let fractions: &[f64] = if span >= 24.0 { &[0.3, 0.5, 0.7] } else { &[0.5] };
            for f in fractions {
                out.push(GraspRectangle::new(
                    mid_of(lo + span * f),
                    theta,
                    grasp_width,
                    (span * 0.6).min(grasp_width),
                ));
            }
        }
    }
    out
}

/// Rasterizes RGB and depth images for a set of objects.
pub fn render_scene(
    objects: &[SceneObject],
    image_size: usize,
) -> (RgbImage, Image2<f32>) {
    let mut rgb = RgbImage::from_pixel(image_size as u32, image_size as u32, Rgb([168, 168, 172]));
    let mut depth = Image2::new(image_size, image_size, TABLE_DEPTH_M as f32);
    for obj in objects {
        let min_x = obj.polygon.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_x = obj.polygon.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(image_size as f64 - 1.0) as usize;
        let min_y = obj.polygon.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_y = obj.polygon.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(image_size as f64 - 1.0) as usize;
        for y in min_y..=max_y {
            for x in min_x..=max_x {
                if point_in_convex(&obj.polygon, (x as f64, y as f64)) {
                    rgb.put_pixel(x as u32, y as u32, Rgb(obj.color));
                    depth.set(x, y, obj.top_depth_m as f32);
                }
            }
        }
    }
    (rgb, depth)
}

/// Generates one scene. Identical seeds produce bitwise-identical
/// samples; `num_objects` convex shapes are placed without overlap by
/// rejection sampling.
pub fn synth_scene(seed: u64, image_size: usize, num_objects: usize) -> SynthScene {
    assert!((1..=5).contains(&num_objects), "num_objects must be 1..=5");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = image_size as f64;
    let w_max = synth_w_max_px(image_size);
    let mut objects: Vec<SceneObject> = Vec::new();
    let margin = (s * 0.06).max(3.0);
    let mut attempts = 0;
    while objects.len() < num_objects && attempts < 500 {
        attempts += 1;
        let kind = rng.gen_range(0..3usize);
        let cx = rng.gen_range(s * 0.22..s * 0.78);
        let cy = rng.gen_range(s * 0.22..s * 0.78);
        let phi = rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
        let polygon = polygon_of(kind, cx, cy, phi, s, &mut rng);
        let in_frame = polygon
            .iter()
            .all(|&(x, y)| x >= 2.0 && y >= 2.0 && x < s - 2.0 && y < s - 2.0);
        if !in_frame {
            continue;
        }
        if !objects
            .iter()
            .all(|o| convex_separated(&o.polygon, &polygon, margin))
        {
            continue;
        }
        if analytic_grasps(&polygon, w_max).is_empty() {
            continue;
        }
        let height_m = rng.gen_range(0.03..0.06);
        let hue = rng.gen_range(0.0..360.0f64);
        objects.push(SceneObject {
            polygon,
            top_depth_m: TABLE_DEPTH_M - height_m,
            color: hue_to_rgb(hue),
        });
    }
    let (rgb, depth) = render_scene(&objects, image_size);
    let rectangles: Vec<GraspRectangle> = objects
        .iter()
        .flat_map(|o| analytic_grasps(&o.polygon, w_max))
        .collect();
    SynthScene {
        sample: Sample {
            id: format!("synth-{seed:08x}"),
            object_id: format!("synth-{seed:08x}"),
            source: Source::Synthetic,
            rgb: Some(rgb),
            depth: Some(depth),
            rectangles,
        },
        objects,
        intrinsics: synth_intrinsics(image_size),
        table_depth_m: TABLE_DEPTH_M,
    }
}

/// A reproducible batch of scenes: stream i of the base seed drives
/// scene i.
pub fn synth_dataset(
    base_seed: u64,
    count: usize,
    image_size: usize,
    max_objects: usize,
) -> Vec<SynthScene> {
    (0..count)
        .map(|i| {
            let mut mix = ChaCha8Rng::seed_from_u64(base_seed);
            mix.set_stream(i as u64 + 1);
            let scene_seed: u64 = mix.gen();
            let num = 1 + (scene_seed as usize % max_objects.max(1)).min(4);
            let mut scene = synth_scene(scene_seed, image_size, num);
            scene.sample.id = format!("synth-{base_seed}-{i:05}");
            scene.sample.object_id = scene.sample.id.clone();
            scene
        })
        .collect()
}

fn hue_to_rgb(hue: f64) -> [u8; 3] {
    let h = (hue / 60.0) % 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as usize {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let scale = |v: f64| (40.0 + v * 175.0) as u8;
    [scale(r), scale(g), scale(b)]
}

/// Writes scenes to a dataset directory: per-sample RGB png + depth tiff
/// plus one `annotations.jsonl` covering all samples.
pub fn save_synth_dataset(dir: &Path, scenes: &[SynthScene]) -> Result<(), DatasetError> {
    std::fs::create_dir_all(dir)?;
    for scene in scenes {
        let s = &scene.sample;
        s.rgb
            .as_ref()
            .expect("synthetic scenes render rgb")
            .save(dir.join(format!("{}_rgb.png", s.id)))?;
        let d = s.depth.as_ref().expect("synthetic scenes render depth");
        let file = std::fs::File::create(dir.join(format!("{}_depth.tiff", s.id)))?;
        let mut enc = tiff::encoder::TiffEncoder::new(std::io::BufWriter::new(file))
            .map_err(|e| DatasetError::Format(e.to_string()))?;
        enc.write_image::<tiff::encoder::colortype::Gray32Float>(
            d.width() as u32,
            d.height() as u32,
            d.as_slice(),
        )
        .map_err(|e| DatasetError::Format(e.to_string()))?;
    }
    let samples: Vec<Sample> = scenes.iter().map(|s| s.sample.clone()).collect();
    write_annotations(&dir.join("annotations.jsonl"), &samples)
}

/// Loads a directory produced by [`save_synth_dataset`].
pub fn load_synth_dataset(dir: &Path) -> Result<Vec<Sample>, DatasetError> {
    let ann_path = dir.join("annotations.jsonl");
    if !ann_path.exists() {
        return Err(DatasetError::MissingFile {
            id: "annotations.jsonl".into(),
            path: ann_path,
        });
    }
    let mut samples = Vec::new();
    for rec in read_annotations(&ann_path)? {
        let rgb_path = dir.join(format!("{}_rgb.png", rec.id));
        let rgb = image::open(&rgb_path)
            .map_err(|_| DatasetError::MissingFile {
                id: rec.id.clone(),
                path: rgb_path,
            })?
            .to_rgb8();
        let depth_path = dir.join(format!("{}_depth.tiff", rec.id));
        let depth = super::jacquard::read_depth_tiff(&depth_path)?;
        samples.push(Sample {
            id: rec.id.clone(),
            object_id: rec.object_id.clone(),
            source: rec.source,
            rgb: Some(rgb),
            depth: Some(depth),
            rectangles: rec.rectangles.iter().map(|r| r.into()).collect(),
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_distance;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn horizontal_bar_yields_a_cross_axis_grasp() {
        // bar lying along x with thickness 40px: closing across it means
        // theta around +-pi/2 and width 40 plus clearance
        let polygon = vec![(30.0, 80.0), (170.0, 80.0), (170.0, 120.0), (30.0, 120.0)];
        let grasps = analytic_grasps(&polygon, 100.0);
        assert!(!grasps.is_empty());
        let cross: Vec<_> = grasps
            .iter()
            .filter(|g| angle_distance(g.theta, FRAC_PI_2) < 1e-9)
            .collect();
        assert!(!cross.is_empty(), "no cross-axis grasp in {grasps:?}");
        for g in cross {
            assert!(g.width > 40.0 && g.width <= 50.01, "width {}", g.width);
        }
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let a = synth_scene(42, 48, 3);
        let b = synth_scene(42, 48, 3);
        assert_eq!(
            a.sample.rgb.as_ref().unwrap().as_raw(),
            b.sample.rgb.as_ref().unwrap().as_raw()
        );
        assert_eq!(
            a.sample.depth.as_ref().unwrap().as_slice(),
            b.sample.depth.as_ref().unwrap().as_slice()
        );
        assert_eq!(a.sample.rectangles, b.sample.rectangles);
    }

    #[test]
    fn requested_objects_are_placed_disjoint_with_ground_truth() {
        let scene = synth_scene(7, 64, 3);
        assert_eq!(scene.objects.len(), 3);
        assert!(scene.sample.rectangles.len() >= 3);
        for (i, a) in scene.objects.iter().enumerate() {
            for b in &scene.objects[i + 1..] {
                assert!(convex_separated(&a.polygon, &b.polygon, 1.0));
            }
        }
        // every grasp center lies on its object
        for r in &scene.sample.rectangles {
            assert!(
                scene
                    .objects
                    .iter()
                    .any(|o| o.contains(r.center.0, r.center.1)),
                "grasp center {:?} on no object",
                r.center
            );
        }
    }

    #[test]
    fn depth_encodes_object_height() {
        let scene = synth_scene(3, 48, 1);
        let d = scene.sample.depth.as_ref().unwrap();
        let min = d.as_slice().iter().copied().fold(f32::INFINITY, f32::min);
        let max = d.as_slice().iter().copied().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!(max, TABLE_DEPTH_M as f32);
        assert!(min < TABLE_DEPTH_M as f32 - 0.02);
    }

    #[test]
    fn dataset_save_load_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let scenes = synth_dataset(11, 4, 32, 2);
        assert_eq!(scenes.len(), 4);
        save_synth_dataset(tmp.path(), &scenes).unwrap();
        let loaded = load_synth_dataset(tmp.path()).unwrap();
        assert_eq!(loaded.len(), 4);
        for (orig, back) in scenes.iter().zip(&loaded) {
            assert_eq!(orig.sample.id, back.id);
            assert_eq!(
                orig.sample.rgb.as_ref().unwrap().as_raw(),
                back.rgb.as_ref().unwrap().as_raw()
            );
            assert_eq!(
                orig.sample.depth.as_ref().unwrap().as_slice(),
                back.depth.as_ref().unwrap().as_slice()
            );
            assert_eq!(orig.sample.rectangles.len(), back.rectangles.len());
        }
    }
}
