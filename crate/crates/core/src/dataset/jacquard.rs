//! Jacquard grasp dataset ingestion.
//!
//! Expected layout: one directory per object, containing per-scene files
//!   <n>_<object>_RGB.png
//!   <n>_<object>_perfect_depth.tiff   (single-channel f32, meters)
//!   <n>_<object>_grasps.txt           ("x;y;theta;opening;jaw" records,
//!                                      theta in degrees, y-up convention)
//!
//! Angles flip sign to land in the image's y-down frame; jaw size becomes
//! the rectangle height.

use std::path::Path;

use super::{DatasetError, Sample, Source};
use crate::geometry::{wrap_angle, GraspRectangle, Image2};

/// Reads a single-channel depth TIFF (f32/f64/u16 samples) into meters.
pub fn read_depth_tiff(path: &Path) -> Result<Image2<f32>, DatasetError> {
    let file = std::fs::File::open(path)?;
    let mut dec = tiff::decoder::Decoder::new(std::io::BufReader::new(file))
        .map_err(|e| DatasetError::Format(format!("{}: {e}", path.display())))?;
    let (w, h) = dec
        .dimensions()
        .map_err(|e| DatasetError::Format(format!("{}: {e}", path.display())))?;
    let img = dec
        .read_image()
        .map_err(|e| DatasetError::Format(format!("{}: {e}", path.display())))?;
    let data: Vec<f32> = match img {
        tiff::decoder::DecodingResult::F32(v) => v,
        tiff::decoder::DecodingResult::F64(v) => v.into_iter().map(|x| x as f32).collect(),
        tiff::decoder::DecodingResult::U16(v) => v.into_iter().map(|x| x as f32).collect(),
        other => {
            return Err(DatasetError::Format(format!(
                "{}: unsupported depth sample format {:?}",
                path.display(),
                std::mem::discriminant(&other)
            )))
        }
    };
    if data.len() != (w * h) as usize {
        return Err(DatasetError::Format(format!(
            "{}: expected {} depth samples, got {}",
            path.display(),
            w * h,
            data.len()
        )));
    }
    Ok(Image2::from_vec(w as usize, h as usize, data))
}

fn parse_grasps(path: &Path) -> Result<Vec<GraspRectangle>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let mut rects = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(';').collect();
        if parts.len() < 5 {
            return Err(DatasetError::MalformedRectangle {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected 5 ';'-separated fields, got {}", parts.len()),
            });
        }
        let mut vals = [0.0f64; 5];
        for (slot, tok) in vals.iter_mut().zip(&parts) {
            *slot = tok
                .trim()
                .parse()
                .map_err(|e| DatasetError::MalformedRectangle {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: format!("{e}"),
                })?;
        }
        let [x, y, theta_deg, opening, jaw] = vals;
        if !vals.iter().all(|v| v.is_finite()) {
            log::warn!("dropping non-finite grasp at {} line {}", path.display(), i + 1);
            continue;
        }
        rects.push(GraspRectangle::new(
            (x, y),
            wrap_angle(-theta_deg.to_radians()),
            opening,
            jaw,
        ));
    }
    Ok(rects)
}

/// Loads every Jacquard scene under `root`. The object directory name is
/// the object id for object-wise splits.
pub fn load_jacquard(root: impl AsRef<Path>) -> Result<Vec<Sample>, DatasetError> {
    let root = root.as_ref();
    let mut scene_files: Vec<(String, String, std::path::PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        let obj_dir = entry.path();
        if !obj_dir.is_dir() {
            continue;
        }
        let object_id = entry.file_name().to_string_lossy().to_string();
        for f in std::fs::read_dir(&obj_dir)? {
            let f = f?;
            let name = f.file_name().to_string_lossy().to_string();
            if let Some(stem) = name.strip_suffix("_grasps.txt") {
                scene_files.push((stem.to_string(), object_id.clone(), obj_dir.clone()));
            }
        }
    }
    if scene_files.is_empty() {
        return Err(DatasetError::MissingFile {
            id: "*_grasps.txt".into(),
            path: root.to_path_buf(),
        });
    }
    scene_files.sort();
    let mut samples = Vec::with_capacity(scene_files.len());
    for (stem, object_id, dir) in scene_files {
        let rgb_path = dir.join(format!("{stem}_RGB.png"));
        let rgb = image::open(&rgb_path)
            .map_err(|_| DatasetError::MissingFile {
                id: stem.clone(),
                path: rgb_path.clone(),
            })?
            .to_rgb8();
        let depth_path = dir.join(format!("{stem}_perfect_depth.tiff"));
        if !depth_path.exists() {
            return Err(DatasetError::MissingFile {
                id: stem.clone(),
                path: depth_path,
            });
        }
        let depth = read_depth_tiff(&depth_path)?;
        let rectangles = parse_grasps(&dir.join(format!("{stem}_grasps.txt")))?;
        samples.push(Sample {
            id: stem,
            object_id,
            source: Source::Jacquard,
            rgb: Some(rgb),
            depth: Some(depth),
            rectangles,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn write_fixture_scene(dir: &Path, object: &str, n: usize, grasps: &str) {
        let obj_dir = dir.join(object);
        std::fs::create_dir_all(&obj_dir).unwrap();
        let stem = format!("{n}_{object}");
        let rgb = image::RgbImage::from_pixel(32, 32, Rgb([90, 120, 60]));
        rgb.save(obj_dir.join(format!("{stem}_RGB.png"))).unwrap();
        let depth: Vec<f32> = (0..32 * 32).map(|i| 1.2 + (i % 5) as f32 * 0.01).collect();
        let file =
            std::fs::File::create(obj_dir.join(format!("{stem}_perfect_depth.tiff"))).unwrap();
        let mut enc = tiff::encoder::TiffEncoder::new(std::io::BufWriter::new(file)).unwrap();
        enc.write_image::<tiff::encoder::colortype::Gray32Float>(32, 32, &depth)
            .unwrap();
        std::fs::write(obj_dir.join(format!("{stem}_grasps.txt")), grasps).unwrap();
    }

    #[test]
    fn loads_fixture_scene_with_three_grasps() {
        let tmp = tempfile::tempdir().unwrap();
        write_fixture_scene(
            tmp.path(),
            "1a2b",
            0,
            "16.0;16.0;0.0;10.0;4.0\n10.5;20.0;45.0;8.0;3.0\n20.0;8.0;90.0;12.0;5.0\n",
        );
        let samples = load_jacquard(tmp.path()).unwrap();
        assert_eq!(samples.len(), 1);
        let s = &samples[0];
        assert_eq!(s.id, "0_1a2b");
        assert_eq!(s.object_id, "1a2b");
        assert_eq!(s.rectangles.len(), 3);
        // theta flips sign going to the image frame
        assert!((s.rectangles[1].theta - (-45f64.to_radians())).abs() < 1e-12);
        // 90 degrees wraps onto the +pi/2 end of the canonical range
        assert!((s.rectangles[2].theta.abs() - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(s.rectangles[2].width, 12.0);
        assert_eq!(s.rectangles[2].height, 5.0);
        // f32 depth tiff roundtrip
        let d = s.depth.as_ref().unwrap();
        assert!((d.get(0, 0) - 1.2).abs() < 1e-6);
    }

    #[test]
    fn malformed_grasp_line_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        write_fixture_scene(tmp.path(), "1a2b", 0, "16.0;16.0;0.0\n");
        match load_jacquard(tmp.path()) {
            Err(DatasetError::MalformedRectangle { line: 1, .. }) => {}
            other => panic!("expected malformed-rectangle, got {other:?}"),
        }
    }

    #[test]
    fn empty_root_is_missing_file() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_jacquard(tmp.path()),
            Err(DatasetError::MissingFile { .. })
        ));
    }

    #[test]
    #[ignore = "needs the full Jacquard dataset; set JACQUARD_ROOT"]
    fn full_dataset_counts() {
        let root = std::env::var("JACQUARD_ROOT").expect("JACQUARD_ROOT not set");
        let samples = load_jacquard(root).unwrap();
        assert!(samples.len() >= 50_000, "got {}", samples.len());
        let grasps: usize = samples.iter().map(|s| s.rectangles.len()).sum();
        assert!(grasps >= 1_000_000, "got {grasps}");
    }
}
