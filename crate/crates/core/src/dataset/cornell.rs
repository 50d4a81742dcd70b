//! Cornell grasp dataset ingestion.
//!
//! Expected layout (possibly nested in numbered subdirectories):
//!   pcdXXXXr.png      RGB frame
//!   pcdXXXX.txt       ASCII PCD point cloud; the `index` field maps a
//!                     point to row * image_width + col
//!   pcdXXXXcpos.txt   positive rectangles, four "x y" vertex lines each
//!   pcdXXXXcneg.txt   negative rectangles (parsed, excluded from targets)
//!   z.txt             optional "image-number object-number" table used
//!                     for object-wise splits
//!
//! Cornell vertices run plate edge first: the segment p0-p1 lies along a
//! gripper plate, perpendicular to the closing direction. Annotations are
//! hand-drawn and often slightly skewed, so rectangles are fitted from
//! averaged edge pairs rather than strict corner reconstruction.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{DatasetError, Sample, Source};
use crate::geometry::{wrap_angle, GraspRectangle, Image2};

/// Fits (center, theta, width, height) from a Cornell vertex quad.
/// Returns None when any coordinate is NaN (such rectangles are dropped).
fn rect_from_cornell_quad(q: &[(f64, f64); 4]) -> Option<GraspRectangle> {
    if q.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return None;
    }
    let cx = q.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let cy = q.iter().map(|p| p.1).sum::<f64>() / 4.0;
    // Width edges (closing direction): q1->q2 and q0->q3.
    let wx = (q[2].0 - q[1].0 + q[3].0 - q[0].0) / 2.0;
    let wy = (q[2].1 - q[1].1 + q[3].1 - q[0].1) / 2.0;
    // Plate edges: q0->q1 and q3->q2.
    let hx = (q[1].0 - q[0].0 + q[2].0 - q[3].0) / 2.0;
    let hy = (q[1].1 - q[0].1 + q[2].1 - q[3].1) / 2.0;
    let width = (wx * wx + wy * wy).sqrt();
    let height = (hx * hx + hy * hy).sqrt();
    if width <= 0.0 || height <= 0.0 {
        return None;
    }
    Some(GraspRectangle::new(
        (cx, cy),
        wrap_angle(wy.atan2(wx)),
        width,
        height,
    ))
}

/// Parses a Cornell rectangle file: four "x y" lines per rectangle.
/// NaN-vertex rectangles are dropped with a warning; anything else
/// malformed is an error carrying the line number.
fn parse_rect_file(path: &Path) -> Result<Vec<GraspRectangle>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let mut rects = Vec::new();
    let mut quad: Vec<(f64, f64)> = Vec::with_capacity(4);
    let mut quad_start = 0usize;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<f64, DatasetError> {
            let tok = tok.ok_or_else(|| DatasetError::MalformedRectangle {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "expected two coordinates".into(),
            })?;
            if tok.eq_ignore_ascii_case("nan") {
                return Ok(f64::NAN);
            }
            tok.parse::<f64>()
                .map_err(|e| DatasetError::MalformedRectangle {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: e.to_string(),
                })
        };
        let x = parse(it.next())?;
        let y = parse(it.next())?;
        if quad.is_empty() {
            quad_start = i + 1;
        }
        quad.push((x, y));
        if quad.len() == 4 {
            let q: [(f64, f64); 4] = [quad[0], quad[1], quad[2], quad[3]];
            match rect_from_cornell_quad(&q) {
                Some(r) => rects.push(r),
                None => log::warn!(
                    "dropping rectangle with NaN vertices at {} line {}",
                    path.display(),
                    quad_start
                ),
            }
            quad.clear();
        }
    }
    if !quad.is_empty() {
        return Err(DatasetError::MalformedRectangle {
            path: path.to_path_buf(),
            line: quad_start,
            reason: format!("dangling rectangle with {} of 4 vertices", quad.len()),
        });
    }
    Ok(rects)
}

/// Reads an ASCII PCD with an `index` column into a depth image of the
/// given dimensions. Unreferenced pixels stay 0 (holes).
fn parse_pcd_depth(path: &Path, width: usize, height: usize) -> Result<Image2<f32>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let mut depth = Image2::new(width, height, 0.0f32);
    let mut fields: Option<(usize, usize)> = None; // (z column, index column)
    let mut in_data = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_data {
            if let Some(rest) = line.strip_prefix("FIELDS") {
                let names: Vec<&str> = rest.split_whitespace().collect();
                let z = names.iter().position(|&n| n == "z");
                let idx = names.iter().position(|&n| n == "index");
                match (z, idx) {
                    (Some(z), Some(idx)) => fields = Some((z, idx)),
                    _ => {
                        return Err(DatasetError::Format(format!(
                            "{}: PCD lacks z/index fields",
                            path.display()
                        )))
                    }
                }
            }
            if line.starts_with("DATA") {
                if !line.contains("ascii") {
                    return Err(DatasetError::Format(format!(
                        "{}: only ascii PCD is supported",
                        path.display()
                    )));
                }
                in_data = true;
            }
            continue;
        }
        let (zc, ic) = fields.ok_or_else(|| {
            DatasetError::Format(format!("{}: DATA before FIELDS", path.display()))
        })?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() <= zc.max(ic) {
            return Err(DatasetError::Format(format!(
                "{} line {}: short point row",
                path.display(),
                i + 1
            )));
        }
        let z: f32 = toks[zc].parse().unwrap_or(f32::NAN);
        let index: usize = toks[ic].parse().map_err(|_| {
            DatasetError::Format(format!("{} line {}: bad index", path.display(), i + 1))
        })?;
        if index < width * height && z.is_finite() {
            depth.set(index % width, index / width, z);
        }
    }
    Ok(depth)
}

/// Optional image-to-object mapping (z.txt): first token image number,
/// second token object number.
fn parse_object_table(root: &Path) -> HashMap<String, String> {
    let mut map = HashMap::new();
    let path = root.join("z.txt");
    if let Ok(text) = std::fs::read_to_string(&path) {
        for line in text.lines() {
            let mut it = line.split_whitespace();
            if let (Some(img), Some(obj)) = (it.next(), it.next()) {
                map.insert(img.to_string(), obj.to_string());
            }
        }
    }
    map
}

fn find_cornell_ids(root: &Path) -> Result<Vec<(String, PathBuf)>, DatasetError> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir)?;
        for entry in entries {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                if let Some(id) = name.strip_suffix("cpos.txt") {
                    if id.starts_with("pcd") {
                        out.push((id.to_string(), dir.clone()));
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Loads every Cornell sample under `root`. Depth comes from the per-
/// sample point cloud; object ids come from z.txt when present, else the
/// image id stands in (with a warning, object-wise splits degrade).
pub fn load_cornell(root: impl AsRef<Path>) -> Result<Vec<Sample>, DatasetError> {
    let root = root.as_ref();
    let ids = find_cornell_ids(root)?;
    if ids.is_empty() {
        return Err(DatasetError::MissingFile {
            id: "pcd*cpos.txt".into(),
            path: root.to_path_buf(),
        });
    }
    let objects = parse_object_table(root);
    if objects.is_empty() {
        log::warn!(
            "no z.txt object table under {}; object-wise splits fall back to per-image ids",
            root.display()
        );
    }
    let mut samples = Vec::with_capacity(ids.len());
    for (id, dir) in ids {
        let rgb_path = dir.join(format!("{id}r.png"));
        let rgb = image::open(&rgb_path)
            .map_err(|_| DatasetError::MissingFile {
                id: id.clone(),
                path: rgb_path.clone(),
            })?
            .to_rgb8();
        let pcd_path = dir.join(format!("{id}.txt"));
        if !pcd_path.exists() {
            return Err(DatasetError::MissingFile {
                id: id.clone(),
                path: pcd_path,
            });
        }
        let depth = parse_pcd_depth(&pcd_path, rgb.width() as usize, rgb.height() as usize)?;
        let rectangles = parse_rect_file(&dir.join(format!("{id}cpos.txt")))?;
        // Negatives are validated but never become training targets.
        let neg_path = dir.join(format!("{id}cneg.txt"));
        if neg_path.exists() {
            let _ = parse_rect_file(&neg_path)?;
        }
        let number = id.trim_start_matches("pcd").to_string();
        let object_id = objects.get(&number).cloned().unwrap_or_else(|| id.clone());
        samples.push(Sample {
            id,
            object_id,
            source: Source::Cornell,
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

    /// Writes a miniature sample in the published Cornell layout.
    pub(crate) fn write_fixture_sample(
        dir: &Path,
        id: &str,
        w: u32,
        h: u32,
        rects: &[[(f64, f64); 4]],
    ) {
        let rgb = image::RgbImage::from_fn(w, h, |x, y| Rgb([x as u8, y as u8, 64]));
        rgb.save(dir.join(format!("{id}r.png"))).unwrap();
        let mut pcd = String::new();
        pcd.push_str("# .PCD v.7 - Point Cloud Data file format\nVERSION .7\n");
        pcd.push_str("FIELDS x y z rgb index\nSIZE 4 4 4 4 4\nTYPE F F F F U\nCOUNT 1 1 1 1 1\n");
        let points = (w * h) as usize;
        pcd.push_str(&format!(
            "WIDTH {points}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {points}\nDATA ascii\n"
        ));
        for i in 0..points {
            pcd.push_str(&format!("0.1 0.2 {} 0 {i}\n", 0.7 + (i % 7) as f64 * 0.01));
        }
        std::fs::write(dir.join(format!("{id}.txt")), pcd).unwrap();
        let mut cpos = String::new();
        for q in rects {
            for (x, y) in q {
                cpos.push_str(&format!("{x} {y}\n"));
            }
        }
        std::fs::write(dir.join(format!("{id}cpos.txt")), cpos).unwrap();
        std::fs::write(dir.join(format!("{id}cneg.txt")), "").unwrap();
    }

    /// Cornell-ordered quad for a rectangle: plate edge first.
    pub(crate) fn cornell_quad(
        center: (f64, f64),
        theta: f64,
        width: f64,
        height: f64,
    ) -> [(f64, f64); 4] {
        let r = GraspRectangle::new(center, theta, width, height);
        let c = r.corners();
        // our corner 1 starts the plate edge 1->2
        [c[1], c[2], c[3], c[0]]
    }

    #[test]
    fn loads_fixture_layout_and_recovers_rectangles() {
        let tmp = tempfile::tempdir().unwrap();
        let sub = tmp.path().join("01");
        std::fs::create_dir(&sub).unwrap();
        write_fixture_sample(
            &sub,
            "pcd0100",
            48,
            32,
            &[cornell_quad((20.0, 16.0), 0.5, 14.0, 8.0)],
        );
        write_fixture_sample(
            &sub,
            "pcd0101",
            48,
            32,
            &[
                cornell_quad((24.0, 12.0), -0.3, 12.0, 6.0),
                cornell_quad((10.0, 20.0), 1.2, 10.0, 5.0),
            ],
        );
        std::fs::write(tmp.path().join("z.txt"), "0100 7\n0101 7\n").unwrap();

        let samples = load_cornell(tmp.path()).unwrap();
        assert_eq!(samples.len(), 2);
        let s0 = &samples[0];
        assert_eq!(s0.id, "pcd0100");
        assert_eq!(s0.object_id, "7");
        assert_eq!(s0.rectangles.len(), 1);
        let r = s0.rectangles[0];
        assert!((r.center.0 - 20.0).abs() < 1e-6);
        assert!((r.theta - 0.5).abs() < 1e-6);
        assert!((r.width - 14.0).abs() < 1e-6);
        assert!((r.height - 8.0).abs() < 1e-6);
        // depth came through the PCD index mapping
        let d = s0.depth.as_ref().unwrap();
        assert!((d.get(0, 0) - 0.7).abs() < 1e-5);
        assert_eq!(samples[1].rectangles.len(), 2);
    }

    #[test]
    fn nan_rectangles_are_dropped_not_fatal() {
        let tmp = tempfile::tempdir().unwrap();
        write_fixture_sample(tmp.path(), "pcd0200", 16, 16, &[]);
        std::fs::write(
            tmp.path().join("pcd0200cpos.txt"),
            "NaN 2.0\n3 4\n5 6\n7 8\n1 1\n1 5\n9 5\n9 1\n",
        )
        .unwrap();
        let samples = load_cornell(tmp.path()).unwrap();
        assert_eq!(samples[0].rectangles.len(), 1);
    }

    #[test]
    fn malformed_rectangle_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        write_fixture_sample(tmp.path(), "pcd0300", 16, 16, &[]);
        std::fs::write(tmp.path().join("pcd0300cpos.txt"), "1 2\n3 oops\n5 6\n7 8\n").unwrap();
        match load_cornell(tmp.path()) {
            Err(DatasetError::MalformedRectangle { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-rectangle error, got {other:?}"),
        }
    }

    #[test]
    fn empty_directory_is_a_missing_file_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_cornell(tmp.path()),
            Err(DatasetError::MissingFile { .. })
        ));
    }

    #[test]
    #[ignore = "needs the full Cornell dataset; set CORNELL_ROOT"]
    fn full_dataset_counts() {
        let root = std::env::var("CORNELL_ROOT").expect("CORNELL_ROOT not set");
        let samples = load_cornell(root).unwrap();
        assert_eq!(samples.len(), 1035);
        let positives: usize = samples.iter().map(|s| s.rectangles.len()).sum();
        assert_eq!(positives, 5110);
    }
}
