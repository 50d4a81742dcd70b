//! Per-pixel grasp maps: rendering ground truth from rectangle
//! annotations and extracting point grasps from predicted maps.

use super::{decode_angle, encode_angle, GraspRectangle, Image2, PixelGrasp};

/// Quality, double-angle and normalized-width images sharing one shape.
#[derive(Clone, Debug)]
pub struct GraspMaps {
    pub quality: Image2<f32>,
    pub cos2t: Image2<f32>,
    pub sin2t: Image2<f32>,
    pub width: Image2<f32>,
}

impl GraspMaps {
    pub fn zeros(width: usize, height: usize) -> Self {
        GraspMaps {
            quality: Image2::new(width, height, 0.0),
            cos2t: Image2::new(width, height, 0.0),
            sin2t: Image2::new(width, height, 0.0),
            width: Image2::new(width, height, 0.0),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.quality.width(), self.quality.height())
    }
}

/// Rasterizes ground-truth maps from positive grasp rectangles.
///
/// Each rectangle stamps its center region (full width along the closing
/// axis, one third of the finger span) with quality 1, its double-angle
/// encoding, and its width normalized by `w_max`. Overlaps resolve to the
/// last rectangle in list order; everything else stays zero.
pub fn render_target_maps(
    rectangles: &[GraspRectangle],
    width: usize,
    height: usize,
    w_max: f64,
) -> GraspMaps {
    let mut maps = GraspMaps::zeros(width, height);
    for rect in rectangles {
        let region = GraspRectangle {
            height: rect.height / 3.0,
            ..*rect
        };
        let (c2, s2) = encode_angle(rect.theta);
        let w_norm = (rect.width / w_max).clamp(0.0, 1.0) as f32;
        stamp(&mut maps, &region, 1.0, c2 as f32, s2 as f32, w_norm);
    }
    maps
}

fn stamp(maps: &mut GraspMaps, region: &GraspRectangle, q: f32, c2: f32, s2: f32, w: f32) {
    let corners = region.corners();
    let min_x = corners.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let max_x = corners
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil()
        .min(maps.quality.width() as f64 - 1.0);
    let min_y = corners.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let max_y = corners
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil()
        .min(maps.quality.height() as f64 - 1.0);
    if max_x < 0.0 || max_y < 0.0 {
        return;
    }
    let (ux, uy) = region.width_axis();
    let (vx, vy) = region.height_axis();
    let (hw, hh) = (region.width / 2.0, region.height / 2.0);
    for y in min_y..=max_y as usize {
        for x in min_x..=max_x as usize {
            let dx = x as f64 - region.center.0;
            let dy = y as f64 - region.center.1;
            if (dx * ux + dy * uy).abs() <= hw && (dx * vx + dy * vy).abs() <= hh {
                maps.quality.set(x, y, q);
                maps.cos2t.set(x, y, c2);
                maps.sin2t.set(x, y, s2);
                maps.width.set(x, y, w);
            }
        }
    }
}

/// Peak-extraction parameters, frozen defaults for the whole pipeline.
#[derive(Clone, Copy, Debug)]
pub struct ExtractParams {
    /// Gaussian smoothing applied to the quality map before peak finding.
    pub sigma: f64,
    /// Peaks below this smoothed quality are ignored.
    pub threshold: f32,
    /// Maximum gripper opening in pixels (denormalizes the width map).
    pub w_max: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            sigma: 2.0,
            threshold: 0.2,
            w_max: 150.0,
        }
    }
}

/// Extracts up to `max_grasps` local quality maxima with pairwise
/// separation at least `min_distance` px, sorted by quality descending.
///
/// Returns an empty list when the whole smoothed quality map sits below
/// the threshold.
pub fn extract_grasps(
    maps: &GraspMaps,
    max_grasps: usize,
    min_distance: f64,
    params: &ExtractParams,
) -> Vec<PixelGrasp> {
    let (w, h) = maps.dims();
    if w == 0 || h == 0 || max_grasps == 0 {
        return Vec::new();
    }
    let smoothed = gaussian_blur(&maps.quality, params.sigma);
    let win = min_distance.ceil().max(1.0) as isize;

    // Local maxima over a Chebyshev window, value above threshold. Exactly
    // one candidate survives per flat plateau (its first pixel in scan
    // order); the plateau centroid refines the position afterwards.
    let mut candidates: Vec<(f32, usize, usize)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = smoothed.get(x, y);
            if v <= params.threshold {
                continue;
            }
            let mut is_peak = true;
            'scan: for dy in -win..=win {
                for dx in -win..=win {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let nv = smoothed.get(nx as usize, ny as usize);
                    if nv > v || (nv == v && (ny, nx) < (y as isize, x as isize)) {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                candidates.push((v, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));

    let mut picked: Vec<PixelGrasp> = Vec::new();
    let min_d2 = min_distance * min_distance;
    for (q, x, y) in candidates {
        if picked.len() >= max_grasps {
            break;
        }
        let cap = (3.0 * params.sigma).ceil().max(1.0) as i64;
        let (px, py) = plateau_centroid(&smoothed, x, y, cap);
        // Map lookups happen at the nearest pixel of the refined position.
        let lx = (px.round() as usize).min(w - 1);
        let ly = (py.round() as usize).min(h - 1);
        let far_enough = picked.iter().all(|g| {
            let dx = g.x - px;
            let dy = g.y - py;
            dx * dx + dy * dy >= min_d2
        });
        if !far_enough {
            continue;
        }
        let theta = match decode_angle(maps.cos2t.get(lx, ly) as f64, maps.sin2t.get(lx, ly) as f64)
        {
            Ok(t) => t,
            Err(_) => continue,
        };
        let width = (maps.width.get(lx, ly) as f64 * params.w_max).clamp(0.0, params.w_max);
        picked.push(PixelGrasp {
            x: px,
            y: py,
            theta,
            width,
            quality: q as f64,
        });
    }
    picked
}

/// Centroid of the connected near-maximum ridge around a peak, within a
/// Chebyshev window of `cap` pixels. Rasterized targets smooth into flat
/// ridges whose discrete argmax sits anywhere along them; the centroid
/// restores the center. Sharply peaked network maps are barely moved.
fn plateau_centroid(img: &Image2<f32>, x0: usize, y0: usize, cap: i64) -> (f64, f64) {
    let v = img.get(x0, y0);
    let floor = v * 0.98;
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; w * h];
    let mut queue = vec![(x0, y0)];
    seen[y0 * w + x0] = true;
    let (mut sx, mut sy, mut count) = (0.0f64, 0.0f64, 0u32);
    while let Some((x, y)) = queue.pop() {
        sx += x as f64;
        sy += y as f64;
        count += 1;
        for (dx, dy) in [
            (-1i64, -1i64),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ] {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx < 0
                || ny < 0
                || nx >= w as i64
                || ny >= h as i64
                || (nx - x0 as i64).abs() > cap
                || (ny - y0 as i64).abs() > cap
            {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !seen[ny * w + nx] && img.get(nx, ny) >= floor {
                seen[ny * w + nx] = true;
                queue.push((nx, ny));
            }
        }
    }
    (sx / count as f64, sy / count as f64)
}

/// Separable Gaussian blur with replicated borders; kernel truncated at
/// three sigma. Sigma <= 0 returns the input unchanged.
pub fn gaussian_blur(img: &Image2<f32>, sigma: f64) -> Image2<f32> {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    let denom = 2.0 * sigma * sigma;
    for i in -radius..=radius {
        kernel.push((-((i * i) as f64) / denom).exp());
    }
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f32> = kernel.iter().map(|v| (v / norm) as f32).collect();

    let (w, h) = (img.width(), img.height());
    let mut tmp = Image2::new(w, h, 0.0f32);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (ki, kv) in kernel.iter().enumerate() {
                let sx = (x as isize + ki as isize - radius).clamp(0, w as isize - 1);
                acc += kv * img.get(sx as usize, y);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Image2::new(w, h, 0.0f32);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (ki, kv) in kernel.iter().enumerate() {
                let sy = (y as isize + ki as isize - radius).clamp(0, h as isize - 1);
                acc += kv * tmp.get(x, sy as usize);
            }
            out.set(x, y, acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angle_distance, metric_match, DEFAULT_HEIGHT_RATIO};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_rectangle_list_renders_zero_maps() {
        let maps = render_target_maps(&[], 32, 32, 100.0);
        assert!(maps.quality.as_slice().iter().all(|&v| v == 0.0));
        assert!(maps.width.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn axis_aligned_mask_area_matches_pixel_count_oracle() {
        // center region spans full width x height/3
        let rect = GraspRectangle::new((32.0, 32.0), 0.0, 30.0, 18.0);
        let maps = render_target_maps(&[rect], 64, 64, 100.0);
        let count = maps.quality.as_slice().iter().filter(|&&v| v > 0.0).count() as f64;
        let expect = 30.0 * 6.0;
        let perimeter = 2.0 * (30.0 + 6.0);
        assert!(
            (count - expect).abs() <= perimeter,
            "mask {count} px vs expected {expect} +- {perimeter}"
        );
    }

    #[test]
    fn rotating_the_rectangle_rotates_the_mask() {
        let base = GraspRectangle::new((32.0, 32.0), 0.0, 28.0, 15.0);
        let phi = 0.6;
        let turned = GraspRectangle { theta: phi, ..base };
        let m0 = render_target_maps(&[base], 64, 64, 100.0);
        let m1 = render_target_maps(&[turned], 64, 64, 100.0);
        // rotate m0's support by phi about the center and compare with m1
        let (mut inter, mut union) = (0u32, 0u32);
        for y in 0..64 {
            for x in 0..64 {
                let on1 = m1.quality.get(x, y) > 0.0;
                // inverse-rotate the sample point into m0's frame
                let dx = x as f64 - 32.0;
                let dy = y as f64 - 32.0;
                let sx = 32.0 + dx * phi.cos() + dy * phi.sin();
                let sy = 32.0 - dx * phi.sin() + dy * phi.cos();
                let (rx, ry) = (sx.round(), sy.round());
                let on0 = rx >= 0.0
                    && ry >= 0.0
                    && rx < 64.0
                    && ry < 64.0
                    && m0.quality.get(rx as usize, ry as usize) > 0.0;
                inter += (on0 && on1) as u32;
                union += (on0 || on1) as u32;
            }
        }
        let iou = inter as f64 / union as f64;
        assert!(iou >= 0.9, "rotated-support IoU {iou}");
    }

    #[test]
    fn all_zero_quality_yields_no_grasps() {
        let maps = GraspMaps::zeros(48, 48);
        let got = extract_grasps(&maps, 5, 2.0, &ExtractParams::default());
        assert!(got.is_empty());
    }

    #[test]
    fn render_then_extract_recovers_the_rectangle() {
        let rect = GraspRectangle::new((24.0, 30.0), 0.8, 20.0, 12.0);
        let params = ExtractParams {
            w_max: 48.0,
            ..ExtractParams::default()
        };
        let maps = render_target_maps(&[rect], 64, 64, params.w_max);
        let grasps = extract_grasps(&maps, 3, 2.0, &params);
        assert!(!grasps.is_empty());
        let top = &grasps[0];
        let dist = ((top.x - 24.0).powi(2) + (top.y - 30.0).powi(2)).sqrt();
        assert!(dist <= 3.0, "peak {dist} px from center");
        assert!(
            angle_distance(top.theta, 0.8) < 2f64.to_radians(),
            "theta {} vs 0.8",
            top.theta
        );
        assert!((top.width - 20.0).abs() < 2.0, "width {}", top.width);
    }

    #[test]
    fn two_disjoint_rectangles_give_two_grasps() {
        let a = GraspRectangle::new((16.0, 16.0), 0.4, 14.0, 9.0);
        let b = GraspRectangle::new((48.0, 48.0), -0.9, 16.0, 9.0);
        let params = ExtractParams {
            w_max: 48.0,
            ..ExtractParams::default()
        };
        let maps = render_target_maps(&[a, b], 64, 64, params.w_max);
        let grasps = extract_grasps(&maps, 4, 4.0, &params);
        assert!(grasps.len() >= 2, "got {}", grasps.len());
        let near = |g: &PixelGrasp, c: (f64, f64)| ((g.x - c.0).powi(2) + (g.y - c.1).powi(2)).sqrt() < 5.0;
        assert!(grasps.iter().any(|g| near(g, (16.0, 16.0))));
        assert!(grasps.iter().any(|g| near(g, (48.0, 48.0))));
    }

    #[test]
    fn random_scene_geometry_roundtrip_rate() {
        // render -> extract -> to_rectangle -> metric_match, no network
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let params = ExtractParams {
            w_max: 64.0,
            ..ExtractParams::default()
        };
        let mut hits = 0;
        let n = 200;
        for _ in 0..n {
            let rect = GraspRectangle::new(
                (rng.gen_range(16.0..48.0), rng.gen_range(16.0..48.0)),
                rng.gen_range(-1.57..1.57),
                rng.gen_range(10.0..30.0),
                rng.gen_range(6.0..16.0),
            );
            let maps = render_target_maps(&[rect], 64, 64, params.w_max);
            let grasps = extract_grasps(&maps, 1, 2.0, &params);
            if let Some(g) = grasps.first() {
                if metric_match(&g.to_rectangle(DEFAULT_HEIGHT_RATIO), &[rect]) {
                    hits += 1;
                }
            }
        }
        assert!(hits as f64 / n as f64 >= 0.99, "{hits}/{n}");
    }

    #[test]
    fn blur_preserves_constant_images() {
        let img = Image2::new(16, 16, 0.7f32);
        let out = gaussian_blur(&img, 2.0);
        for &v in out.as_slice() {
            assert!((v - 0.7).abs() < 1e-5);
        }
    }
}
