//! Center-crop, resize, depth inpainting and model-input assembly.

use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma};

use super::{DatasetError, Modality, Sample};
use crate::geometry::Image2;
use crate::Tensor32;

/// A sample brought to network resolution plus its normalized input.
///
/// The sample keeps un-normalized images (depth already inpainted, in
/// meters) with rectangle annotations mapped through the same crop/resize
/// affine; `input_chw` is the zero-centered tensor data, channel order
/// [depth, r, g, b] restricted to the modality.
#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub sample: Sample,
    pub input_chw: Vec<f32>,
    pub channels: usize,
    pub size: usize,
}

impl Preprocessed {
    /// Stacks preprocessed inputs into a (B, C, S, S) tensor.
    pub fn batch_tensor(items: &[&Preprocessed]) -> Tensor32 {
        assert!(!items.is_empty());
        let (c, s) = (items[0].channels, items[0].size);
        let mut data = Vec::with_capacity(items.len() * c * s * s);
        for it in items {
            assert_eq!(it.channels, c);
            assert_eq!(it.size, s);
            data.extend_from_slice(&it.input_chw);
        }
        Tensor32::new(data, &[items.len(), c, s, s], false)
    }
}

/// Fills depth holes (0 or NaN) by iterated diffusion: every pass assigns
/// each hole pixel the mean of its valid 8-neighbours, computed from the
/// previous pass's state, until no holes remain.
pub fn inpaint_depth(depth: &Image2<f32>) -> Result<Image2<f32>, DatasetError> {
    let (w, h) = (depth.width(), depth.height());
    let is_hole = |v: f32| v == 0.0 || !v.is_finite();
    let mut cur = depth.clone();
    let mut valid: Vec<bool> = cur.as_slice().iter().map(|&v| !is_hole(v)).collect();
    if !valid.iter().any(|&v| v) {
        return Err(DatasetError::AllDepthInvalid);
    }
    let mut holes: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| !valid[y * w + x])
        .collect();
    while !holes.is_empty() {
        let snapshot = cur.clone();
        let mut still = Vec::new();
        let mut filled = Vec::new();
        for &(x, y) in &holes {
            let mut acc = 0.0f32;
            let mut n = 0u32;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if valid[ny as usize * w + nx as usize] {
                        acc += snapshot.get(nx as usize, ny as usize);
                        n += 1;
                    }
                }
            }
            if n > 0 {
                cur.set(x, y, acc / n as f32);
                filled.push((x, y));
            } else {
                still.push((x, y));
            }
        }
        for (x, y) in filled {
            valid[y * w + x] = true;
        }
        holes = still;
    }
    Ok(cur)
}

fn resize_depth(depth: &Image2<f32>, crop: (u32, u32, u32), out: u32) -> Image2<f32> {
    let (ox, oy, side) = crop;
    let buf: ImageBuffer<Luma<f32>, Vec<f32>> = ImageBuffer::from_fn(
        depth.width() as u32,
        depth.height() as u32,
        |x, y| Luma([depth.get(x as usize, y as usize)]),
    );
    let cropped = imageops::crop_imm(&buf, ox, oy, side, side).to_image();
    let resized = imageops::resize(&cropped, out, out, FilterType::Triangle);
    Image2::from_vec(
        out as usize,
        out as usize,
        resized.into_raw(),
    )
}

/// Center-crop to a square, resize to `out_size`, normalize and stack the
/// requested modality channels. Rectangle annotations move through the
/// same affine map; rectangles leaving the frame are dropped.
pub fn preprocess(
    s: &Sample,
    out_size: usize,
    modality: Modality,
) -> Result<Preprocessed, DatasetError> {
    if modality.needs_rgb() && s.rgb.is_none() {
        return Err(DatasetError::MissingModality {
            id: s.id.clone(),
            needed: "rgb",
            modality,
        });
    }
    if modality.needs_depth() && s.depth.is_none() {
        return Err(DatasetError::MissingModality {
            id: s.id.clone(),
            needed: "depth",
            modality,
        });
    }
    let (w, h) = s.dims();
    if w == 0 || h == 0 {
        return Err(DatasetError::Format(format!("sample {} has no image", s.id)));
    }
    if let (Some(rgb), Some(d)) = (&s.rgb, &s.depth) {
        if (rgb.width() as usize, rgb.height() as usize) != (d.width(), d.height()) {
            return Err(DatasetError::Format(format!(
                "sample {}: rgb {}x{} vs depth {}x{}",
                s.id,
                rgb.width(),
                rgb.height(),
                d.width(),
                d.height()
            )));
        }
    }
    let side = w.min(h);
    let ox = (w - side) / 2;
    let oy = (h - side) / 2;
    let scale = out_size as f64 / side as f64;

    let rgb = s.rgb.as_ref().map(|rgb| {
        let cropped = imageops::crop_imm(rgb, ox as u32, oy as u32, side as u32, side as u32)
            .to_image();
        imageops::resize(&cropped, out_size as u32, out_size as u32, FilterType::Triangle)
    });
    let depth = match &s.depth {
        Some(d) => {
            let inpainted = inpaint_depth(d)?;
            Some(resize_depth(
                &inpainted,
                (ox as u32, oy as u32, side as u32),
                out_size as u32,
            ))
        }
        None => None,
    };

    // Same affine as the image path: translate by the crop offset, scale.
    let mut rectangles = Vec::new();
    for r in &s.rectangles {
        let moved = crate::geometry::GraspRectangle {
            center: ((r.center.0 - ox as f64) * scale, (r.center.1 - oy as f64) * scale),
            theta: r.theta,
            width: r.width * scale,
            height: r.height * scale,
        };
        let inside = moved.corners().iter().all(|&(x, y)| {
            x >= 0.0 && y >= 0.0 && x < out_size as f64 && y < out_size as f64
        });
        if inside {
            rectangles.push(moved);
        }
    }

    let mut input_chw = Vec::with_capacity(modality.channels() * out_size * out_size);
    if modality.needs_depth() {
        let d = depth.as_ref().expect("checked above");
        let mean = (d.as_slice().iter().map(|&v| v as f64).sum::<f64>()
            / (out_size * out_size) as f64) as f32;
        input_chw.extend(d.as_slice().iter().map(|&v| v - mean));
    }
    if modality.needs_rgb() {
        let rgb = rgb.as_ref().expect("checked above");
        for ch in 0..3 {
            input_chw.extend(
                rgb.pixels()
                    .map(|p| p.0[ch] as f32 / 255.0 - 0.5),
            );
        }
    }

    Ok(Preprocessed {
        sample: Sample {
            id: s.id.clone(),
            object_id: s.object_id.clone(),
            source: s.source,
            rgb,
            depth,
            rectangles,
        },
        input_chw,
        channels: modality.channels(),
        size: out_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Source;
    use crate::geometry::GraspRectangle;
    use image::Rgb;

    fn sample_640x480() -> Sample {
        let rgb = image::RgbImage::from_fn(640, 480, |x, _| Rgb([(x % 256) as u8, 50, 90]));
        let depth = Image2::new(640, 480, 0.8f32);
        Sample {
            id: "t".into(),
            object_id: "o".into(),
            source: Source::Cornell,
            rgb: Some(rgb),
            depth: Some(depth),
            rectangles: vec![
                GraspRectangle::new((320.0, 240.0), 0.4, 60.0, 30.0),
                // near the left edge: cropped away by the square crop
                GraspRectangle::new((30.0, 240.0), 0.0, 40.0, 20.0),
            ],
        }
    }

    #[test]
    fn crop_and_resize_move_rectangles_with_the_image() {
        let p = preprocess(&sample_640x480(), 224, Modality::Rgbd).unwrap();
        assert_eq!(p.channels, 4);
        assert_eq!(p.input_chw.len(), 4 * 224 * 224);
        // center rectangle survives: crop offset (80, 0), scale 224/480
        assert_eq!(p.sample.rectangles.len(), 1);
        let r = p.sample.rectangles[0];
        let scale = 224.0 / 480.0;
        assert!((r.center.0 - (320.0 - 80.0) * scale).abs() < 1e-9);
        assert!((r.center.1 - 240.0 * scale).abs() < 1e-9);
        assert!((r.width - 60.0 * scale).abs() < 1e-9);
        // the edge rectangle fell outside the square crop
    }

    #[test]
    fn already_square_sample_keeps_rectangles() {
        let rgb = image::RgbImage::from_pixel(224, 224, Rgb([10, 20, 30]));
        let s = Sample {
            id: "sq".into(),
            object_id: "o".into(),
            source: Source::Synthetic,
            rgb: Some(rgb),
            depth: None,
            rectangles: vec![GraspRectangle::new((100.0, 120.0), 0.3, 40.0, 20.0)],
        };
        let p = preprocess(&s, 224, Modality::Rgb).unwrap();
        let r = p.sample.rectangles[0];
        assert!((r.center.0 - 100.0).abs() < 1e-12);
        assert!((r.width - 40.0).abs() < 1e-12);
    }

    #[test]
    fn modality_controls_channel_stack() {
        let s = sample_640x480();
        assert_eq!(preprocess(&s, 96, Modality::D).unwrap().channels, 1);
        assert_eq!(preprocess(&s, 96, Modality::Rgb).unwrap().channels, 3);
        let p = preprocess(&s, 96, Modality::Rgbd).unwrap();
        assert_eq!(p.channels, 4);
        // depth channel is zero-centered
        let dsum: f32 = p.input_chw[..96 * 96].iter().sum();
        assert!(dsum.abs() < 1e-2, "{dsum}");
    }

    #[test]
    fn missing_channel_for_modality_errors() {
        let mut s = sample_640x480();
        s.rgb = None;
        assert!(matches!(
            preprocess(&s, 96, Modality::Rgb),
            Err(DatasetError::MissingModality { .. })
        ));
    }

    #[test]
    fn inpaint_identity_on_hole_free_input() {
        let d = Image2::new(8, 8, 1.5f32);
        let out = inpaint_depth(&d).unwrap();
        assert_eq!(out.as_slice(), d.as_slice());
    }

    #[test]
    fn single_hole_takes_neighbour_value() {
        let mut d = Image2::new(5, 5, 2.0f32);
        d.set(2, 2, 0.0);
        let out = inpaint_depth(&d).unwrap();
        assert!((out.get(2, 2) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn strip_fill_is_monotone_between_plates() {
        // columns 0..3 hold value 1, columns 9..12 hold value 3, holes between
        let mut d = Image2::new(12, 6, 0.0f32);
        for y in 0..6 {
            for x in 0..3 {
                d.set(x, y, 1.0);
            }
            for x in 9..12 {
                d.set(x, y, 3.0);
            }
        }
        let out = inpaint_depth(&d).unwrap();
        for y in 0..6 {
            let mut prev = 1.0f32;
            for x in 3..9 {
                let v = out.get(x, y);
                assert!((1.0..=3.0).contains(&v), "out of range at {x},{y}: {v}");
                assert!(v + 1e-4 >= prev, "not monotone at {x},{y}: {v} < {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn all_invalid_depth_is_an_error() {
        let d = Image2::new(4, 4, 0.0f32);
        assert!(matches!(
            inpaint_depth(&d),
            Err(DatasetError::AllDepthInvalid)
        ));
    }

    #[test]
    fn nan_holes_are_filled_too() {
        let mut d = Image2::new(4, 4, 1.0f32);
        d.set(1, 1, f32::NAN);
        d.set(2, 2, 0.0);
        let out = inpaint_depth(&d).unwrap();
        assert!(out.as_slice().iter().all(|v| (*v - 1.0).abs() < 1e-6));
    }
}
